"""Exception types shared across the toolkit."""


class DomainError(ValueError):
    """An argument lies outside the domain of a mathematical function."""


class InfeasibleError(ValueError):
    """No operating point satisfies the requested constraints.

    ``deficit`` carries the size of the violation when one is meaningful
    (for example the extra power in watts a power allocation would need).
    """

    def __init__(self, message, deficit=None, index=None):
        super().__init__(message)
        self.deficit = deficit
        self.index = index


class GeometryError(ValueError):
    """Scenario geometry is inconsistent or cannot host the requested entities."""


class ConfigError(ValueError):
    """Experiment configuration could not be parsed or validated."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
