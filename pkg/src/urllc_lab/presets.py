"""Named latency/reliability requirement classes for V2X use cases."""
from __future__ import annotations

from dataclasses import dataclass

from .errors import DomainError
from .queueing import QosRequirement


@dataclass(frozen=True)
class RequirementPreset:
    """Latency bounds in seconds and packet error-probability bounds.

    ``None`` marks an open end. Medium classes have no stated upper bound
    and start where the "low" class ends (5 ms, 1e-3).
    """

    name: str
    pattern: str
    latency_class: str
    latency_min: float | None
    latency_max: float | None
    reliability_class: str
    error_min: float | None
    error_max: float | None
    data_rate_class: str

    def __post_init__(self):
        for v in (self.latency_min, self.latency_max, self.error_min, self.error_max):
            if v is not None and v <= 0:
                raise DomainError(f"preset {self.name}: bounds must be positive")


_ULTRA_LOW = ("ultra-low", None, 1e-3)
_LOW = ("low", 1e-3, 5e-3)
_MEDIUM_LAT = ("medium", 5e-3, None)
_ULTRA_HIGH = ("ultra-high", None, 1e-5)
_HIGH = ("high", 1e-5, 1e-3)
_MEDIUM_REL = ("medium", 1e-3, None)

PRESETS = {
    p.name: p
    for p in (
        RequirementPreset("driving-and-road-safety", "V2V/V2P", *_ULTRA_LOW, *_ULTRA_HIGH, "low"),
        RequirementPreset("cooperative-awareness-and-control", "V2V/V2P", *_ULTRA_LOW, *_ULTRA_HIGH, "medium"),
        RequirementPreset("mobility-as-a-service", "V2V/V2P", *_MEDIUM_LAT, *_MEDIUM_REL, "high"),
        RequirementPreset("traffic-efficiency", "V2I/V2N", *_LOW, *_HIGH, "low"),
        RequirementPreset("periodic-report", "V2I/V2N", *_LOW, *_HIGH, "medium"),
        RequirementPreset("social-entertainment", "V2I/V2N", *_MEDIUM_LAT, *_MEDIUM_REL, "ultra-high"),
    )
}

# queueing targets used by the urban V2V experiment
URBAN_V2V_QOS = QosRequirement(latency_bound=0.1, violation_prob=0.05)
# one 32-byte packet within 1 ms at 1e-5 error
URLLC_BASELINE = {"packet_bits": 256, "latency": 1e-3, "error_prob": 1e-5}


def list_presets():
    return list(PRESETS.values())


def get_preset(name: str) -> RequirementPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise DomainError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
