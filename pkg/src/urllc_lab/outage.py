"""Outage-latency tradeoff for SIMO links with maximum ratio combining.

A packet of ``C`` bits spread over ``floor(L/T_s) * floor(B/f_s)``
resource elements is lost when the post-combining SNR falls below
``2**q - 1``. Outage is evaluated analytically for i.i.d. Rayleigh
branches and by Monte-Carlo for exponentially correlated branches.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DomainError
from .numerics import gamma_lower_regularized

BASE_SUBCARRIER_SPACING = 15e3
_FLOOR_SLACK = 1e-9
_MC_CHUNK = 1 << 16


@dataclass(frozen=True)
class ResourceGridConfig:
    symbol_duration: float = 1.0 / BASE_SUBCARRIER_SPACING
    subcarrier_spacing: float = BASE_SUBCARRIER_SPACING
    bandwidth: float = 180e3
    packet_bits: int = 256

    def __post_init__(self):
        if self.symbol_duration <= 0 or self.subcarrier_spacing <= 0:
            raise DomainError("symbol duration and subcarrier spacing must be positive")
        if abs(self.symbol_duration * self.subcarrier_spacing - 1.0) > 1e-9:
            raise DomainError("symbol_duration * subcarrier_spacing must equal 1")
        if self.bandwidth < self.subcarrier_spacing:
            raise DomainError("bandwidth must cover at least one subcarrier")
        if self.packet_bits < 1:
            raise DomainError("packet_bits must be at least 1")

    @classmethod
    def from_numerology(cls, n=0, bandwidth=180e3, packet_bits=256):
        """Grid with subcarrier spacing 15 * 2**n kHz."""
        fs = BASE_SUBCARRIER_SPACING * 2.0 ** n
        return cls(1.0 / fs, fs, bandwidth, packet_bits)

    def resource_elements(self, latency):
        n_sym = math.floor(latency / self.symbol_duration + _FLOOR_SLACK)
        n_sc = math.floor(self.bandwidth / self.subcarrier_spacing + _FLOOR_SLACK)
        return n_sym, n_sc


@dataclass(frozen=True)
class DiversityChannel:
    num_rx_antennas: int
    avg_snr: float
    correlation: float = 0.0

    def __post_init__(self):
        if self.num_rx_antennas < 1:
            raise DomainError("need at least one receive antenna")
        if not self.avg_snr > 0:
            raise DomainError("average SNR must be positive")
        if not 0.0 <= self.correlation < 1.0:
            raise DomainError("correlation must lie in [0, 1)")

    def correlation_matrix(self):
        idx = np.arange(self.num_rx_antennas)
        return self.correlation ** np.abs(idx[:, None] - idx[None, :])


@dataclass
class TradeoffCurve:
    points: list = field(default_factory=list)
    lrtd: float | None = None

    def __post_init__(self):
        lat = [p[0] for p in self.points]
        if any(b <= a for a, b in zip(lat, lat[1:])):
            raise DomainError("latencies must be strictly increasing")
        if any(not 0.0 <= p[1] <= 1.0 for p in self.points):
            raise DomainError("outage values must lie in [0, 1]")

    @property
    def latencies(self):
        return np.array([p[0] for p in self.points])

    @property
    def outages(self):
        return np.array([p[1] for p in self.points])


def snr_threshold(cfg: ResourceGridConfig, latency: float) -> float:
    """SNR below which ``cfg.packet_bits`` cannot fit in ``latency`` seconds."""
    n_sym, n_sc = cfg.resource_elements(latency)
    if n_sym < 1 or n_sc < 1:
        raise DomainError(f"latency {latency:g} s is shorter than one symbol ({cfg.symbol_duration:g} s)")
    q = cfg.packet_bits / (n_sym * n_sc)
    return math.expm1(q * math.log(2.0))


def outage_mrc_iid(ch: DiversityChannel, rho_th: float) -> float:
    # post-combining SNR of N i.i.d. Rayleigh branches is Gamma(N, avg_snr)
    if ch.correlation != 0.0:
        raise DomainError("analytic MRC outage requires uncorrelated branches")
    if rho_th < 0:
        raise DomainError("threshold must be non-negative")
    return gamma_lower_regularized(ch.num_rx_antennas, rho_th / ch.avg_snr)


def _combined_gains(ch, trials, seed, backend=None):
    """Post-MRC channel gain ``||h||^2`` for ``trials`` draws.

    Draws are generated in fixed-size chunks, each from its own child of
    ``SeedSequence(seed)``, so the sample stream does not depend on how the
    chunks are scheduled. Branch correlation only changes the colouring
    matrix, so two channels sharing a seed see the same white draws.
    """
    chol = np.linalg.cholesky(ch.correlation_matrix())
    n_chunks = -(-trials // _MC_CHUNK)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    out = np.empty(trials)
    scale = math.sqrt(0.5)
    for i, child in enumerate(children):
        start = i * _MC_CHUNK
        size = min(_MC_CHUNK, trials - start)
        rng = np.random.default_rng(child)
        w = rng.standard_normal((2, size, ch.num_rx_antennas)) * scale
        out[start:start + size] = _kernels.mrc_combined_gain(w[0], w[1], chol, backend)
    return out


def _binomial(count, trials):
    p = count / trials
    return p, math.sqrt(p * (1.0 - p) / trials)


def outage_mrc_correlated_mc(ch: DiversityChannel, rho_th: float, trials: int = 10**6, seed: int = 0, backend=None):
    """Monte-Carlo MRC outage; returns (estimate, binomial standard error)."""
    if trials < 10**4:
        raise DomainError("Monte-Carlo outage needs at least 1e4 trials")
    snr = ch.avg_snr * _combined_gains(ch, trials, seed, backend)
    return _binomial(int(np.count_nonzero(snr < rho_th)), trials)


def outage_mrc_mc_many(ch: DiversityChannel, thresholds, trials: int = 10**6, seed: int = 0, backend=None):
    """Monte-Carlo outage for many thresholds from one shared sample set."""
    if trials < 10**4:
        raise DomainError("Monte-Carlo outage needs at least 1e4 trials")
    snr = np.sort(ch.avg_snr * _combined_gains(ch, trials, seed, backend))
    counts = np.searchsorted(snr, np.asarray(thresholds, dtype=float), side="left")
    p = counts / trials
    return p, np.sqrt(p * (1.0 - p) / trials)


def lrtd_estimate(curve: TradeoffCurve, tail_max: float = 0.1) -> float:
    """Least-squares slope of -log(outage) against log(latency) over the tail.

    Tail points are those with outage strictly between 0 and ``tail_max``;
    at least five spanning a decade of latency are required.
    """
    lat = curve.latencies
    out = curve.outages
    mask = (out > 0.0) & (out < tail_max)
    lat, out = lat[mask], out[mask]
    if lat.size < 5 or lat.max() / lat.min() < 10.0 * (1 - 1e-12):
        raise DomainError(
            f"LRTD needs >= 5 tail points over >= 1 latency decade, got {lat.size} points"
        )
    slope, _ = np.polyfit(np.log(lat), -np.log(out), 1)
    return float(slope)


def tradeoff_sweep(cfg: ResourceGridConfig, ch: DiversityChannel, latencies, trials: int = 10**6, seed: int = 0,
                   backend=None) -> TradeoffCurve:
    """Outage at each latency; analytic for i.i.d. branches, Monte-Carlo otherwise.

    The Monte-Carlo path reuses one sample set for every latency, which keeps
    the curve monotone in latency.
    """
    latencies = [float(x) for x in latencies]
    thresholds = [snr_threshold(cfg, lat) for lat in latencies]
    if ch.correlation == 0.0:
        outs = [outage_mrc_iid(ch, t) for t in thresholds]
    else:
        outs = list(outage_mrc_mc_many(ch, thresholds, trials, seed, backend)[0])
    curve = TradeoffCurve(list(zip(latencies, (float(o) for o in outs))))
    try:
        curve.lrtd = lrtd_estimate(curve)
    except DomainError:
        curve.lrtd = None
    return curve
