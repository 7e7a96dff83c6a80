"""Freeway massive-MIMO V2I downlink.

A roadside BS with ``M`` antennas sits ``d_B`` metres off the middle of a
``d_R`` metre road segment and serves ``K = kappa * d_R`` single-antenna
vehicles. With many antennas the per-user SINR hardens to a deterministic
function of the large-scale gains and the power split, so latency under a
finite-blocklength rate target depends on location information only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InfeasibleError
from .numerics import fbl_min_latency, fbl_required_snr
from .traffic import FreewayLayout, UnderwoodModel, place_freeway_vehicles, vehicle_count

REFERENCE_USERS = 10  # users at the kappa = 0.05 operating point on a 200 m road
REFERENCE_SNR_DB = 30.0


def thermal_noise(bandwidth: float, noise_figure_db: float = 9.0) -> float:
    """Noise power in watts: -174 dBm/Hz over ``bandwidth`` plus noise figure."""
    dbm = -174.0 + 10.0 * math.log10(bandwidth) + noise_figure_db
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class PathLoss:
    exponent: float = 2.5
    ref_gain: float | None = None  # gain at 1 m; None means calibrate from the scenario

    def __post_init__(self):
        if self.exponent < 2:
            raise DomainError("path-loss exponent must be at least 2")
        if self.ref_gain is not None and self.ref_gain <= 0:
            raise DomainError("reference gain must be positive")


@dataclass(frozen=True)
class UserQos:
    rate: float = 100e3
    error_prob: float = 1e-6

    def __post_init__(self):
        if self.rate <= 0:
            raise DomainError("required rate must be positive")
        if not 0 < self.error_prob < 0.5:
            raise DomainError("error probability must lie in (0, 0.5)")


@dataclass(frozen=True)
class FreewayScenario:
    layout: FreewayLayout = field(default_factory=FreewayLayout)
    model: UnderwoodModel = field(default_factory=UnderwoodModel)
    antennas: int = 300
    bandwidth: float = 200e3
    total_power: float = 10.0  # W (10 dBW)
    noise_power: float | None = None
    pathloss: PathLoss = field(default_factory=PathLoss)
    placement: str = "equispaced"
    seed: int | None = None

    def __post_init__(self):
        if self.layout.max_density != self.model.max_density:
            raise DomainError("layout and traffic model disagree on the maximum density")
        if self.total_power <= 0:
            raise DomainError("total power must be positive")
        if self.noise_power is not None and self.noise_power <= 0:
            raise DomainError("noise power must be positive")
        if self.bandwidth <= 0:
            raise DomainError("bandwidth must be positive")
        if self.antennas <= self.num_users:
            raise DomainError(f"need more antennas ({self.antennas}) than users ({self.num_users})")

    @property
    def num_users(self) -> int:
        return vehicle_count(self.layout)

    @property
    def noise(self) -> float:
        return thermal_noise(self.bandwidth) if self.noise_power is None else self.noise_power

    @property
    def ref_gain(self) -> float:
        """Gain at 1 m; calibrated, unless given, so that the user abeam of the BS
        would see ``REFERENCE_SNR_DB`` of array-gain SNR ``M p beta / noise`` with
        the budget split over ``REFERENCE_USERS`` users."""
        if self.pathloss.ref_gain is not None:
            return self.pathloss.ref_gain
        p = self.total_power / REFERENCE_USERS
        target = 10.0 ** (REFERENCE_SNR_DB / 10.0)
        return target * self.noise * self.layout.bs_offset ** self.pathloss.exponent / (self.antennas * p)

    def positions(self):
        return place_freeway_vehicles(self.layout, self.placement, self.seed)

    def gains(self):
        return large_scale_gain(self.positions(), self.layout, PathLoss(self.pathloss.exponent, self.ref_gain))


@dataclass
class PowerAllocation:
    powers: np.ndarray
    total_power: float

    def __post_init__(self):
        self.powers = np.asarray(self.powers, dtype=float)
        if np.any(self.powers < 0):
            raise DomainError("powers must be non-negative")
        if self.powers.sum() > self.total_power * (1 + 1e-9):
            raise DomainError(f"allocation uses {self.powers.sum():g} W of a {self.total_power:g} W budget")


def large_scale_gain(position, layout: FreewayLayout, pathloss: PathLoss):
    """Log-distance gain ``beta0 * d**-alpha`` to a BS abeam of the road midpoint."""
    x = np.asarray(position, dtype=float)
    if np.any((x < 0) | (x > layout.road_length)):
        raise DomainError("positions must lie on the road segment")
    ref = 1.0 if pathloss.ref_gain is None else pathloss.ref_gain
    d2 = layout.bs_offset ** 2 + (x - layout.road_length / 2.0) ** 2
    out = ref * d2 ** (-pathloss.exponent / 2.0)
    return float(out) if out.ndim == 0 else out


def hardened_sinr(precoder: str, powers, gains, antennas: int, noise: float):
    """Deterministic-equivalent SINR per user under channel hardening.

    MF: ``M p_k b_k / (noise + b_k * sum_{j != k} p_j)``.
    ZF: ``(M - K) p_k b_k / noise``.
    """
    p = np.asarray(powers, dtype=float)
    b = np.asarray(gains, dtype=float)
    if p.shape != b.shape or p.ndim != 1:
        raise DomainError(f"powers {p.shape} and gains {b.shape} must be matching vectors")
    k = p.size
    if precoder == "MF":
        return antennas * p * b / (noise + b * (p.sum() - p))
    if precoder == "ZF":
        if antennas <= k:
            raise DomainError(f"ZF needs more antennas ({antennas}) than users ({k})")
        return (antennas - k) * p * b / noise
    raise DomainError(f"unknown precoder {precoder!r}")


def required_powers(precoder: str, sinr, gains, antennas: int, noise: float):
    """Powers that make :func:`hardened_sinr` hit ``sinr`` exactly.

    Returns ``None`` for MF targets that no finite powers reach. For MF the
    per-user equations ``p_k (M + g_k) b_k = g_k (noise + b_k S)`` with
    ``S = sum p`` are linear, so ``S`` has the closed form ``a / (1 - c)``
    with ``a = sum g_k noise / (b_k (M + g_k))`` and
    ``c = sum g_k / (M + g_k)``.
    """
    g = np.asarray(sinr, dtype=float)
    b = np.asarray(gains, dtype=float)
    if precoder == "ZF":
        if antennas <= g.size:
            raise DomainError(f"ZF needs more antennas ({antennas}) than users ({g.size})")
        return g * noise / ((antennas - g.size) * b)
    if precoder == "MF":
        frac = g / (antennas + g)
        c = frac.sum()
        if c >= 1.0:
            return None
        total = np.sum(frac * noise / b) / (1.0 - c)
        return frac * (noise + b * total) / b
    raise DomainError(f"unknown precoder {precoder!r}")


def _qos_arrays(qos, k):
    if isinstance(qos, UserQos):
        qos = [qos] * k
    if len(qos) != k:
        raise DomainError(f"need one QoS entry per user ({k}), got {len(qos)}")
    return np.array([q.rate for q in qos]), np.array([q.error_prob for q in qos])


def user_latencies(sinr, rates, errs, bandwidth, max_latency=1.0):
    out = np.empty(len(sinr))
    for i, (s, r, e) in enumerate(zip(sinr, rates, errs)):
        try:
            out[i] = fbl_min_latency(r, s, bandwidth, e, max_latency=max_latency)
        except InfeasibleError as exc:
            raise InfeasibleError(f"user {i}: {exc}", index=i) from exc
    return out


def epa_latencies(scenario: FreewayScenario, qos, precoder: str, max_latency: float = 1.0):
    """Per-user minimum latency when every user gets ``total_power / K``."""
    gains = scenario.gains()
    k = gains.size
    rates, errs = _qos_arrays(qos, k)
    powers = np.full(k, scenario.total_power / k)
    sinr = hardened_sinr(precoder, powers, gains, scenario.antennas, scenario.noise)
    return user_latencies(sinr, rates, errs, scenario.bandwidth, max_latency)


def minmax_latency_allocation(scenario: FreewayScenario, qos, precoder: str, tol: float = 1e-9,
                              max_latency: float = 1.0):
    """Power split minimising the largest per-user transmission latency.

    Bisects on a common latency ``L``: each user needs the SINR at which its
    rate target is met within ``L``; the powers delivering those SINRs are
    inverted from the precoder formula and ``L`` is feasible iff they fit
    the budget. Returns the allocation at the smallest feasible ``L`` (to
    ``tol`` seconds) together with that latency.
    """
    gains = scenario.gains()
    k = gains.size
    rates, errs = _qos_arrays(qos, k)
    floor = 1.0 / scenario.bandwidth

    def powers_at(lat):
        sinr = fbl_required_snr(rates, lat, scenario.bandwidth, errs)
        return required_powers(precoder, sinr, gains, scenario.antennas, scenario.noise)

    def feasible(lat):
        p = powers_at(lat)
        return p is not None and p.sum() <= scenario.total_power

    if not feasible(max_latency):
        p = powers_at(max_latency)
        deficit = math.inf if p is None else p.sum() - scenario.total_power
        raise InfeasibleError(
            f"no common latency up to {max_latency:g} s fits the {scenario.total_power:g} W budget "
            f"(short by {deficit:g} W)", deficit=deficit)
    if feasible(floor):
        lo = hi = floor
    else:
        lo, hi = floor, max_latency
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return PowerAllocation(powers_at(hi), scenario.total_power), hi
