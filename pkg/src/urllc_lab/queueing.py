"""Queueing-latency reliability and latency-to-rate transformations.

Latency reliability is the CDF of per-packet sojourn time; violation is its
complement. Rate provisioning turns a (latency bound, violation probability)
target into a constant service rate, either from the effective bandwidth of
a Poisson packet stream or statically as one packet per latency bound.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DomainError
from .numerics import bisect_increasing

MAX_EXPONENT = 700.0


@dataclass(frozen=True)
class ArrivalProcess:
    rate: float  # packets per second; 0 means no traffic
    packet_bits: int = 2048
    kind: str = "poisson"

    def __post_init__(self):
        if self.kind != "poisson":
            raise DomainError(f"unsupported arrival process {self.kind!r}")
        if self.rate < 0:
            raise DomainError("arrival rate must be non-negative")
        if self.packet_bits < 1:
            raise DomainError("packet size must be at least one bit")

    @property
    def mean_rate(self) -> float:
        return self.rate * self.packet_bits


@dataclass(frozen=True)
class QosRequirement:
    latency_bound: float = 0.1
    violation_prob: float = 0.05

    def __post_init__(self):
        if self.latency_bound <= 0:
            raise DomainError("latency bound must be positive")
        if not 0 < self.violation_prob < 1:
            raise DomainError("violation probability must lie in (0, 1)")


class LatencySampleSet:
    """Per-packet latencies in seconds with CDF accessors."""

    def __init__(self, samples):
        s = np.asarray(samples, dtype=float).ravel()
        if np.any(s < 0) or np.any(~np.isfinite(s)):
            raise DomainError("latency samples must be finite and non-negative")
        self.samples = s
        self._sorted = np.sort(s)

    def __len__(self):
        return self.samples.size

    @property
    def count(self):
        return self.samples.size

    def _check(self):
        if self.samples.size == 0:
            raise DomainError("no latency samples")

    def reliability(self, t):
        self._check()
        out = np.searchsorted(self._sorted, t, side="right") / self._sorted.size
        return float(out) if np.ndim(out) == 0 else out

    def violation(self, t):
        """Pr{L > t}, the complement of :meth:`reliability`."""
        return 1.0 - self.reliability(t)

    def histogram(self, bin_width=0.01, num_bins=None):
        """Probability mass per bin ``((i-1) w, i w]`` for ``i = 1..num_bins``.

        The last bin also absorbs everything beyond it.
        """
        self._check()
        if num_bins is None:
            num_bins = max(1, int(math.ceil(self._sorted[-1] / bin_width - 1e-9)))
        edges = np.arange(num_bins + 1) * bin_width
        idx = np.clip(np.ceil(self.samples / bin_width - 1e-9).astype(np.int64), 1, num_bins)
        probs = np.bincount(idx - 1, minlength=num_bins) / self.samples.size
        return edges, probs

    def mean(self):
        self._check()
        return float(self.samples.mean())


def latency_reliability(samples: LatencySampleSet, t):
    """Empirical Pr{L <= t}."""
    return samples.reliability(t)


def effective_bandwidth_poisson(theta, rate, packet_bits):
    """Effective bandwidth ``rate * (exp(theta * C) - 1) / theta`` of Poisson packets.

    ``theta`` is the QoS exponent in 1/bit. The theta -> 0 limit is the mean
    rate ``rate * C``.
    """
    if theta < 0:
        raise DomainError("theta must be positive")
    x = theta * packet_bits
    if x > MAX_EXPONENT:
        raise OverflowError(f"theta * packet_bits = {x:g} overflows the exponential")
    if theta == 0:
        return rate * packet_bits
    return rate * math.expm1(x) / theta


def min_rate_for_qos(arr: ArrivalProcess, qos: QosRequirement, include_service_time: bool = True) -> float:
    """Smallest constant rate meeting ``Pr{latency > L_th} <= eps`` under the
    exponential tail ``exp(-theta R t)`` with ``R`` the effective bandwidth.

    With ``include_service_time`` the tail is applied to the waiting-time
    budget ``L_th - C/R`` left after transmitting the packet itself, i.e.
    ``theta (R L_th - C) = ln(1/eps)``; otherwise the whole bound is treated
    as queueing delay, ``theta R L_th = ln(1/eps)``. The first form never
    provisions below the one-packet rate ``C / L_th``.
    """
    if arr.rate == 0:
        return arr.packet_bits / qos.latency_bound if include_service_time else 0.0
    c = arr.packet_bits
    lth = qos.latency_bound
    target = math.log(1.0 / qos.violation_prob)

    def lhs(theta):
        # theta * alpha(theta) * L_th [- theta * C]; strictly increasing past the
        # bracket start chosen below
        val = arr.rate * np.expm1(theta * c) * lth
        return val - theta * c if include_service_time else val

    lo = 0.0
    if include_service_time and arr.rate * lth < 1.0:
        # lhs dips below zero first; start from its minimum
        lo = math.log(1.0 / (arr.rate * lth)) / c
    hi = max(lo, 1.0 / c)
    while lhs(hi) < target:
        hi *= 2.0
        if hi * c > MAX_EXPONENT:
            raise OverflowError("QoS exponent search overflowed")
    theta = float(bisect_increasing(lhs, target, lo, hi, xtol=1e-15 / c))
    return effective_bandwidth_poisson(theta, arr.rate, c)


def static_min_rate(packet_bits, latency_bound):
    """Rate that sends one packet in exactly the latency bound."""
    if packet_bits <= 0 or latency_bound <= 0:
        raise DomainError("packet size and latency bound must be positive")
    return packet_bits / latency_bound


def simulate_fifo_queue(arr: ArrivalProcess, service_rate: float, packets: int, seed=None,
                        backend=None) -> LatencySampleSet:
    """Sojourn times of ``packets`` Poisson arrivals at a constant-rate FIFO server.

    Service time is ``C / R`` for every packet; waiting follows the Lindley
    recursion. A queue loaded at or beyond capacity still runs to the
    horizon but raises a RuntimeWarning.
    """
    if service_rate <= 0:
        raise DomainError("service rate must be positive")
    if packets < 1:
        raise DomainError("need at least one packet")
    if arr.mean_rate >= service_rate:
        warnings.warn(
            f"unstable queue: offered load {arr.mean_rate:g} b/s >= service rate {service_rate:g} b/s",
            RuntimeWarning, stacklevel=2)
    service = arr.packet_bits / service_rate
    if arr.rate == 0:
        return LatencySampleSet(np.full(packets, service))
    rng = np.random.default_rng(seed)
    gaps = rng.exponential(1.0 / arr.rate, size=packets)
    return LatencySampleSet(_kernels.lindley_sojourn(gaps, service, backend))
