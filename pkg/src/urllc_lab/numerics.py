"""Special functions and finite-blocklength rate math.

Everything here is pure and accepts numpy arrays where that is cheap.
Rates are in bits/s, latencies in seconds, bandwidths in Hz and SNRs are
linear power ratios.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, InfeasibleError

LOG2E = math.log2(math.e)
LOG2E_SQ = LOG2E * LOG2E

XTOL = 1e-12
MAXITER = 200


@dataclass(frozen=True)
class FblQuery:
    snr: float
    latency: float
    bandwidth: float
    error_prob: float

    def __post_init__(self):
        if not 0.0 < self.error_prob < 1.0:
            raise DomainError(f"error_prob must lie in (0, 1), got {self.error_prob}")
        if not self.latency > 0.0:
            raise DomainError(f"latency must be positive, got {self.latency}")
        if not self.bandwidth > 0.0:
            raise DomainError(f"bandwidth must be positive, got {self.bandwidth}")
        if not self.snr >= 0.0:
            raise DomainError(f"snr must be non-negative, got {self.snr}")

    @property
    def blocklength(self) -> float:
        return self.latency * self.bandwidth


def q_function(x):
    """Gaussian tail probability Pr{N(0, 1) > x}."""
    out = 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def q_inverse(p):
    """Inverse of :func:`q_function` on (0, 1).

    Computed as ``-ndtri(p)`` which keeps full relative precision for tiny p.
    """
    arr = np.asarray(p, dtype=float)
    if np.any(~((arr > 0.0) & (arr < 1.0))):
        raise DomainError(f"q_inverse needs p in (0, 1), got {p}")
    out = -special.ndtri(arr)
    return float(out) if out.ndim == 0 else out


def gamma_lower_regularized(shape, x):
    """Regularized lower incomplete gamma function P(shape, x)."""
    a = np.asarray(shape, dtype=float)
    xx = np.asarray(x, dtype=float)
    if np.any(a <= 0.0):
        raise DomainError(f"shape must be positive, got {shape}")
    if np.any(xx < 0.0):
        raise DomainError(f"x must be non-negative, got {x}")
    out = special.gammainc(a, xx)
    return float(out) if np.ndim(out) == 0 else out


def channel_dispersion(snr):
    """Dispersion of the complex AWGN / quasi-static channel, in bits^2 per channel use."""
    s = np.asarray(snr, dtype=float)
    out = (1.0 - 1.0 / (1.0 + s) ** 2) * LOG2E_SQ
    return float(out) if out.ndim == 0 else out


def _rate(snr, latency, bandwidth, error_prob):
    qinv = -special.ndtri(error_prob)
    penalty = np.sqrt(channel_dispersion(snr) / (latency * bandwidth)) * qinv
    return bandwidth * (np.log2(1.0 + np.asarray(snr, dtype=float)) - penalty)


def fbl_rate(q: FblQuery) -> float:
    """Normal-approximation achievable rate at a deterministic SNR.

    Negative values are returned unchanged: they mark (latency, reliability)
    pairs no code can support at this SNR.
    """
    return float(_rate(q.snr, q.latency, q.bandwidth, q.error_prob))


def fbl_rate_expected(snr_samples, latency, bandwidth, error_prob):
    """Average of the normal-approximation rate over fading SNR samples."""
    FblQuery(0.0, latency, bandwidth, error_prob)
    s = np.asarray(snr_samples, dtype=float)
    if s.size == 0:
        raise DomainError("need at least one SNR sample")
    if np.any(s < 0):
        raise DomainError("SNR samples must be non-negative")
    return float(np.mean(_rate(s, latency, bandwidth, error_prob)))


def shannon_rate(snr, bandwidth):
    return bandwidth * np.log2(1.0 + np.asarray(snr, dtype=float))


def bisect_increasing(func, target, lo, hi, xtol=XTOL, maxiter=MAXITER):
    """Vectorised bisection for ``func(x) = target`` with func increasing.

    Requires ``func(lo) < target <= func(hi)`` elementwise. Returns the
    upper end of the final bracket, i.e. a point where ``func >= target``.
    """
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    target = np.asarray(target, dtype=float)
    lo, hi, target = np.broadcast_arrays(lo, hi, target)
    lo = lo.copy()
    hi = hi.copy()
    for _ in range(maxiter):
        if np.all(hi - lo <= xtol):
            break
        mid = 0.5 * (lo + hi)
        ok = func(mid) >= target
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
    return hi


def fbl_required_snr(rate, latency, bandwidth, error_prob, snr_cap=1e30):
    """Smallest SNR at which :func:`fbl_rate` reaches ``rate``.

    Works elementwise on arrays. The bracket starts at the Shannon inverse
    and doubles until the target is covered; ``snr_cap`` bounds the search.
    """
    rate = np.asarray(rate, dtype=float)
    latency = np.asarray(latency, dtype=float)
    error_prob = np.asarray(error_prob, dtype=float)
    if np.any(rate <= 0):
        raise DomainError("rate must be positive")
    if np.any(latency <= 0) or bandwidth <= 0:
        raise DomainError("latency and bandwidth must be positive")
    if np.any((error_prob <= 0) | (error_prob >= 1)):
        raise DomainError("error_prob must lie in (0, 1)")
    rate, latency, error_prob = np.broadcast_arrays(rate, latency, error_prob)

    def f(s):
        return _rate(s, latency, bandwidth, error_prob)

    hi = np.maximum(np.expm1(np.minimum(rate / bandwidth, 1000.0) * math.log(2.0)), 1e-3) * 2.0
    for _ in range(MAXITER):
        short = f(hi) < rate
        if not np.any(short):
            break
        if np.any(hi[short] > snr_cap):
            raise InfeasibleError(f"rate {rate} unattainable below SNR {snr_cap:g}")
        hi = np.where(short, hi * 2.0, hi)
    # fbl_rate dips below zero for small SNR before rising, so the only
    # crossing of a positive target lies on the increasing branch.
    lo = np.zeros_like(hi)
    out = bisect_increasing(f, rate, lo, hi)
    return float(out) if out.ndim == 0 else out


def fbl_min_latency(rate, snr, bandwidth, error_prob, min_latency=None, max_latency=10.0):
    """Smallest latency at which :func:`fbl_rate` reaches ``rate``.

    ``min_latency`` defaults to one channel use (1 / bandwidth). With
    ``error_prob >= 0.5`` the penalty term never hurts, so the floor is
    returned whenever the rate is supportable at all.
    """
    if min_latency is None:
        min_latency = 1.0 / bandwidth
    if rate <= 0 or bandwidth <= 0 or not 0 < error_prob < 1 or snr < 0:
        raise DomainError("invalid arguments to fbl_min_latency")
    if _rate(snr, min_latency, bandwidth, error_prob) >= rate:
        return float(min_latency)
    if error_prob >= 0.5 or rate >= shannon_rate(snr, bandwidth):
        raise InfeasibleError(
            f"rate {rate:g} b/s is not below the Shannon rate {float(shannon_rate(snr, bandwidth)):g} b/s"
        )
    if _rate(snr, max_latency, bandwidth, error_prob) < rate:
        raise InfeasibleError(f"rate {rate:g} b/s needs latency beyond the {max_latency:g} s cap")

    def f(lat):
        return _rate(snr, lat, bandwidth, error_prob)

    return float(bisect_increasing(f, rate, min_latency, max_latency))
