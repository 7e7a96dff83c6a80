"""Hot numeric kernels.

Each kernel exists twice: a numba ``@njit`` loop and a vectorised numpy
version. The numba path is used when numba imports cleanly and the
environment variable ``URLLC_LAB_DISABLE_NUMBA`` is unset or ``0``.
Both paths take and return plain float64 arrays so callers never need
to know which one ran.
"""
import os

import numpy as np

_DISABLED = os.environ.get("URLLC_LAB_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError("numba disabled by URLLC_LAB_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


# ---------------------------------------------------------------- numpy path


def lindley_sojourn_numpy(interarrivals, service):
    """Sojourn times of a FIFO queue with constant service time.

    ``interarrivals[n]`` is the gap between packet ``n-1`` and packet ``n``
    (``interarrivals[0]`` is ignored: the first packet finds an empty queue).
    Uses the closed form of the Lindley recursion
    ``W_n = X_n - min_{k<=n} X_k`` with ``X`` the partial sums of
    ``service - interarrival``.
    """
    a = np.asarray(interarrivals, dtype=np.float64)
    if a.size == 0:
        return np.empty(0)
    steps = service - a
    steps[0] = 0.0
    walk = np.cumsum(steps)
    wait = walk - np.minimum(np.minimum.accumulate(walk), 0.0)
    return wait + service


def mrc_combined_gain_numpy(w_re, w_im, chol):
    """Squared norm of ``chol @ w`` per trial.

    ``w_re``/``w_im`` have shape (trials, branches) and hold i.i.d.
    CN(0, 1) draws split into real/imag parts; ``chol`` is the lower
    Cholesky factor of the branch correlation matrix.
    """
    h_re = w_re @ chol.T
    h_im = w_im @ chol.T
    return np.einsum("ij,ij->i", h_re, h_re) + np.einsum("ij,ij->i", h_im, h_im)


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @njit(cache=True)
    def lindley_sojourn_numba(interarrivals, service):
        n = interarrivals.shape[0]
        out = np.empty(n)
        wait = 0.0
        for i in range(n):
            if i > 0:
                wait = wait + service - interarrivals[i]
                if wait < 0.0:
                    wait = 0.0
            out[i] = wait + service
        return out

    @njit(cache=True)
    def mrc_combined_gain_numba(w_re, w_im, chol):
        trials, nb = w_re.shape
        out = np.empty(trials)
        for t in range(trials):
            acc = 0.0
            for i in range(nb):
                hr = 0.0
                hi = 0.0
                for j in range(i + 1):
                    hr += chol[i, j] * w_re[t, j]
                    hi += chol[i, j] * w_im[t, j]
                acc += hr * hr + hi * hi
            out[t] = acc
        return out


def lindley_sojourn(interarrivals, service, backend=None):
    a = np.ascontiguousarray(interarrivals, dtype=np.float64)
    if _use_numba(backend):
        return lindley_sojourn_numba(a, float(service))
    return lindley_sojourn_numpy(a, float(service))


def mrc_combined_gain(w_re, w_im, chol, backend=None):
    w_re = np.ascontiguousarray(w_re, dtype=np.float64)
    w_im = np.ascontiguousarray(w_im, dtype=np.float64)
    chol = np.ascontiguousarray(chol, dtype=np.float64)
    if _use_numba(backend):
        return mrc_combined_gain_numba(w_re, w_im, chol)
    return mrc_combined_gain_numpy(w_re, w_im, chol)


def _use_numba(backend):
    if backend is None:
        return HAVE_NUMBA
    if backend == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is unavailable or disabled")
        return True
    if backend == "numpy":
        return False
    raise ValueError(f"unknown backend {backend!r}")


def active_backend():
    return "numba" if HAVE_NUMBA else "numpy"
