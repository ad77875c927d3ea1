"""Beta(a, a) parameter of the truncated absorb-eject move."""

from functools import lru_cache
from math import exp, log

import numpy as np

LOG_A_BOUNDS = (-20.0, 20.0)


def log_p0(a, n_g):
    """Log probability that an ejection from a group of ``n_g`` leaves one part empty.

    ``p0 = 2 Gamma(2a) Gamma(a + n_g) / (Gamma(a) Gamma(2a + n_g))``, evaluated
    as a product of ratios so that very large ``a`` stays accurate.
    """
    m = np.arange(int(n_g), dtype=float)
    return log(2.0) + float(np.sum(np.log(a + m) - np.log(2.0 * a + m)))


def p0_value(a, n_g):
    return exp(log_p0(a, n_g))


@lru_cache(maxsize=None)
def solve_tae_a(n_g, p0=0.02, tol=1e-10):
    """Solve ``p0(a, n_g) = p0`` for ``a`` by bisection on ``log a``.

    The function decreases from 1 towards ``2**(1 - n_g)`` as ``a`` grows, so
    small groups cannot reach small targets. In that case the upper clamp
    ``a = exp(20)`` is returned.

    Returns
    -------
    a : float
    degenerate : bool
        True when the target is unattainable and ``a`` is the clamp.
    """
    n_g = int(n_g)
    if n_g < 1:
        raise ValueError("group size must be >= 1")
    lo, hi = LOG_A_BOUNDS
    target = log(p0)
    if log_p0(exp(hi), n_g) >= target:
        return exp(hi), True
    if log_p0(exp(lo), n_g) <= target:
        return exp(lo), True
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if log_p0(exp(mid), n_g) > target:
            lo = mid
        else:
            hi = mid
    return exp(0.5 * (lo + hi)), False


def tae_tables(n_max, p0=0.02):
    """Per-size arrays of ``a`` and of the realized ``p0`` for sizes ``0..n_max``."""
    a = np.ones(n_max + 1)
    p = np.zeros(n_max + 1)
    for n in range(1, n_max + 1):
        a[n], _ = solve_tae_a(n, p0)
        p[n] = p0_value(a[n], n)
    return a, p

