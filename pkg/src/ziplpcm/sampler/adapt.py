"""Acceptance-rate tuning of the random-walk proposal variances."""

from math import exp, log

TARGET_RATE = 0.23
WINDOW = 100


def adapt_proposals(counters, sigma2_beta, sigma2_U, iteration, window=WINDOW, target=TARGET_RATE):
    """Robbins-Monro update of both proposal variances after one window.

    Parameters
    ----------
    counters : dict
        ``{"beta": (accepted, proposed), "U": (accepted, proposed)}`` for the
        window that just finished.
    iteration : int
        Number of iterations completed so far; the step size is
        ``min(1, 10 / t)`` with ``t`` the 1-based window index.

    Returns
    -------
    (sigma2_beta, sigma2_U)
    """
    t = max(1, iteration // window)
    gamma = min(1.0, 10.0 / t)
    out = []
    for key, s2 in (("beta", sigma2_beta), ("U", sigma2_U)):
        acc, tried = counters.get(key, (0, 0))
        if tried > 0:
            s2 = exp(log(s2) + gamma * (acc / tried - target))
        out.append(s2)
    return tuple(out)
