"""Mixture-of-finite-mixtures partition prior.

The number of components has a zero-truncated Poisson(1) prior and the
mixture weights a symmetric Dirichlet(alpha) prior. Both are integrated out,
leaving the coefficients ``W[N, K]`` of the exchangeable partition pmf

    f(z) = W[N, K] * prod_g alpha^(n_g)

with ``alpha^(n)`` the rising factorial.
"""

from __future__ import annotations

import csv
import threading
from math import log

import numpy as np
from scipy.special import gammaln, logsumexp

from .partition import group_sizes, is_canonical

_LOG_ONE_MINUS_INV_E = log(1.0 - np.exp(-1.0))


def log_kbar_prior(k):
    """Zero-truncated Poisson(1) log pmf, ``k >= 1``."""
    k = np.asarray(k, dtype=float)
    return -1.0 - gammaln(k + 1.0) - _LOG_ONE_MINUS_INV_E


def _log_w_series(N, K, alpha, tol):
    n_terms = max(N + K, 32)
    while True:
        k = np.arange(K, K + n_terms, dtype=float)
        terms = (gammaln(k + 1.0) - gammaln(k - K + 1.0)
                 - (gammaln(k * alpha + N) - gammaln(k * alpha))
                 + log_kbar_prior(k))
        total = logsumexp(terms)
        tail_small = terms[-1] - total < log(tol)
        decreasing = terms[-1] < terms[-2]
        if tail_small and decreasing:
            return float(total)
        n_terms *= 2


class MfmWeightTable:
    """Lazily filled cache of ``log W[N, K]`` for one concentration ``alpha``.

    Entries are computed by direct summation of the defining series in log
    space, stopping once the last term falls below ``tol`` relative to the
    partial sum (and never before ``N + K`` terms).
    """

    def __init__(self, alpha, tol=1e-12):
        if not alpha > 0:
            raise ValueError("alpha must be > 0")
        self.alpha = float(alpha)
        self.tol = tol
        self._cache: dict[tuple[int, int], float] = {}
        self._lock = threading.Lock()
        self._arrays: dict[int, np.ndarray] = {}

    def log_w(self, N, K):
        N, K = int(N), int(K)
        if not 1 <= K <= N:
            raise ValueError(f"W[N, K] requires 1 <= K <= N, got N={N}, K={K}")
        key = (N, K)
        value = self._cache.get(key)
        if value is None:
            if N == 1:
                value = -log(self.alpha)
            else:
                value = _log_w_series(N, K, self.alpha, self.tol)
            with self._lock:
                self._cache.setdefault(key, value)
        return value

    def array(self, n_max):
        """Dense ``(n_max + 1, n_max + 2)`` array of ``log W``; invalid entries are ``-inf``."""
        arr = self._arrays.get(n_max)
        if arr is None:
            arr = np.full((n_max + 1, n_max + 2), -np.inf)
            for N in range(1, n_max + 1):
                for K in range(1, N + 1):
                    arr[N, K] = self.log_w(N, K)
            arr.setflags(write=False)
            self._arrays[n_max] = arr
        return arr

    def items(self):
        return sorted(self._cache.items())

    def dump(self, path):
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(f"# alpha={self.alpha!r}\n")
            fh.write("N,K,log_w\n")
            for (N, K), v in self.items():
                fh.write(f"{N},{K},{v:.17g}\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            first = fh.readline().strip()
            if not first.startswith("# alpha="):
                raise ValueError("missing alpha header in weight table file")
            table = cls(float(first.split("=", 1)[1]))
            for row in csv.DictReader(fh):
                table._cache[(int(row["N"]), int(row["K"]))] = float(row["log_w"])
        return table


_TABLES: dict[float, MfmWeightTable] = {}


def get_table(alpha) -> MfmWeightTable:
    """Shared per-process table for ``alpha``."""
    table = _TABLES.get(float(alpha))
    if table is None:
        table = _TABLES.setdefault(float(alpha), MfmWeightTable(alpha))
    return table


def log_mfm_weight(N, K, alpha, table=None):
    table = table if table is not None else get_table(alpha)
    return table.log_w(N, K)


def _log_rising(alpha, n):
    n = np.asarray(n, dtype=float)
    return gammaln(alpha + n) - gammaln(alpha)


def _check_canonical(z):
    if not is_canonical(z):
        raise ValueError("partition must be canonically labelled (first-use order, labels 1..K)")


def log_partition_pmf(z, alpha, table=None):
    """Log MFM probability of the canonical partition ``z``."""
    _check_canonical(z)
    sizes = group_sizes(z)
    return log_mfm_weight(len(z), len(sizes), alpha, table) + float(np.sum(_log_rising(alpha, sizes)))


def log_cohesion(counts, cohesion):
    """Dirichlet-multinomial cohesion of one group given its per-level counts."""
    counts = np.asarray(counts, dtype=float)
    w = np.asarray(cohesion, dtype=float)
    w0 = w.sum()
    return float(np.sum(gammaln(counts + w)) - gammaln(counts.sum() + w0)
                 + gammaln(w0) - np.sum(gammaln(w)))


def level_counts(z, c, C):
    """``K x C`` matrix of attribute-level counts per group (1-based inputs)."""
    zi = np.asarray(z, dtype=np.int64) - 1
    ci = np.asarray(c, dtype=np.int64) - 1
    out = np.zeros((int(zi.max()) + 1, C), dtype=np.int64)
    np.add.at(out, (zi, ci), 1)
    return out


def log_supervised_partition_pmf(z, c, alpha, cohesion, table=None):
    """Unnormalized log of the attribute-supervised partition prior."""
    _check_canonical(z)
    c = np.asarray(c)
    if len(c) != len(z):
        raise ValueError("attribute vector length does not match the partition")
    cohesion = np.asarray(cohesion, dtype=float)
    counts = level_counts(z, c, len(cohesion))
    return log_partition_pmf(z, alpha, table) + sum(log_cohesion(row, cohesion) for row in counts)


def log_urn_weights(z_minus, alpha, table=None, c_minus=None, c_i=None, cohesion=None):
    """Log allocation weights of one extra node given the partition of the others.

    Returns ``K + 1`` unnormalized log weights: the existing groups ``1..K``
    of ``z_minus`` followed by a new group. Passing ``c_minus``, ``c_i`` and
    ``cohesion`` gives the supervised scheme.
    """
    table = table if table is not None else get_table(alpha)
    sizes = group_sizes(z_minus)
    K = len(sizes)
    N_plus = len(z_minus) + 1
    out = np.empty(K + 1)
    out[:K] = np.log(sizes + alpha)
    out[K] = log(alpha) + table.log_w(N_plus, K + 1) - table.log_w(N_plus, K)
    if c_minus is not None:
        cohesion = np.asarray(cohesion, dtype=float)
        w0 = cohesion.sum()
        counts = level_counts(z_minus, c_minus, len(cohesion))
        ci = int(c_i) - 1
        out[:K] += np.log(counts[:, ci] + cohesion[ci]) - np.log(sizes + w0)
        out[K] += log(cohesion[ci]) - log(w0)
    return out


def urn_weights(z_minus, alpha, table=None, c_minus=None, c_i=None, cohesion=None):
    return np.exp(log_urn_weights(z_minus, alpha, table, c_minus, c_i, cohesion))


def log_partition_mass_by_k(N, alpha, table=None):
    """``log P(K = k)`` for ``k = 1..N`` under the MFM partition prior.

    Uses the recursion for the summed rising-factorial products over all
    partitions with ``k`` blocks.
    """
    table = table if table is not None else get_table(alpha)
    # s[k] = log sum over partitions of n nodes into k blocks of prod alpha^(n_g)
    s = np.full(N + 2, -np.inf)
    s[1] = log(alpha)
    for n in range(1, N):
        new = np.full(N + 2, -np.inf)
        for k in range(1, n + 2):
            a = s[k] + log(n + k * alpha) if k <= n else -np.inf
            b = s[k - 1] + log(alpha) if k >= 2 else -np.inf
            new[k] = np.logaddexp(a, b)
        s = new
    return np.array([table.log_w(N, k) + s[k] for k in range(1, N + 1)])
