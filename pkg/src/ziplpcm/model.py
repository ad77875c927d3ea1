"""Densities and collapsed likelihood terms of the ZIP latent position cluster model.

Everything is evaluated on the log scale. ``-inf`` (``LOG_ZERO``) marks
impossible events and propagates through sums. Cluster labels ``z`` are
1-based canonical vectors (see :mod:`ziplpcm.partition`).

Directed networks use the ordered pairs ``i != j``; undirected networks use
the unordered pairs ``i < j`` and pool the blocks ``(g, h)`` and ``(h, g)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import lgamma, log, pi

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import betaln, gammaln, xlog1py, xlogy

from .partition import group_sizes

LOG_ZERO = -np.inf


@dataclass(frozen=True)
class Hyperparameters:
    """Fixed prior and proposal constants.

    ``cohesion`` holds one Dirichlet-multinomial weight per attribute level;
    ``None`` means a weight of 1 for every level.
    """

    d: int = 3
    alpha: float = 3.0
    alpha1: float = 1.0
    alpha2: float = 0.103
    omega: float = 0.01
    beta1: float = 1.0
    beta2: float = 9.0
    cohesion: tuple | None = None
    sigma2_beta: float = 0.01
    sigma2_U: float = 0.06
    p_eject: float = 0.5
    p0: float = 0.02
    beta_interval: tuple = (-30.0, 30.0)
    kbar_prior: str = "zero-truncated-poisson-1"

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError("latent dimension d must be a positive integer")
        for name in ("alpha", "alpha1", "alpha2", "omega", "beta1", "beta2",
                     "sigma2_beta", "sigma2_U"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not 0 < self.p_eject < 1:
            raise ValueError("p_eject must lie in (0, 1)")
        if not 0 < self.p0 < 1:
            raise ValueError("p0 must lie in (0, 1)")
        lo, hi = self.beta_interval
        if not lo < hi:
            raise ValueError("beta_interval must satisfy lo < hi")
        object.__setattr__(self, "beta_interval", (float(lo), float(hi)))
        if self.cohesion is not None:
            coh = tuple(float(w) for w in self.cohesion)
            if not coh or min(coh) <= 0:
                raise ValueError("cohesion weights must be > 0")
            object.__setattr__(self, "cohesion", coh)
        if self.kbar_prior != "zero-truncated-poisson-1":
            raise ValueError("only the zero-truncated Poisson(1) prior on the number of components is supported")

    def cohesion_vector(self, C):
        if self.cohesion is None:
            return np.ones(C)
        if len(self.cohesion) != C:
            raise ValueError(f"cohesion has {len(self.cohesion)} weights but attributes have {C} levels")
        return np.asarray(self.cohesion, dtype=float)

    def with_(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return {
            "d": self.d, "alpha": self.alpha, "alpha1": self.alpha1, "alpha2": self.alpha2,
            "omega": self.omega, "beta1": self.beta1, "beta2": self.beta2,
            "cohesion": None if self.cohesion is None else list(self.cohesion),
            "sigma2_beta": self.sigma2_beta, "sigma2_U": self.sigma2_U,
            "p_eject": self.p_eject, "p0": self.p0,
            "beta_interval": list(self.beta_interval), "kbar_prior": self.kbar_prior,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if d.get("cohesion") is not None:
            d["cohesion"] = tuple(d["cohesion"])
        if "beta_interval" in d:
            d["beta_interval"] = tuple(d["beta_interval"])
        return cls(**d)


@dataclass
class LatentState:
    """One MCMC state. ``P`` is ``K x K`` and indexed by canonical labels."""

    beta: float
    U: np.ndarray
    z: np.ndarray
    nu: np.ndarray
    X: np.ndarray
    P: np.ndarray = field(default_factory=lambda: np.zeros((1, 1)))

    @property
    def K(self) -> int:
        return int(np.max(self.z))

    def copy(self):
        return LatentState(float(self.beta), self.U.copy(), self.z.copy(),
                           self.nu.copy(), self.X.copy(), self.P.copy())


def zip_log_pmf(y, lam, p):
    """Log probability of count ``y`` under a zero-inflated Poisson."""
    y = np.asarray(y)
    lam = np.asarray(lam, dtype=float)
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore"):
        zero = np.log(p + (1.0 - p) * np.exp(-lam))
        pos = xlog1py(1.0, -p) + y * np.log(lam) - lam - gammaln(y + 1.0)
    out = np.where(y == 0, zero, pos)
    return out[()] if out.ndim == 0 else out


def log_lambda(beta, u_i, u_j):
    return beta - float(np.linalg.norm(np.asarray(u_i, float) - np.asarray(u_j, float)))


def distance_matrix(U):
    U = np.asarray(U, dtype=float)
    return cdist(U, U)


def pair_mask(n, directed):
    if directed:
        return ~np.eye(n, dtype=bool)
    return np.triu(np.ones((n, n), dtype=bool), k=1)


def log_f_X_given_beta_U(X, beta, U, directed=True, D=None):
    """Poisson log-likelihood of the imputed matrix ``X``.

    ``D`` optionally supplies the precomputed distance matrix of ``U``.
    """
    X = np.asarray(X)
    mask = pair_mask(X.shape[0], directed)
    eta = beta - (distance_matrix(U) if D is None else D)
    x = X[mask].astype(float)
    e = eta[mask]
    return float(np.sum(x * e - np.exp(e) - gammaln(x + 1.0)))


def log_f_nu_given_P_z(nu, P, z, directed=True):
    """Bernoulli log-likelihood of the unusual-zero indicators given block probabilities."""
    nu = np.asarray(nu)
    zi = np.asarray(z, dtype=np.int64) - 1
    p = np.asarray(P, dtype=float)[zi[:, None], zi[None, :]]
    mask = pair_mask(nu.shape[0], directed)
    v = nu[mask].astype(float)
    q = p[mask]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = xlogy(v, q) + xlog1py(1.0 - v, -q)
    return float(np.sum(terms))


def block_counts(nu, z, directed=True):
    """Per-block unusual-zero sums and pair counts.

    Returns ``(v, m)`` as ``K x K`` arrays. For undirected networks only the
    upper triangle (``g <= h``) is populated with the pooled counts.
    """
    nu = np.asarray(nu, dtype=np.int64)
    zi = np.asarray(z, dtype=np.int64) - 1
    K = int(zi.max()) + 1
    n = np.bincount(zi, minlength=K)
    onehot = np.zeros((zi.shape[0], K), dtype=np.int64)
    onehot[np.arange(zi.shape[0]), zi] = 1
    full = onehot.T @ nu @ onehot
    if directed:
        m = np.outer(n, n) - np.diag(n)
        return full, m
    v = np.triu(full)
    v[np.diag_indices(K)] = np.diag(full) // 2
    m = np.triu(np.outer(n, n))
    m[np.diag_indices(K)] = n * (n - 1) // 2
    return v, m


def block_mask(K, directed):
    if directed:
        return np.ones((K, K), dtype=bool)
    return np.triu(np.ones((K, K), dtype=bool))


def log_f_nu_given_z(nu, z, hyper: Hyperparameters, directed=True):
    """Collapsed Beta-Bernoulli marginal of ``nu`` given the partition."""
    v, m = block_counts(nu, z, directed)
    mask = block_mask(v.shape[0], directed)
    b1, b2 = hyper.beta1, hyper.beta2
    terms = betaln(v + b1, m - v + b2) - betaln(b1, b2)
    return float(np.sum(terms[mask]))


def log_group_marginal(n, sum_sq, sq_sum, d, alpha1, alpha2, omega):
    """Log of one group's factor in the collapsed position marginal.

    ``sum_sq`` is the squared norm of the sum of positions and ``sq_sum`` the
    sum of squared norms. An empty group contributes 0.
    """
    if n == 0:
        return 0.0
    half = 0.5 * d * n
    bracket = alpha2 - sum_sq / (n + omega) + sq_sum
    return (alpha1 * log(alpha2) - lgamma(alpha1) + lgamma(alpha1 + half) - half * log(pi)
            + 0.5 * d * (log(omega) - log(omega + n)) - (half + alpha1) * log(bracket))


def log_f_U_given_z(U, z, hyper: Hyperparameters):
    """Normal-gamma collapsed marginal of the latent positions given the partition."""
    U = np.asarray(U, dtype=float)
    zi = np.asarray(z, dtype=np.int64) - 1
    d = U.shape[1]
    total = 0.0
    for k in range(int(zi.max()) + 1):
        members = U[zi == k]
        s = members.sum(axis=0)
        total += log_group_marginal(members.shape[0], float(s @ s), float(np.sum(members * members)),
                                    d, hyper.alpha1, hyper.alpha2, hyper.omega)
    return total


def conditional_prob_unusual_zero(p, beta, u_i, u_j):
    """Probability that an observed zero is an unusual zero."""
    lam = np.exp(log_lambda(beta, u_i, u_j))
    if p <= 0:
        return 0.0
    return float(p / (p + (1.0 - p) * np.exp(-lam)))


def complete_log_likelihood(state: LatentState, data, hyper: Hyperparameters, table, attrs=None,
                            zero_inflated=True, D=None):
    """Sum of the four complete-likelihood terms used for trace monitoring.

    The Poisson variant (``zero_inflated=False``) drops the indicator term and
    evaluates the Poisson term on the observed matrix.
    """
    from .mfm import log_partition_pmf, log_supervised_partition_pmf

    directed = data.directed
    if zero_inflated:
        total = log_f_X_given_beta_U(state.X, state.beta, state.U, directed, D)
        total += log_f_nu_given_P_z(state.nu, state.P, state.z, directed)
    else:
        total = log_f_X_given_beta_U(data.y, state.beta, state.U, directed, D)
    total += log_f_U_given_z(state.U, state.z, hyper)
    if attrs is None:
        total += log_partition_pmf(state.z, hyper.alpha, table)
    else:
        total += log_supervised_partition_pmf(state.z, attrs.c, hyper.alpha,
                                              hyper.cohesion_vector(attrs.C), table)
    return total


def n_pairs(n, directed):
    return n * (n - 1) if directed else n * (n - 1) // 2


__all__ = [
    "LOG_ZERO", "Hyperparameters", "LatentState", "zip_log_pmf", "log_lambda", "distance_matrix",
    "log_f_X_given_beta_U", "log_f_nu_given_P_z", "log_f_nu_given_z", "log_f_U_given_z",
    "log_group_marginal", "block_counts", "conditional_prob_unusual_zero",
    "complete_log_likelihood", "group_sizes",
]
