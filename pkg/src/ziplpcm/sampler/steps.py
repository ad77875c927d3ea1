"""The seven conditional updates of one sweep.

Every step accepts an optional :class:`Sweep` token. When given, the token
checks that the steps of one iteration run in the required order
(``nu -> X -> beta -> U -> z -> tae -> P``) and raises
:class:`StepOrderError` otherwise; :func:`~ziplpcm.sampler.run_chain`
always threads one through.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..mfm import get_table
from ..model import Hyperparameters, LatentState, block_counts, distance_matrix, pair_mask
from . import _kernels as K
from .tae import tae_tables

PHASES = ("nu", "X", "beta", "U", "z", "tae", "P")
POIS_PHASES = ("beta", "U", "z", "tae")


class StepOrderError(RuntimeError):
    """A step was called out of sweep order."""


class Sweep:
    """Phase token for one pass through the steps.

    ``Sweep()`` covers the zero-inflated model; ``Sweep(zero_inflated=False)``
    the Poisson variant, which has no indicator, imputation or ``P`` steps.
    """

    def __init__(self, zero_inflated=True):
        self.phases = PHASES if zero_inflated else POIS_PHASES
        self._pos = 0

    @property
    def expected(self):
        return self.phases[self._pos] if self._pos < len(self.phases) else None

    @property
    def done(self):
        return self._pos == len(self.phases)

    def advance(self, name):
        if self.expected != name:
            raise StepOrderError(f"step {name!r} called but {self.expected!r} is due in this sweep")
        self._pos += 1


def _advance(sweep, name):
    if sweep is not None:
        sweep.advance(name)


@dataclass
class PartitionContext:
    """Arrays shared by the compiled partition updates."""

    log_w: np.ndarray
    a_table: np.ndarray
    p0_table: np.ndarray
    c: np.ndarray
    cohesion: np.ndarray
    supervised: bool
    block_tables: tuple = ()

    @classmethod
    def build(cls, n, hyper: Hyperparameters, attrs=None, supervised=None):
        supervised = attrs is not None if supervised is None else supervised
        if supervised and attrs is None:
            raise ValueError("supervised mode needs node attributes")
        log_w = np.ascontiguousarray(get_table(hyper.alpha).array(n))
        a_table, p0_table = tae_tables(n, hyper.p0)
        if supervised:
            c = np.asarray(attrs.c, dtype=np.int64) - 1
            cohesion = hyper.cohesion_vector(attrs.C)
        else:
            c = np.zeros(n, dtype=np.int64)
            cohesion = np.ones(1)
        tables = K.block_tables(n * n, float(hyper.beta1), float(hyper.beta2))
        return cls(log_w, a_table, p0_table, c, cohesion, bool(supervised), tables)


def unusual_zero_probs(state: LatentState, directed=True, D=None):
    """Matrix of ``P(nu_ij = 1 | y_ij = 0, rest)``."""
    D = distance_matrix(state.U) if D is None else D
    zi = state.z - 1
    p = state.P[zi[:, None], zi[None, :]]
    lam = np.exp(state.beta - D)
    with np.errstate(invalid="ignore", divide="ignore"):
        prob = p / (p + (1.0 - p) * np.exp(-lam))
    return np.where(p > 0, prob, 0.0)


def step_nu(state: LatentState, data, rng, sweep=None, D=None):
    """Redraw the unusual-zero indicators at the zero-weight pairs.

    ``D`` optionally supplies the current distance matrix (likewise below).
    """
    _advance(sweep, "nu")
    y = data.y
    n = y.shape[0]
    prob = unusual_zero_probs(state, data.directed, D)
    draw = rng.random((n, n)) < prob
    nu = draw & (y == 0) & pair_mask(n, data.directed)
    if not data.directed:
        nu = nu | nu.T
    state.nu = nu.astype(np.int8)
    return state.nu


def step_X(state: LatentState, data, rng, sweep=None, D=None):
    """Impute the weights hidden behind unusual zeros."""
    _advance(sweep, "X")
    n = data.n
    X = np.array(data.y, dtype=np.int64)
    mask = (state.nu == 1) & pair_mask(n, data.directed)
    rows, cols = np.nonzero(mask)
    if rows.size:
        D = distance_matrix(state.U) if D is None else D
        X[rows, cols] = rng.poisson(np.exp(state.beta - D[rows, cols]))
        if not data.directed:
            X[cols, rows] = X[rows, cols]
    state.X = X
    return X


def step_beta(state: LatentState, hyper: Hyperparameters, rng, directed=True, sweep=None,
              sigma2=None, X=None, D=None):
    """Random-walk Metropolis update of the intercept; returns the accept flag.

    ``X`` defaults to the imputed matrix of ``state`` (the Poisson variant
    passes the observed matrix).
    """
    _advance(sweep, "beta")
    sigma2 = hyper.sigma2_beta if sigma2 is None else sigma2
    X = state.X if X is None else X
    prop = state.beta + np.sqrt(sigma2) * rng.standard_normal()
    lo, hi = hyper.beta_interval
    if not lo < prop < hi:
        return False
    mask = pair_mask(X.shape[0], directed)
    w_tot = float(X[mask].sum())
    D = distance_matrix(state.U) if D is None else D
    e_tot = float(np.exp(-D[mask]).sum())
    log_ratio = (prop - state.beta) * w_tot - (np.exp(prop) - np.exp(state.beta)) * e_tot
    if np.log(rng.random()) < log_ratio:
        state.beta = float(prop)
        return True
    return False


def step_U(state: LatentState, hyper: Hyperparameters, rng, directed=True, sweep=None,
           sigma2=None, X=None):
    """Sequential random-walk updates of the latent positions; returns the accept count."""
    _advance(sweep, "U")
    sigma2 = hyper.sigma2_U if sigma2 is None else sigma2
    X = state.X if X is None else X
    U = np.ascontiguousarray(state.U, dtype=float)
    acc = K.u_sweep(U, np.ascontiguousarray(X, dtype=np.int64), state.z - 1, float(state.beta),
                    float(np.sqrt(sigma2)), float(hyper.alpha1), float(hyper.alpha2),
                    float(hyper.omega), bool(directed), rng)
    state.U = U
    return int(acc)


def _partition_args(state, hyper, ctx):
    return (np.ascontiguousarray(state.nu, dtype=np.int8), np.ascontiguousarray(state.U, dtype=float),
            ctx.c, ctx.cohesion, ctx.log_w, float(hyper.alpha), float(hyper.alpha1),
            float(hyper.alpha2), float(hyper.omega), float(hyper.beta1), float(hyper.beta2))


def step_z(state: LatentState, data, hyper: Hyperparameters, ctx: PartitionContext, rng,
           sweep=None, likelihood=True, zero_inflated=True):
    """One scan of single-node allocation updates; returns the new K.

    ``likelihood=False`` drops the indicator and position terms so the scan
    targets the partition prior alone.
    """
    _advance(sweep, "z")
    use_nu = likelihood and zero_inflated
    z0 = np.asarray(state.z, dtype=np.int64) - 1
    nu, U, c, coh, log_w, alpha, a1, a2, om, b1, b2 = _partition_args(state, hyper, ctx)
    g1, g2, g12 = ctx.block_tables
    k = K.z_sweep(z0, nu, U, c, coh, log_w, alpha, a1, a2, om, g1, g2, g12,
                  bool(data.directed), bool(use_nu), bool(likelihood), ctx.supervised, rng)
    state.z = z0 + 1
    return int(k)


def step_tae(state: LatentState, data, hyper: Hyperparameters, ctx: PartitionContext, rng,
             sweep=None, likelihood=True, zero_inflated=True, convention="reversible"):
    """One truncated absorb-eject proposal.

    Returns ``(K, outcome)`` with ``outcome`` one of ``"abandoned"``,
    ``"eject-accepted"``, ``"eject-rejected"``, ``"absorb-accepted"``,
    ``"absorb-rejected"``. ``convention="conditional"`` divides the ejection
    densities by ``1 - p0`` and uses a ``K'(K'+1)`` denominator for the
    reverse of an absorb. It is kept for comparison only: the move then fails
    detailed balance.
    """
    _advance(sweep, "tae")
    if convention not in ("reversible", "conditional"):
        raise ValueError(f"unknown TAE convention {convention!r}")
    use_nu = likelihood and zero_inflated
    z0 = np.asarray(state.z, dtype=np.int64) - 1
    nu, U, c, coh, log_w, alpha, a1, a2, om, b1, b2 = _partition_args(state, hyper, ctx)
    k, outcome = K.tae_move(z0, nu, U, c, coh, log_w, ctx.a_table, ctx.p0_table, alpha,
                            a1, a2, om, b1, b2, float(hyper.p_eject), bool(data.directed),
                            bool(use_nu), bool(likelihood), ctx.supervised,
                            convention == "conditional", rng)
    state.z = z0 + 1
    return int(k), TAE_OUTCOMES[outcome]


TAE_OUTCOMES = ("abandoned", "eject-accepted", "eject-rejected", "absorb-accepted", "absorb-rejected")


def step_P(state: LatentState, hyper: Hyperparameters, rng, directed=True, sweep=None):
    """Conjugate Beta draw of the block probabilities for the current partition."""
    _advance(sweep, "P")
    v, m = block_counts(state.nu, state.z, directed)
    P = rng.beta(v + hyper.beta1, m - v + hyper.beta2)
    if not directed:
        P = np.triu(P) + np.triu(P, 1).T
    state.P = P
    return P


__all__ = [
    "PHASES", "StepOrderError", "Sweep", "PartitionContext", "step_nu", "step_X", "step_beta",
    "step_U", "step_z", "step_tae", "step_P", "unusual_zero_probs", "TAE_OUTCOMES",
]
