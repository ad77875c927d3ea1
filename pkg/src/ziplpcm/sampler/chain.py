"""Chain driver and in-memory trace."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..model import Hyperparameters, LatentState, distance_matrix
from . import _kernels
from .adapt import WINDOW, adapt_proposals
from .init import init_partition, init_positions
from .steps import (PartitionContext, Sweep, step_beta, step_nu, step_P, step_tae, step_U,
                    step_X, step_z)

STREAMS = ("init", "nu", "X", "beta", "U", "z", "tae", "P")


@dataclass(frozen=True)
class SamplerConfig:
    """Run-length, storage and initialisation settings of one chain.

    ``supervised=None`` means supervised exactly when attributes are given.
    ``adapt_until=None`` adapts the proposal variances during the whole
    burn-in. ``init_partition="auto"`` uses singletons below 200 nodes and
    k-means with ``init_k`` groups otherwise.
    """

    iterations: int = 12000
    burn_in: int = 2000
    seed: int = 0
    supervised: bool | None = None
    adapt_until: int | None = None
    thin: int = 10
    store_U: bool = False
    zero_inflated: bool = True
    tae_convention: str = "reversible"
    init_positions: str = "geodesic-mds"
    init_partition: str = "auto"
    init_k: int = 25
    adapt: bool = True

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.adapt_until is not None and not 0 <= self.adapt_until <= self.burn_in:
            raise ValueError("adapt_until must lie in [0, burn_in]")
        if self.tae_convention not in ("reversible", "conditional"):
            raise ValueError(f"unknown TAE convention {self.tae_convention!r}")
        if self.init_partition not in ("auto", "singletons", "kmeans"):
            raise ValueError(f"unknown partition initialisation {self.init_partition!r}")
        if self.init_positions not in ("geodesic-mds", "random"):
            raise ValueError(f"unknown position initialisation {self.init_positions!r}")

    @property
    def adapt_stop(self):
        if not self.adapt:
            return 0
        return self.burn_in if self.adapt_until is None else self.adapt_until

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def spawn_streams(seed):
    """One independent generator per step type, derived from ``seed``."""
    children = np.random.SeedSequence(int(seed)).spawn(len(STREAMS))
    return {name: np.random.Generator(np.random.PCG64(ss)) for name, ss in zip(STREAMS, children)}


@dataclass
class ChainTrace:
    """Everything recorded by :func:`run_chain`.

    ``z``, ``K``, ``beta``, ``loglik`` and ``P`` hold every iteration. The
    ``*_sum`` matrices accumulate over the ``n_post`` post-burn-in
    iterations. ``best_states`` maps each post-burn-in partition
    (``z.tobytes()`` of the int16 row) to ``(loglik, iteration, U)`` of its
    highest complete-likelihood visit. ``accept`` holds post-burn-in
    ``(accepted, proposed)`` counts for ``beta``, ``U`` (per node), ``eject``
    (abandoned ejections count as proposed) and ``absorb``.
    """

    n: int
    d: int
    directed: bool
    hyper: Hyperparameters
    config: SamplerConfig
    supervised: bool
    data_digest: str
    z: np.ndarray
    K: np.ndarray
    beta: np.ndarray
    loglik: np.ndarray
    P: list
    n_post: int = 0
    nu_sum: np.ndarray | None = None
    p_sum: np.ndarray | None = None
    lambda_sum: np.ndarray | None = None
    d_sum: np.ndarray | None = None
    best_states: dict = field(default_factory=dict)
    best_overall: tuple | None = None
    U_snapshots: list = field(default_factory=list)
    accept: dict = field(default_factory=dict)
    sigma2_beta: float = 0.0
    sigma2_U: float = 0.0

    @property
    def iterations(self):
        return self.config.iterations

    @property
    def burn_in(self):
        return self.config.burn_in

    def post_z(self):
        return self.z[self.burn_in:]

    def post_beta(self):
        return self.beta[self.burn_in:]

    def acceptance_rates(self):
        rates = {}
        for key, (acc, tried) in self.accept.items():
            rates[key] = acc / tried if tried else float("nan")
        return rates


def _record_best(trace, key, loglik, it, U):
    prev = trace.best_states.get(key)
    if prev is None or loglik > prev[0]:
        trace.best_states[key] = (loglik, it, U.copy())
    if trace.best_overall is None or loglik > trace.best_overall[0]:
        trace.best_overall = (loglik, it, np.frombuffer(key, dtype=np.int16).astype(np.int64), U.copy())


def initial_state(data, hyper: Hyperparameters, config: SamplerConfig, rng):
    y = data.y
    n = data.n
    U0 = init_positions(y, hyper.d, config.init_positions, rng)
    method = config.init_partition
    if method == "auto":
        method = "kmeans" if n >= 200 else "singletons"
    z0 = init_partition(U0, method, min(config.init_k, n), rng)
    pos = y[y > 0]
    beta0 = float(np.log(pos.mean())) if pos.size else 0.0
    lo, hi = hyper.beta_interval
    beta0 = float(np.clip(beta0, lo + 1e-9 * (hi - lo), hi - 1e-9 * (hi - lo)))
    K0 = int(z0.max())
    if config.zero_inflated:
        P0 = rng.beta(hyper.beta1, hyper.beta2, size=(K0, K0))
        if not data.directed:
            P0 = np.triu(P0) + np.triu(P0, 1).T
    else:
        P0 = np.zeros((K0, K0))
    return LatentState(beta0, U0, z0, np.zeros((n, n), dtype=np.int8), np.array(y, dtype=np.int64), P0)


def run_chain(data, attrs=None, hyper: Hyperparameters | None = None, config: SamplerConfig | None = None,
              state: LatentState | None = None, callback=None) -> ChainTrace:
    """Run the partially collapsed Metropolis-within-Gibbs sampler.

    Each iteration updates, in order, the unusual-zero indicators, the
    imputed weights, ``beta``, the positions, the partition (single-node
    scan then one absorb-eject move) and the block probabilities. The
    Poisson variant (``config.zero_inflated=False``) skips the indicator,
    imputation and block-probability updates.

    Parameters
    ----------
    data : WeightedNetwork
    attrs : NodeAttributes, optional
    hyper, config : optional
        Defaults of :class:`Hyperparameters` and :class:`SamplerConfig`.
    state : LatentState, optional
        Starting state; built from the data when omitted.
    callback : callable, optional
        Called as ``callback(iteration, state)`` after every iteration.

    Raises
    ------
    FloatingPointError
        If the state becomes non-finite.
    """
    hyper = Hyperparameters() if hyper is None else hyper
    config = SamplerConfig() if config is None else config
    supervised = attrs is not None if config.supervised is None else config.supervised
    if supervised and attrs is None:
        raise ValueError("supervised fitting needs node attributes")
    if attrs is not None and attrs.n != data.n:
        raise ValueError("attribute vector length does not match the network")
    n, T, burn = data.n, config.iterations, config.burn_in
    directed = data.directed
    zi_model = config.zero_inflated
    rngs = spawn_streams(config.seed)
    ctx = PartitionContext.build(n, hyper, attrs if supervised else None, supervised)
    state = initial_state(data, hyper, config, rngs["init"]) if state is None else state.copy()

    trace = ChainTrace(
        n=n, d=hyper.d, directed=directed, hyper=hyper, config=config, supervised=supervised,
        data_digest=data.digest(), z=np.zeros((T, n), dtype=np.int16), K=np.zeros(T, dtype=np.int32),
        beta=np.zeros(T), loglik=np.zeros(T), P=[],
        nu_sum=np.zeros((n, n)), p_sum=np.zeros((n, n)), lambda_sum=np.zeros((n, n)),
        d_sum=np.zeros((n, n)),
    )
    counts = {k: [0, 0] for k in ("beta", "U", "eject", "absorb")}
    window = {"beta": [0, 0], "U": [0, 0]}
    s2b, s2u = hyper.sigma2_beta, hyper.sigma2_U
    adapt_stop = config.adapt_stop
    offdiag = ~np.eye(n, dtype=bool)
    y = np.asarray(data.y, dtype=np.int64)

    D = distance_matrix(state.U)
    for it in range(T):
        sweep = Sweep(zi_model)
        if zi_model:
            step_nu(state, data, rngs["nu"], sweep, D)
            step_X(state, data, rngs["X"], sweep, D)
            X = state.X
        else:
            X = y
        post = it >= burn
        acc_b = int(step_beta(state, hyper, rngs["beta"], directed, sweep, sigma2=s2b, X=X, D=D))
        acc_u = step_U(state, hyper, rngs["U"], directed, sweep, sigma2=s2u, X=X)
        D = distance_matrix(state.U)
        for key, acc, tried in (("beta", acc_b, 1), ("U", acc_u, n)):
            window[key][0] += acc
            window[key][1] += tried
            if post:
                counts[key][0] += acc
                counts[key][1] += tried
        step_z(state, data, hyper, ctx, rngs["z"], sweep, zero_inflated=zi_model)
        _, outcome = step_tae(state, data, hyper, ctx, rngs["tae"], sweep, zero_inflated=zi_model,
                              convention=config.tae_convention)
        if post:
            kind = "eject" if outcome == "abandoned" else outcome.split("-")[0]
            counts[kind][0] += outcome.endswith("accepted")
            counts[kind][1] += 1
        if zi_model:
            step_P(state, hyper, rngs["P"], directed, sweep)
        else:
            state.P = np.zeros((state.K, state.K))
        if not (np.isfinite(state.beta) and np.all(np.isfinite(state.U))):
            raise FloatingPointError(f"non-finite state at iteration {it}")

        ll = _kernels.complete_loglik(
            state.X if zi_model else y, state.nu, state.P, state.z - 1, float(state.beta), D, state.U,
            ctx.c, ctx.cohesion, ctx.log_w, float(hyper.alpha), float(hyper.alpha1),
            float(hyper.alpha2), float(hyper.omega), directed, zi_model, ctx.supervised)
        zrow = state.z.astype(np.int16)
        trace.z[it] = zrow
        trace.K[it] = state.K
        trace.beta[it] = state.beta
        trace.loglik[it] = ll
        trace.P.append(state.P.copy())

        if post:
            zz = state.z - 1
            trace.n_post += 1
            if zi_model:
                trace.nu_sum += state.nu
                trace.p_sum += np.where(offdiag, state.P[zz[:, None], zz[None, :]], 0.0)
            trace.lambda_sum += np.where(offdiag, np.exp(state.beta - D), 0.0)
            trace.d_sum += D
            _record_best(trace, zrow.tobytes(), ll, it, state.U)
        if config.store_U and it % config.thin == 0:
            trace.U_snapshots.append((it, state.U.copy()))

        if (it + 1) % WINDOW == 0:
            if it + 1 <= adapt_stop:
                s2b, s2u = adapt_proposals({k: tuple(v) for k, v in window.items()}, s2b, s2u, it + 1)
            window = {"beta": [0, 0], "U": [0, 0]}
        if callback is not None:
            callback(it, state)

    trace.accept = {k: tuple(v) for k, v in counts.items()}
    trace.sigma2_beta, trace.sigma2_U = s2b, s2u
    return trace
