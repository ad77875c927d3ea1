"""Synthetic networks with known ground truth.

Three generators share one code path and one random stream layout, so a
zero-inflated draw with ``P = 0`` reproduces the Poisson draw exactly:

* latent positions ``u_i ~ N(mu_{z_i}, tau_{z_i}^{-1} I)`` (skipped for the
  block model),
* indicators ``nu_ij ~ Bernoulli(P[z_i, z_j])``,
* weights ``y_ij = 0`` if ``nu_ij = 1`` else ``Poisson(rate_ij)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import distance_matrix, pair_mask
from .netdata import NodeAttributes, WeightedNetwork


@dataclass
class GroundTruth:
    """Parameters and latent variables that generated a network.

    ``lambda_star`` is only set for block-model networks; ``U_star``,
    ``mu_star`` and ``tau_star`` only for latent-position networks.
    """

    z_star: np.ndarray
    nu_star: np.ndarray
    P_star: np.ndarray
    beta_star: float | None = None
    U_star: np.ndarray | None = None
    mu_star: np.ndarray | None = None
    tau_star: np.ndarray | None = None
    lambda_star: np.ndarray | None = None
    kind: str = "zip-lpcm"
    directed: bool = True
    extra: dict = field(default_factory=dict)

    @property
    def K(self):
        return int(np.max(self.z_star))

    def d_star(self):
        return None if self.U_star is None else distance_matrix(self.U_star)

    def pair_rates(self):
        """``N x N`` Poisson rates that generated the weights."""
        if self.lambda_star is not None:
            zi = self.z_star - 1
            return self.lambda_star[zi[:, None], zi[None, :]]
        return np.exp(self.beta_star - distance_matrix(self.U_star))

    def pair_p(self):
        zi = self.z_star - 1
        return self.P_star[zi[:, None], zi[None, :]]

    def to_dict(self):
        def arr(a):
            return None if a is None else np.asarray(a).tolist()

        return {
            "kind": self.kind, "directed": self.directed,
            "z_star": arr(self.z_star), "nu_star": arr(self.nu_star), "P_star": arr(self.P_star),
            "beta_star": self.beta_star, "U_star": arr(self.U_star), "mu_star": arr(self.mu_star),
            "tau_star": arr(self.tau_star), "lambda_star": arr(self.lambda_star), "extra": self.extra,
        }

    @classmethod
    def from_dict(cls, d):
        def arr(key, dtype=float):
            v = d.get(key)
            return None if v is None else np.asarray(v, dtype=dtype)

        return cls(z_star=arr("z_star", np.int64), nu_star=arr("nu_star", np.int8),
                   P_star=arr("P_star"), beta_star=d.get("beta_star"), U_star=arr("U_star"),
                   mu_star=arr("mu_star"), tau_star=arr("tau_star"), lambda_star=arr("lambda_star"),
                   kind=d.get("kind", "zip-lpcm"), directed=d.get("directed", True),
                   extra=d.get("extra", {}))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _labels(sizes):
    sizes = np.asarray(sizes, dtype=np.int64)
    if sizes.ndim != 1 or sizes.size == 0 or np.any(sizes < 1):
        raise ValueError("group sizes must be a non-empty list of positive counts")
    return np.repeat(np.arange(1, sizes.size + 1), sizes)


def _draw_weights(rates, P_pairs, directed, rng):
    n = rates.shape[0]
    mask = pair_mask(n, directed)
    nu = (rng.random((n, n)) < P_pairs) & mask
    x = rng.poisson(np.where(mask, rates, 0.0))
    y = np.where(nu, 0, x) * mask
    if not directed:
        nu = nu | nu.T
        y = np.triu(y, 1) + np.triu(y, 1).T
    return y.astype(np.int64), nu.astype(np.int8)


def _check_square(M, K, name):
    M = np.asarray(M, dtype=float)
    if M.shape != (K, K):
        raise ValueError(f"{name} must be {K} x {K}, got {M.shape}")
    return M


def simulate_zip_lpcm(sizes, mu, tau, beta, P, seed=None, directed=True):
    """Draw a network from the zero-inflated latent position cluster model.

    Parameters
    ----------
    sizes : sequence of int
        Group sizes; nodes are labelled group by group.
    mu : (K, d) array
        Component means.
    tau : (K,) array
        Component precisions.
    beta : float
    P : (K, K) array
        Unusual-zero probabilities.

    Returns
    -------
    (WeightedNetwork, GroundTruth)
    """
    rng = np.random.default_rng(seed)
    z = _labels(sizes)
    K = int(z.max())
    mu = np.atleast_2d(np.asarray(mu, dtype=float))
    tau = np.asarray(tau, dtype=float)
    if mu.shape[0] != K or tau.shape != (K,):
        raise ValueError("mu and tau must have one entry per group")
    if np.any(tau <= 0):
        raise ValueError("precisions must be > 0")
    P = _check_square(P, K, "P")
    if np.any((P < 0) | (P > 1)):
        raise ValueError("P entries must lie in [0, 1]")
    zi = z - 1
    U = mu[zi] + rng.standard_normal((z.size, mu.shape[1])) / np.sqrt(tau[zi])[:, None]
    rates = np.exp(beta - distance_matrix(U))
    y, nu = _draw_weights(rates, P[zi[:, None], zi[None, :]], directed, rng)
    truth = GroundTruth(z_star=z, nu_star=nu, P_star=P, beta_star=float(beta), U_star=U, mu_star=mu,
                        tau_star=tau, kind="zip-lpcm", directed=directed)
    return WeightedNetwork(y, directed=directed), truth


def simulate_pois_lpcm(sizes, mu, tau, beta, seed=None, directed=True):
    """Poisson latent position cluster model; the zero-inflated draw with ``P = 0``."""
    K = len(sizes)
    net, truth = simulate_zip_lpcm(sizes, mu, tau, beta, np.zeros((K, K)), seed, directed)
    truth.kind = "pois-lpcm"
    return net, truth


def simulate_zip_sbm(sizes, lam, P, seed=None, directed=True):
    """Zero-inflated Poisson stochastic block model with block rates ``lam``."""
    rng = np.random.default_rng(seed)
    z = _labels(sizes)
    K = int(z.max())
    lam = _check_square(lam, K, "lambda")
    if np.any(lam <= 0):
        raise ValueError("block rates must be > 0")
    P = _check_square(P, K, "P")
    zi = z - 1
    y, nu = _draw_weights(lam[zi[:, None], zi[None, :]], P[zi[:, None], zi[None, :]], directed, rng)
    truth = GroundTruth(z_star=z, nu_star=nu, P_star=P, lambda_star=lam, kind="zip-sbm", directed=directed)
    return WeightedNetwork(y, directed=directed), truth


def contaminate(z_star, m, seed=None, C=None) -> NodeAttributes:
    """Attributes equal to ``z_star`` except at ``m`` randomly chosen nodes.

    Each chosen node gets a uniformly drawn level different from its own,
    among ``1..C`` (``C`` defaults to the number of groups).
    """
    z_star = np.asarray(z_star, dtype=np.int64)
    n = z_star.size
    C = int(z_star.max()) if C is None else int(C)
    if not 0 <= m <= n:
        raise ValueError(f"cannot contaminate {m} of {n} nodes")
    if m and C < 2:
        raise ValueError("contamination needs at least two levels")
    rng = np.random.default_rng(seed)
    c = z_star.copy()
    for i in rng.choice(n, size=m, replace=False):
        shift = rng.integers(1, C)
        c[i] = (z_star[i] - 1 + shift) % C + 1
    return NodeAttributes(c, levels=[str(k) for k in range(1, C + 1)])


SS1_SIZES = (5, 10, 15, 20, 25)
SS1_MU = np.array([[-1.5, -1.5, -1.5], [-2.0, 2.0, 0.0], [2.0, -2.0, 0.0], [2.0, 2.0, -2.0], [-2.0, -2.0, 2.0]])
SS1_TAU = np.array([1 / 0.25, 1 / 0.5, 1 / 0.75, 1.0, 1 / 1.25])
SS1_P = np.array([
    [0.40, 0.05, 0.10, 0.05, 0.10],
    [0.10, 0.40, 0.05, 0.10, 0.05],
    [0.05, 0.10, 0.40, 0.05, 0.10],
    [0.10, 0.05, 0.10, 0.40, 0.05],
    [0.05, 0.10, 0.05, 0.10, 0.40],
])
SS2_LAMBDA1 = np.full((5, 5), 0.5)
np.fill_diagonal(SS2_LAMBDA1, [7.0, 4.5, 3.5, 2.0, 2.5])
SS2_LAMBDA2 = SS2_LAMBDA1.copy()
SS2_LAMBDA2[0, 1:] = 2.0
SS2_LAMBDA2[1:, 0] = 2.0
SS2_P2 = np.array([
    [0.40, 0.60, 0.20, 0.60, 0.20],
    [0.20, 0.40, 0.05, 0.10, 0.05],
    [0.60, 0.10, 0.40, 0.05, 0.10],
    [0.20, 0.05, 0.10, 0.40, 0.05],
    [0.60, 0.10, 0.05, 0.10, 0.40],
])
K2_P = np.array([[0.6, 0.4], [0.4, 0.6]])


@dataclass(frozen=True)
class Preset:
    """A named simulation setting plus the fitting settings that go with it."""

    name: str
    kind: str
    params: dict
    contaminate: int
    fit: dict
    description: str = ""


def _lpcm(name, scale, mult, m, fit, kind="zip-lpcm", description=""):
    params = {"sizes": tuple(s * mult for s in SS1_SIZES), "mu": (SS1_MU * scale).tolist(),
              "tau": SS1_TAU.tolist(), "beta": 3.0}
    if kind == "zip-lpcm":
        params["P"] = SS1_P.tolist()
    return Preset(name, kind, params, m, fit, description)


_SS_FIT = {"iterations": 12000, "burn_in": 2000, "beta_prior": (1.0, 9.0)}

PRESETS = {
    p.name: p for p in [
        _lpcm("ss1-scenario1", 1.0, 1, 20, _SS_FIT, description="75 nodes, 5 groups, zero-inflated"),
        _lpcm("ss1-scenario2", 1.0, 1, 20, _SS_FIT, kind="pois-lpcm",
              description="75 nodes, 5 groups, no unusual zeros"),
        Preset("ss2-scenario1", "zip-sbm", {"sizes": SS1_SIZES, "lam": SS2_LAMBDA1.tolist(),
                                            "P": SS1_P.tolist()}, 20,
               {**_SS_FIT, "beta_prior": (1.0, 19.0)}, "block model without hubs"),
        Preset("ss2-scenario2", "zip-sbm", {"sizes": SS1_SIZES, "lam": SS2_LAMBDA2.tolist(),
                                            "P": SS2_P2.tolist()}, 20,
               {**_SS_FIT, "beta_prior": (1.0, 19.0)}, "block model with a hub group"),
        _lpcm("ss3-n150", 1.25, 2, 40, _SS_FIT, description="150 nodes, group sizes doubled"),
        _lpcm("ss3-n225", 1.375, 3, 60, {**_SS_FIT, "burn_in": 4000, "init_partition": "kmeans",
                                          "init_k": 25}, description="225 nodes, group sizes tripled"),
        Preset("ss3-k2", "zip-lpcm", {"sizes": (25, 25), "mu": [[2.0, 0.0, 0.0], [-2.0, 0.0, 0.0]],
                                      "tau": [0.75, 0.75], "beta": 3.0, "P": K2_P.tolist()}, 15,
               _SS_FIT, "50 nodes, 2 overlapping groups"),
    ]
}


def get_preset(name) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; valid presets: {', '.join(PRESETS)}") from None


def simulate(kind, params, seed=None, directed=True):
    """Dispatch to the generator named by ``kind``."""
    params = dict(params)
    if kind == "zip-lpcm":
        return simulate_zip_lpcm(params["sizes"], params["mu"], params["tau"], params["beta"],
                                 params["P"], seed, directed)
    if kind == "pois-lpcm":
        return simulate_pois_lpcm(params["sizes"], params["mu"], params["tau"], params["beta"], seed, directed)
    if kind == "zip-sbm":
        return simulate_zip_sbm(params["sizes"], params["lam"], params["P"], seed, directed)
    raise ValueError(f"unknown generator {kind!r}")


def simulate_preset(name, seed=None):
    """Network, ground truth and contaminated attributes for a named preset.

    The attribute draw uses a stream derived from the same seed.
    """
    preset = get_preset(name)
    ss = np.random.SeedSequence(seed)
    net_seed, attr_seed = ss.spawn(2)
    net, truth = simulate(preset.kind, preset.params, np.random.default_rng(net_seed))
    attrs = contaminate(truth.z_star, preset.contaminate, np.random.default_rng(attr_seed))
    truth.extra = {"preset": name, "seed": seed, "contaminated": preset.contaminate}
    return net, truth, attrs
