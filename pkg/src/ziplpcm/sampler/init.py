"""Starting values for the chain."""

import numpy as np
from scipy.sparse.csgraph import shortest_path
from sklearn.cluster import KMeans

from ..partition import canonical


def geodesic_distances(y):
    """Hop distances of the binarized, symmetrized graph.

    Disconnected pairs get the largest finite distance plus one.
    """
    A = np.asarray(y) > 0
    A = A | A.T
    D = shortest_path(A.astype(float), method="D", directed=False, unweighted=True)
    finite = np.isfinite(D)
    top = D[finite].max() if finite.any() else 0.0
    D[~finite] = top + 1.0
    return D


def classical_mds(D, d):
    """Classical scaling of a distance matrix into ``d`` dimensions.

    Axes with non-positive eigenvalues, and axes beyond ``n - 1``, are zero.
    Each axis is signed so that its first nonzero loading is positive.
    """
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    J = np.eye(n) - 1.0 / n
    B = -0.5 * J @ (D * D) @ J
    vals, vecs = np.linalg.eigh(B)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    k = min(d, max(n - 1, 0))
    X = np.zeros((n, d))
    for t in range(k):
        if vals[t] <= 1e-12 * max(1.0, abs(vals[0])):
            break
        col = vecs[:, t] * np.sqrt(vals[t])
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0:
            col = -col
        X[:, t] = col
    return X


def init_positions(y, d, method="geodesic-mds", rng=None):
    """Initial ``N x d`` latent positions."""
    y = np.asarray(y)
    n = y.shape[0]
    if method == "geodesic-mds":
        if n == 1:
            return np.zeros((1, d))
        return classical_mds(geodesic_distances(y), d)
    if method == "random":
        rng = np.random.default_rng() if rng is None else rng
        return rng.standard_normal((n, d))
    raise ValueError(f"unknown position initialisation {method!r}")


def init_partition(U0, method="singletons", k0=None, rng=None):
    """Initial canonical partition from ``U0`` rows."""
    n = np.asarray(U0).shape[0]
    if method == "singletons":
        return np.arange(1, n + 1, dtype=np.int64)
    if method == "kmeans":
        if k0 is None or not 1 <= k0 <= n:
            raise ValueError("kmeans initialisation needs 1 <= k0 <= n")
        if k0 == 1:
            return np.ones(n, dtype=np.int64)
        rng = np.random.default_rng() if rng is None else rng
        seed = int(rng.integers(2**31 - 1))
        labels = KMeans(n_clusters=k0, n_init=10, random_state=seed).fit_predict(np.asarray(U0, float))
        return canonical(labels)
    raise ValueError(f"unknown partition initialisation {method!r}")
