"""Posterior point estimates and evaluation metrics.

Partitions are compared with the variation of information (VI, natural
logarithms). The clustering point estimate minimizes the posterior expected
VI over a candidate set made of the sampled partitions plus one greedy
single-node refinement pass. Pairwise statistics are averaged over the
pairs ``i > j`` with population standard deviations, and replicate
summaries use linearly interpolated (type 7) quantiles.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .netdata import write_matrix
from .partition import canonical

MAX_CANDIDATES = 500


@njit(cache=True)
def _vi0(a, b, ka, kb):
    n = a.shape[0]
    joint = np.zeros((ka, kb))
    na = np.zeros(ka)
    nb = np.zeros(kb)
    for i in range(n):
        joint[a[i], b[i]] += 1.0
        na[a[i]] += 1.0
        nb[b[i]] += 1.0
    h = 0.0
    for g in range(ka):
        for k in range(kb):
            if joint[g, k] > 0:
                h -= 2.0 * joint[g, k] * np.log(joint[g, k] / n)
    for g in range(ka):
        if na[g] > 0:
            h += na[g] * np.log(na[g] / n)
    for k in range(kb):
        if nb[k] > 0:
            h += nb[k] * np.log(nb[k] / n)
    v = h / n
    # identical partitions cancel exactly in exact arithmetic
    return v if v > 1e-12 else 0.0


@njit(cache=True)
def _mean_vi(cands, kc, samples, ks, weights):
    out = np.zeros(cands.shape[0])
    total = weights.sum()
    for c in range(cands.shape[0]):
        s = 0.0
        for u in range(samples.shape[0]):
            s += weights[u] * _vi0(cands[c], samples[u], kc[c], ks[u])
        out[c] = s / total
    return out


def _zero_based(z):
    z = np.ascontiguousarray(z, dtype=np.int64)
    return z - z.min() if z.size else z


def vi_distance(z1, z2):
    """Variation of information between two label vectors, in nats."""
    a = np.asarray(z1)
    b = np.asarray(z2)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("partitions must be 1-d and of equal length")
    _, a0 = np.unique(a, return_inverse=True)
    _, b0 = np.unique(b, return_inverse=True)
    return float(_vi0(a0.astype(np.int64), b0.astype(np.int64), int(a0.max()) + 1, int(b0.max()) + 1))


def expected_vi(z, samples, weights=None):
    """Weighted mean VI from ``z`` to each row of ``samples``."""
    samples = np.atleast_2d(np.asarray(samples, dtype=np.int64))
    w = np.ones(samples.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    s0 = samples - 1 if samples.min() >= 1 else samples
    z0 = _zero_based(canonical(z))
    return float(_mean_vi(z0[None, :], np.array([z0.max() + 1]), s0, s0.max(axis=1) + 1, w)[0])


def _all_canonical(S):
    # canonical rows start at 1 and never jump more than one above the running max
    cm = np.maximum.accumulate(S, axis=1)
    return bool(np.all(S[:, 0] == 1) and np.all(S[:, 1:] <= cm[:, :-1] + 1))


def _order_key(z, value):
    return (round(value, 12), int(z.max()), tuple(z.tolist()))


def point_estimate_z(samples, max_candidates=MAX_CANDIDATES, refine=True):
    """Partition minimizing the posterior expected VI loss.

    Parameters
    ----------
    samples : (M, N) array or ChainTrace
        Canonical post-burn-in partitions (a trace contributes its
        post-burn-in rows).
    max_candidates : int
        The most frequent distinct sampled partitions considered as
        candidates; the loss itself is averaged over all samples.
    refine : bool
        Run one greedy pass of single-node moves from the best candidate.

    Returns
    -------
    z_hat : ndarray
        1-based canonical partition.
    evi : float
        Its posterior expected VI.
    """
    if hasattr(samples, "post_z"):
        samples = samples.post_z()
    samples = np.asarray(samples, dtype=np.int64)
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise ValueError("need at least one sampled partition")
    if not _all_canonical(samples):
        samples = np.array([canonical(row) for row in samples])
    uniq, counts = np.unique(samples, axis=0, return_counts=True)
    u0 = np.ascontiguousarray(uniq - 1)
    ku = u0.max(axis=1) + 1
    weights = counts.astype(float)
    order = np.argsort(-counts, kind="stable")[:max_candidates]
    cand = u0[order]
    losses = _mean_vi(cand, ku[order], u0, ku, weights)
    best = min(range(len(order)), key=lambda c: _order_key(cand[c] + 1, losses[c]))
    z_best = cand[best].copy()
    loss_best = float(losses[best])
    if refine:
        z_best, loss_best = _greedy_pass(z_best, loss_best, u0, ku, weights)
    return canonical(z_best + 1), loss_best


def _greedy_pass(z, loss, u0, ku, weights):
    n = z.shape[0]
    for i in range(n):
        K = int(z.max()) + 1
        options = []
        for k in range(K + 1):
            if k == z[i]:
                continue
            trial = z.copy()
            trial[i] = k
            trial = canonical(trial) - 1
            options.append(trial)
        if not options:
            continue
        opts = np.array(options)
        vals = _mean_vi(opts, opts.max(axis=1) + 1, u0, ku, weights)
        j = min(range(len(opts)), key=lambda c: _order_key(opts[c] + 1, vals[c]))
        if _order_key(opts[j] + 1, vals[j]) < _order_key(z + 1, loss):
            z, loss = opts[j], float(vals[j])
    return z, loss


def point_estimate_U(trace, z_hat):
    """Positions of the highest complete-likelihood post-burn-in state with partition ``z_hat``.

    Falls back to the best post-burn-in state overall when no stored state
    has that partition. Returns ``(U_hat, matched)``.
    """
    if not trace.best_states and trace.best_overall is None:
        raise ValueError("trace holds no post-burn-in states")
    key = np.asarray(z_hat, dtype=np.int16).tobytes()
    hit = trace.best_states.get(key)
    if hit is not None:
        return hit[2].copy(), True
    return trace.best_overall[3].copy(), False


def posterior_means(trace, data):
    """Posterior means ``(beta_hat, nu_hat, p_hat, lambda_hat, d_hat)`` over post-burn-in iterations."""
    m = trace.n_post
    if m == 0:
        raise ValueError("trace holds no post-burn-in iterations")
    y = np.asarray(data.y)
    beta_hat = float(np.mean(trace.post_beta()))
    nu_hat = np.where(y > 0, 0.0, trace.nu_sum / m)
    np.fill_diagonal(nu_hat, 0.0)
    return beta_hat, nu_hat, trace.p_sum / m, trace.lambda_sum / m, trace.d_sum / m


def prob_nonzero_given_zero(nu_hat, lambda_hat, y=None):
    """Posterior probability that an observed zero hides a positive weight.

    ``(1 - exp(-lambda_hat)) * nu_hat`` at the zero entries of ``y`` (all
    entries when ``y`` is omitted) and 0 elsewhere.
    """
    nu_hat = np.asarray(nu_hat, dtype=float)
    out = -np.expm1(-np.asarray(lambda_hat, dtype=float)) * nu_hat
    if y is not None:
        out = np.where(np.asarray(y) == 0, out, 0.0)
    return out


def _eval_mask(y, directed):
    n = y.shape[0]
    mask = ~np.eye(n, dtype=bool) if directed else np.triu(np.ones((n, n), dtype=bool), 1)
    return mask & (y == 0)


def roc_curve(nu_hat, nu_star, y, directed=True):
    """ROC curve of ``nu_hat`` as a score for the true indicators at zero entries.

    Returns
    -------
    points : (M, 2) array
        ``(fpr, tpr)`` pairs from ``(0, 0)`` to ``(1, 1)``, one per distinct
        score threshold.
    auc : float
        Trapezoidal area under the curve (``nan`` when one class is absent).
    """
    y = np.asarray(y)
    mask = _eval_mask(y, directed)
    if not mask.any():
        raise ValueError("no zero-weight entries to evaluate")
    score = np.asarray(nu_hat, dtype=float)[mask]
    label = np.asarray(nu_star)[mask] != 0
    pos, neg = int(label.sum()), int((~label).sum())
    order = np.argsort(-score, kind="stable")
    s, lab = score[order], label[order]
    cut = np.flatnonzero(np.diff(s) != 0)
    ends = np.r_[cut, s.size - 1]
    tp = np.cumsum(lab)[ends]
    fp = np.cumsum(~lab)[ends]
    tpr = np.r_[0.0, tp / pos] if pos else np.r_[0.0, np.zeros(ends.size)]
    fpr = np.r_[0.0, fp / neg] if neg else np.r_[0.0, np.zeros(ends.size)]
    points = np.column_stack([fpr, tpr])
    auc = float(np.trapezoid(tpr, fpr)) if pos and neg else float("nan")
    return points, auc


@dataclass
class PosteriorSummary:
    """Point estimates and posterior mean matrices of one chain."""

    z_hat: np.ndarray
    evi: float
    U_hat: np.ndarray
    U_matched: bool
    beta_hat: float
    nu_hat: np.ndarray
    p_hat: np.ndarray
    lambda_hat: np.ndarray
    d_hat: np.ndarray
    pnz_hat: np.ndarray
    directed: bool = True
    extra: dict = field(default_factory=dict)

    @property
    def K_hat(self):
        return int(self.z_hat.max())

    def to_dict(self):
        return {"K_hat": self.K_hat, "z_hat": self.z_hat.tolist(), "evi": self.evi,
                "beta_hat": self.beta_hat, "U_matched": self.U_matched, "directed": self.directed,
                "U_hat": self.U_hat.tolist(), **self.extra}

    def save(self, out_dir):
        """Write ``summary.json`` plus CSV sidecars for every matrix."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        d = self.to_dict()
        d["files"] = {name: f"{name}.csv" for name in ("nu_hat", "p_hat", "lambda_hat", "d_hat", "pnz_hat")}
        d["files"]["positions"] = "positions.csv"
        (out / "summary.json").write_text(json.dumps(d, indent=1) + "\n", encoding="utf-8")
        for name in ("nu_hat", "p_hat", "lambda_hat", "d_hat", "pnz_hat"):
            write_matrix(out / f"{name}.csv", getattr(self, name))
        write_matrix(out / "z_hat.csv", self.z_hat)
        with open(out / "positions.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["node", "cluster"] + [f"u{t + 1}" for t in range(self.U_hat.shape[1])])
            for i, (g, row) in enumerate(zip(self.z_hat.tolist(), self.U_hat.tolist()), start=1):
                w.writerow([i, g] + [f"{v:.17g}" for v in row])

    @classmethod
    def load(cls, out_dir):
        from .netdata import read_matrix

        out = Path(out_dir)
        d = json.loads((out / "summary.json").read_text(encoding="utf-8"))
        mats = {name: read_matrix(out / f"{name}.csv") for name in
                ("nu_hat", "p_hat", "lambda_hat", "d_hat", "pnz_hat")}
        extra = {k: v for k, v in d.items() if k not in (
            "K_hat", "z_hat", "evi", "beta_hat", "U_matched", "directed", "U_hat", "files")}
        return cls(z_hat=np.asarray(d["z_hat"], dtype=np.int64), evi=d["evi"],
                   U_hat=np.asarray(d["U_hat"], dtype=float), U_matched=d["U_matched"],
                   beta_hat=d["beta_hat"], directed=d["directed"], extra=extra, **mats)


def summarize(trace, data, max_candidates=MAX_CANDIDATES) -> PosteriorSummary:
    """All point estimates and posterior means of a finished chain."""
    z_hat, evi = point_estimate_z(trace, max_candidates)
    U_hat, matched = point_estimate_U(trace, z_hat)
    beta_hat, nu_hat, p_hat, lambda_hat, d_hat = posterior_means(trace, data)
    pnz = prob_nonzero_given_zero(nu_hat, lambda_hat, data.y)
    np.fill_diagonal(pnz, 0.0)
    return PosteriorSummary(z_hat, evi, U_hat, matched, beta_hat, nu_hat, p_hat, lambda_hat, d_hat, pnz,
                            directed=data.directed)


REPORT_COLUMNS = ("K_hat", "VI", "evi", "d_mean", "d_sd", "beta_hat", "p_mean", "p_sd",
                  "lambda_mean", "lambda_sd")


def _pair_stats(est, ref):
    n = est.shape[0]
    i, j = np.tril_indices(n, -1)
    err = np.abs(np.asarray(est)[i, j] - np.asarray(ref)[i, j])
    return float(err.mean()), float(err.std())


def study_report(summary: PosteriorSummary, truth) -> dict:
    """One row of evaluation metrics against a ground truth.

    Pairwise errors use the pairs ``i > j``. Columns that do not apply to
    the truth (distances for block-model truths, rates for latent-position
    truths) are ``nan``.
    """
    z_star = np.asarray(truth.z_star)
    if z_star.shape != summary.z_hat.shape:
        raise ValueError("summary and truth have different numbers of nodes")
    row = dict.fromkeys(REPORT_COLUMNS, float("nan"))
    row["K_hat"] = summary.K_hat
    row["VI"] = vi_distance(summary.z_hat, z_star)
    row["evi"] = summary.evi
    row["beta_hat"] = summary.beta_hat
    if truth.U_star is not None:
        row["d_mean"], row["d_sd"] = _pair_stats(summary.d_hat, truth.d_star())
    row["p_mean"], row["p_sd"] = _pair_stats(summary.p_hat, truth.pair_p())
    if truth.lambda_star is not None:
        row["lambda_mean"], row["lambda_sd"] = _pair_stats(summary.lambda_hat, truth.pair_rates())
    return row


def aggregate_replicates(rows, quantiles=(0.1, 0.5, 0.9)):
    """Per-column quantiles (linear interpolation) of replicate report rows."""
    out = {}
    for q in quantiles:
        out[q] = {}
        for col in REPORT_COLUMNS:
            vals = np.array([r[col] for r in rows], dtype=float)
            vals = vals[~np.isnan(vals)]
            out[q][col] = float(np.quantile(vals, q)) if vals.size else float("nan")
    return out


def write_report(path, rows, labels=None):
    """Write report rows as CSV in the standard column order."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", *REPORT_COLUMNS])
        for k, row in enumerate(rows):
            label = labels[k] if labels is not None else str(k + 1)
            w.writerow([label] + [f"{row[c]:.6g}" if isinstance(row[c], float) else row[c]
                                  for c in REPORT_COLUMNS])
