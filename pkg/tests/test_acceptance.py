"""Acceptance criteria, one test per criterion.

Each test prints one ``PASS``/``FAIL`` line (also collected into the
terminal summary). The simulation-study criteria run full-length chains;
the whole module takes about 15 minutes on one core.
"""

import itertools
import json
import time

import numpy as np
import pytest

from oracles import (exact_partition_target, nu_quadrature, pair_list, run_partition_chain,
                     total_variation, u_quadrature)
from ziplpcm import Hyperparameters, LatentState, SamplerConfig, WeightedNetwork, run_chain
from ziplpcm.cli import main
from ziplpcm.mfm import (MfmWeightTable, log_partition_mass_by_k, log_partition_pmf,
                         log_supervised_partition_pmf, log_urn_weights)
from ziplpcm.model import distance_matrix, log_f_nu_given_z, log_f_U_given_z, pair_mask
from ziplpcm.netdata import NodeAttributes
from ziplpcm.partition import canonical, enumerate_partitions
from ziplpcm.sampler.steps import (PartitionContext, Sweep, step_beta, step_nu, step_P, step_tae,
                                   step_U, step_X, step_z)
from ziplpcm.simgen import simulate_preset
from ziplpcm.summary import (prob_nonzero_given_zero, roc_curve, study_report, summarize,
                             vi_distance)

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

_RUNS = {}


def _fit(preset, seed, beta_prior, supervised=True, pois=False):
    """Simulate, fit and evaluate one seed at full length; memoized across tests."""
    key = (preset, seed, beta_prior, supervised, pois)
    if key not in _RUNS:
        net, truth, attrs = simulate_preset(preset, seed)
        hyper = Hyperparameters(beta1=beta_prior[0], beta2=beta_prior[1])
        config = SamplerConfig(iterations=12000, burn_in=2000, seed=seed, zero_inflated=not pois)
        t0 = time.perf_counter()
        trace = run_chain(net, attrs if supervised else None, hyper, config)
        secs = time.perf_counter() - t0
        summary = summarize(trace, net)
        row = study_report(summary, truth)
        row["seconds"] = secs
        row["accept"] = trace.acceptance_rates()
        row["z_hat"] = summary.z_hat
        row["z_star"] = truth.z_star
        _RUNS[key] = row
    return _RUNS[key]


def _ss1_rows(seeds):
    return [_fit("ss1-scenario1", s, (1.0, 9.0)) for s in seeds]


def _fmt_rows(rows, cols):
    return "; ".join(",".join(f"{c}={r[c]:.3g}" for c in cols) for r in rows)


def test_criterion_01_ss1_scenario1(report):
    rows = _ss1_rows(range(1, 11))
    ok_seeds = [r for r in rows if r["K_hat"] == 5 and r["VI"] == 0]
    recovered = len(ok_seeds) >= 8
    beta_ok = all(2.85 <= r["beta_hat"] <= 3.15 for r in ok_seeds)
    p_ok = all(r["p_mean"] <= 0.07 for r in ok_seeds)
    d_ok = all(r["d_mean"] <= 0.40 for r in ok_seeds)
    evi_ok = all(r["evi"] <= 0.10 for r in ok_seeds)
    time_ok = max(r["seconds"] for r in rows) <= 600
    ok = recovered and beta_ok and p_ok and d_ok and evi_ok and time_ok
    detail = (f"{len(ok_seeds)}/10 seeds K=5,VI=0; beta_hat {[round(r['beta_hat'], 3) for r in ok_seeds]}; "
              f"max p_err {max((r['p_mean'] for r in ok_seeds), default=np.nan):.3f}; "
              f"max d_err {max((r['d_mean'] for r in ok_seeds), default=np.nan):.3f}; "
              f"max evi {max((r['evi'] for r in ok_seeds), default=np.nan):.3f}; "
              f"max chain time {max(r['seconds'] for r in rows):.1f}s")
    report("criterion 1 (SS1 scenario 1)", ok, detail)
    assert ok, detail


def test_ss1_adapted_acceptance_rates(report):
    rows = _ss1_rows(range(1, 11))
    rates = [(r["accept"]["beta"], r["accept"]["U"]) for r in rows]
    ok = all(0.15 <= b <= 0.35 and 0.15 <= u <= 0.35 for b, u in rates)
    detail = "post-burn-in (beta, U) rates " + ", ".join(f"({b:.2f},{u:.2f})" for b, u in rates)
    report("SS1 adapted acceptance rates", ok, detail)
    assert ok, detail


def test_criterion_02_ss1_scenario2(report):
    rows = [_fit("ss1-scenario2", s, (1.0, 9.0)) for s in range(1, 11)]
    ok_seeds = [r for r in rows if r["VI"] == 0]
    p_ok = all(r["p_mean"] <= 0.12 for r in ok_seeds)
    ok = len(ok_seeds) >= 8 and p_ok
    detail = (f"{len(ok_seeds)}/10 seeds VI=0; p_err {[round(r['p_mean'], 3) for r in rows]}")
    report("criterion 2 (SS1 scenario 2)", ok, detail)
    assert ok, detail


def _hub_isolated(z_hat, z_star):
    hub = set(np.flatnonzero(z_star == 1).tolist())
    groups = {}
    for i, g in enumerate(z_hat.tolist()):
        groups.setdefault(g, set()).add(i)
    return hub in groups.values()


def test_criterion_03_ss2_hubs(report):
    rows = [_fit("ss2-scenario2", s, (1.0, 19.0)) for s in range(1, 11)]
    ok_seeds = [r for r in rows if r["VI"] == 0]
    lam_ok = all(r["lambda_mean"] <= 0.35 for r in ok_seeds)
    ok = len(ok_seeds) >= 8 and lam_ok
    pois = [_fit("ss2-scenario2", s, (1.0, 19.0), supervised=False, pois=True) for s in range(1, 11)]
    missed = sum(not _hub_isolated(r["z_hat"], r["z_star"]) for r in pois)
    detail = (f"{len(ok_seeds)}/10 seeds VI=0; lambda_err {[round(r['lambda_mean'], 3) for r in rows]}; "
              f"contrast (reported only): Poisson variant unsupervised misses the hub group in {missed}/10 "
              f"seeds, K_hat {[r['K_hat'] for r in pois]}")
    report("criterion 3 (SS2 hub recovery)", ok, detail)
    assert ok, detail


def test_criterion_04_replication_band(report):
    rows = _ss1_rows(range(1, 51))
    vi = np.array([r["VI"] for r in rows])
    beta = np.array([r["beta_hat"] for r in rows])
    med_vi, q90_vi, med_beta = np.quantile(vi, 0.5), np.quantile(vi, 0.9), np.quantile(beta, 0.5)
    ok = med_vi == 0 and q90_vi <= 0.3 and 2.9 <= med_beta <= 3.05
    detail = (f"median VI {med_vi:.3g}, 90% VI {q90_vi:.3g}, median beta_hat {med_beta:.4f}, "
              f"{int(np.sum(vi == 0))}/50 seeds VI=0")
    report("criterion 4 (50-seed replication)", ok, detail)
    assert ok, detail


def test_criterion_05_prior_reproduction(report):
    n = 6
    hyper = Hyperparameters(d=2, alpha=3.0)
    attrs = NodeAttributes(np.array([1, 2, 1, 1, 2, 3]))
    t0 = time.perf_counter()
    _, target = exact_partition_target(n, hyper)
    freq = run_partition_chain(n, hyper, 200000, seed=1)
    tv = total_variation(freq, target)
    _, target_s = exact_partition_target(n, hyper, attrs=attrs)
    freq_s = run_partition_chain(n, hyper, 200000, seed=2, attrs=attrs)
    tv_s = total_variation(freq_s, target_s)
    secs = time.perf_counter() - t0
    ok = tv <= 0.02 and tv_s <= 0.02 and secs <= 240
    detail = f"TV unsupervised {tv:.4f}, supervised {tv_s:.4f}, {secs:.1f}s for both runs"
    report("criterion 5 (prior reproduction)", ok, detail)
    assert ok, detail


def test_criterion_06_conjugacy_oracles(report):
    from scipy import stats
    worst_nu = 0.0
    for directed in (True, False):
        pairs = pair_list(3, directed)
        for b1, b2 in ((1.0, 9.0), (2.5, 0.7)):
            hyper = Hyperparameters(beta1=b1, beta2=b2)
            for z in enumerate_partitions(3):
                for bits in itertools.product((0, 1), repeat=len(pairs)):
                    nu = np.zeros((3, 3), dtype=np.int8)
                    for (i, j), b in zip(pairs, bits):
                        nu[i, j] = b
                        if not directed:
                            nu[j, i] = b
                    got = log_f_nu_given_z(nu, z, hyper, directed)
                    worst_nu = max(worst_nu, abs(got - nu_quadrature(nu, z, b1, b2, directed)))
    worst_u = 0.0
    for u in ([0.3], [-1.2], [0.4, 1.1], [-0.5, 2.0]):
        for a1, a2, om in ((1.0, 0.103, 0.01), (2.0, 1.5, 0.5)):
            hyper = Hyperparameters(d=1, alpha1=a1, alpha2=a2, omega=om)
            got = log_f_U_given_z(np.array(u)[:, None], np.ones(len(u), dtype=np.int64), hyper)
            worst_u = max(worst_u, abs(np.expm1(got - u_quadrature(u, a1, a2, om))))
    z = np.array([1, 1, 2])
    nu = np.zeros((3, 3), dtype=np.int8)
    nu[0, 1] = 1
    state = LatentState(0.0, np.zeros((3, 2)), z, nu, np.zeros((3, 3), np.int64))
    rng = np.random.default_rng(3)
    hyper = Hyperparameters()
    draws = np.array([step_P(state, hyper, rng)[0, 0] for _ in range(100000)])
    pval = stats.kstest(draws, stats.beta(hyper.beta1 + 1, hyper.beta2 + 1).cdf).pvalue
    ok = worst_nu <= 1e-8 and worst_u <= 1e-5 and pval > 0.01
    detail = f"nu max abs log error {worst_nu:.2e}, U max rel error {worst_u:.2e}, step_P KS p={pval:.3f}"
    report("criterion 6 (conjugacy oracles)", ok, detail)
    assert ok, detail


def test_criterion_07_urn_pmf_consistency(report):
    alpha = 3.0
    coh = np.array([1.0, 0.5, 2.0])
    worst = {False: 0.0, True: 0.0}
    for n in range(2, 7):
        c = np.random.default_rng(n).integers(1, 4, size=n)
        for z in enumerate_partitions(n):
            for i in range(n):
                z_minus = canonical(np.delete(z, i))
                exts = [canonical(np.insert(z_minus, i, k)) for k in range(1, z_minus.max() + 2)]
                for sup in (False, True):
                    if sup:
                        lw = log_urn_weights(z_minus, alpha, c_minus=np.delete(c, i), c_i=c[i], cohesion=coh)
                        lp = [log_supervised_partition_pmf(e, c, alpha, coh) for e in exts]
                    else:
                        lw = log_urn_weights(z_minus, alpha)
                        lp = [log_partition_pmf(e, alpha) for e in exts]
                    r = lw - np.array(lp)
                    worst[sup] = max(worst[sup], float(np.max(np.abs(np.expm1(r - r[0])))))
    ok = max(worst.values()) <= 1e-10
    detail = f"max relative deviation unsupervised {worst[False]:.2e}, supervised {worst[True]:.2e}"
    report("criterion 7 (urn-pmf consistency)", ok, detail)
    assert ok, detail


def test_criterion_08_w_table(report):
    alpha = 3.0
    table = MfmWeightTable(alpha)
    arr = table.array(301)
    exact = table.log_w(1, 1) == -np.log(alpha)
    worst = 0.0
    for N in range(1, 300):
        for K in range(1, N + 1):
            rhs = np.logaddexp(np.log(N + K * alpha) + arr[N + 1, K], np.log(alpha) + arr[N + 1, K + 1])
            worst = max(worst, abs(np.expm1(arr[N, K] - rhs)))
    ok = exact and worst <= 1e-8
    detail = f"W[1,1] == 1/alpha: {exact}; max recursion relative error {worst:.2e} over N < 300"
    report("criterion 8 (W-table integrity)", ok, detail)
    assert ok, detail


def _geweke(cycles, seed):
    """Successive-conditional simulator: a sampler sweep, then fresh data given the parameters."""
    n, d = 10, 2
    hyper = Hyperparameters(d=d, alpha=3.0, alpha1=2.0, alpha2=2.0, omega=1.0, beta1=1.0, beta2=4.0,
                            beta_interval=(0.0, 2.0))
    rng = np.random.default_rng(seed)
    mask = pair_mask(n, True)

    z = [1]
    for _ in range(1, n):
        lw = log_urn_weights(np.array(z), hyper.alpha)
        p = np.exp(lw - lw.max())
        z.append(int(rng.choice(p.size, p=p / p.sum())) + 1)
    z = np.array(z)
    K = z.max()
    tau = rng.gamma(hyper.alpha1, 2.0 / hyper.alpha2, K)
    mu = rng.standard_normal((K, d)) / np.sqrt(hyper.omega * tau)[:, None]
    U = mu[z - 1] + rng.standard_normal((n, d)) / np.sqrt(tau[z - 1])[:, None]
    state = LatentState(rng.uniform(*hyper.beta_interval), U, z, np.zeros((n, n), np.int8),
                        np.zeros((n, n), np.int64), rng.beta(hyper.beta1, hyper.beta2, (K, K)))

    def regenerate():
        zi = state.z - 1
        nu = (rng.random((n, n)) < state.P[zi[:, None], zi[None, :]]) & mask
        X = rng.poisson(np.exp(state.beta - distance_matrix(state.U))) * mask
        state.nu, state.X = nu.astype(np.int8), X.astype(np.int64)
        return WeightedNetwork(np.where(nu, 0, X))

    data = regenerate()
    ctx = PartitionContext.build(n, hyper)
    out = np.empty((cycles, 2))
    for t in range(cycles):
        sweep = Sweep()
        step_nu(state, data, rng, sweep)
        step_X(state, data, rng, sweep)
        step_beta(state, hyper, rng, True, sweep, sigma2=0.3)
        step_U(state, hyper, rng, True, sweep, sigma2=0.5)
        step_z(state, data, hyper, ctx, rng, sweep)
        step_tae(state, data, hyper, ctx, rng, sweep)
        step_P(state, hyper, rng, True, sweep)
        out[t] = state.beta, state.K
        data = regenerate()
    e_k = float(np.sum(np.arange(1, n + 1) * np.exp(log_partition_mass_by_k(n, hyper.alpha))))
    lo, hi = hyper.beta_interval
    exact = {"E[beta]": (lo + hi) / 2, "E[beta^2]": (hi ** 3 - lo ** 3) / (3 * (hi - lo)), "E[K]": e_k}
    series = {"E[beta]": out[:, 0], "E[beta^2]": out[:, 0] ** 2, "E[K]": out[:, 1]}
    return exact, series


def _batch_means_z(x, want, batches=100):
    b = x[: x.size // batches * batches].reshape(batches, -1).mean(axis=1)
    return (x.mean() - want) / (b.std(ddof=1) / np.sqrt(batches))


def test_criterion_09_getting_it_right(report):
    exact, series = _geweke(100000, seed=2024)
    zs = {k: _batch_means_z(series[k], exact[k]) for k in exact}
    ok = all(abs(v) <= 4 for v in zs.values())
    detail = ", ".join(f"{k} z={v:+.2f}" for k, v in zs.items())
    report("criterion 9 (getting-it-right)", ok, detail)
    assert ok, detail


def _auc_oracle(score, label):
    pos, neg = score[label], score[~label]
    return np.mean([(p > q) + 0.5 * (p == q) for p in pos for q in neg])


def test_criterion_10_metrics_and_determinism(report, tmp_path):
    rng = np.random.default_rng(10)
    metric_ok = True
    for _ in range(1000):
        n = int(rng.integers(2, 30))
        a, b, c = (rng.integers(1, int(rng.integers(2, 8)), n) for _ in range(3))
        ab, ba, bc, ac = vi_distance(a, b), vi_distance(b, a), vi_distance(b, c), vi_distance(a, c)
        metric_ok &= vi_distance(a, a) == 0 and ab >= 0 and abs(ab - ba) <= 1e-12 and ac <= ab + bc + 1e-12
        metric_ok &= (ab == 0) == np.array_equal(canonical(a), canonical(b))
    auc_err = 0.0
    for _ in range(50):
        n = 9
        y = (rng.random((n, n)) < 0.3).astype(int)
        np.fill_diagonal(y, 0)
        nu_star = ((rng.random((n, n)) < 0.4) & (y == 0)).astype(int)
        nu_hat = np.round(rng.random((n, n)), 1)
        _, auc = roc_curve(nu_hat, nu_star, y)
        m = ~np.eye(n, dtype=bool) & (y == 0)
        auc_err = max(auc_err, abs(auc - _auc_oracle(nu_hat[m], nu_star[m] == 1)))
    pnz_ok = all(np.all(prob_nonzero_given_zero(nu, lam) <= nu + 1e-15)
                 for nu, lam in ((rng.random((8, 8)), rng.exponential(3.0, (8, 8))) for _ in range(500)))

    sim = tmp_path / "sim"
    main(["simulate", "--preset", "ss1-scenario1", "--seed", "4", "--out", str(sim)])
    digests = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        main(["fit", "--network", str(sim / "Y.csv"), "--attributes", str(sim / "attributes.txt"),
              "--iterations", "600", "--burnin", "200", "--seed", "9", "--out", str(out)])
        main(["summarize", "--trace", str(out / "trace"), "--out", str(out / "summary")])
        files = sorted(p for p in out.rglob("*") if p.is_file())
        digests.append({p.relative_to(out): p.read_bytes() for p in files})
    det_ok = digests[0].keys() == digests[1].keys() and all(
        digests[0][k] == digests[1][k] for k in digests[0])
    ok = metric_ok and auc_err <= 1e-12 and pnz_ok and det_ok
    detail = (f"VI metric on 1000 triples: {metric_ok}; max AUC error {auc_err:.1e}; pnz <= nu_hat: {pnz_ok}; "
              f"byte-identical repeated runs ({len(digests[0])} files): {det_ok}")
    report("criterion 10 (metrics and determinism)", ok, detail)
    assert ok, detail


SMOKE_CASES = [(18, 3, True, "dense-csv"), (43, 2, False, "edge-list-csv"),
               (64, 3, True, "edge-list-csv"), (84, 2, False, "dense-csv")]


@pytest.mark.parametrize("n,d,directed,fmt", SMOKE_CASES)
def test_real_data_size_smoke(report, tmp_path, n, d, directed, fmt):
    rng = np.random.default_rng(n)
    z = np.sort(rng.integers(0, 3, n))
    U = rng.normal(0, 0.4, (n, d)) + 2.0 * np.eye(3, d)[z]
    y = rng.poisson(np.exp(1.0 - distance_matrix(U))) * pair_mask(n, directed)
    if not directed:
        y = y + y.T
    path = tmp_path / "net.csv"
    if fmt == "dense-csv":
        np.savetxt(path, y, fmt="%d", delimiter=",")
    else:
        rows = ["src,dst,weight"]
        for i, j in zip(*np.nonzero(np.triu(y, 1) if not directed else y)):
            rows.append(f"{i + 1},{j + 1},{y[i, j]}")
        path.write_text("\n".join(rows) + "\n")
    (tmp_path / "c.txt").write_text("".join(f"g{g}\n" for g in z))
    args = ["fit", "--network", str(path), "--format", fmt, "--d", str(d), "--iterations", "300",
            "--burnin", "100", "--seed", "1", "--attributes", str(tmp_path / "c.txt"), "--out", str(tmp_path / "fit")]
    if not directed:
        args.append("--undirected")
    codes = [main(args), main(["summarize", "--trace", str(tmp_path / "fit" / "trace"),
                               "--out", str(tmp_path / "summary")])]
    expected = {"summary.json", "z_hat.csv", "positions.csv", "nu_hat.csv", "p_hat.csv", "lambda_hat.csv",
                "d_hat.csv", "pnz_hat.csv"}
    present = {p.name for p in (tmp_path / "summary").iterdir()} if codes[1] == 0 else set()
    ok = codes == [0, 0] and expected <= present
    if ok:
        s = json.loads((tmp_path / "summary" / "summary.json").read_text())
        ok = len(s["z_hat"]) == n and len(s["U_hat"][0]) == d
    detail = f"N={n} d={d} {'directed' if directed else 'undirected'} {fmt}: exit codes {codes}"
    report(f"real-data-size smoke N={n}", ok, detail)
    assert ok, detail
