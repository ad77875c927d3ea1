import numpy as np
import pytest
from scipy import stats

from ziplpcm.simgen import (PRESETS, SS1_MU, SS1_P, SS1_SIZES, SS1_TAU, GroundTruth, contaminate,
                            get_preset, simulate_pois_lpcm, simulate_preset, simulate_zip_lpcm,
                            simulate_zip_sbm)


def _zero_fraction(y):
    n = y.shape[0]
    return ((y == 0).sum() - n) / (n * (n - 1))


def _expected_zero_fraction(draws, seed):
    """Mean over position draws of the average pairwise zero probability."""
    rng = np.random.default_rng(seed)
    z = np.repeat(np.arange(5), SS1_SIZES)
    n = z.size
    off = ~np.eye(n, dtype=bool)
    p = SS1_P[z[:, None], z[None, :]]
    vals = []
    for _ in range(draws):
        U = np.vstack([stats.multivariate_normal(SS1_MU[k], np.eye(3) / SS1_TAU[k]).rvs(
            SS1_SIZES[k], random_state=rng) for k in range(5)])
        dist = np.sqrt(((U[:, None, :] - U[None, :, :]) ** 2).sum(-1))
        prob0 = p + (1 - p) * np.exp(-np.exp(3.0 - dist))
        vals.append(prob0[off].mean())
    vals = np.array(vals)
    return vals.mean(), vals.std(ddof=1) / np.sqrt(draws)


def test_ss1_zero_fraction_matches_model_expectation():
    fr = np.array([_zero_fraction(simulate_preset("ss1-scenario1", s)[0].y) for s in range(100)])
    want, se_want = _expected_zero_fraction(400, seed=99)
    se = np.hypot(fr.std(ddof=1) / np.sqrt(fr.size), se_want)
    assert abs(fr.mean() - want) < 4 * se


@pytest.mark.xfail(strict=True, reason="the model's expected zero fraction for these parameters is "
                                       "about 0.76, outside the 0.35-0.60 band")
def test_ss1_zero_fraction_band():
    fr = np.array([_zero_fraction(simulate_preset("ss1-scenario1", s)[0].y) for s in range(100)])
    assert 0.35 <= np.median(fr) <= 0.60


def test_truth_consistency():
    net, truth, attrs = simulate_preset("ss1-scenario1", 3)
    assert net.n == 75 and truth.U_star.shape == (75, 3)
    assert np.all(net.y[truth.nu_star == 1] == 0)
    assert np.all(np.diag(truth.nu_star) == 0)
    assert truth.z_star.tolist() == np.repeat(np.arange(1, 6), SS1_SIZES).tolist()
    assert np.count_nonzero(attrs.c != truth.z_star) == 20
    assert set(attrs.c.tolist()) <= set(range(1, 6))


def test_zero_P_matches_poisson_generator():
    K = len(SS1_SIZES)
    a, ta = simulate_zip_lpcm(SS1_SIZES, SS1_MU, SS1_TAU, 3.0, np.zeros((K, K)), seed=5)
    b, _ = simulate_pois_lpcm(SS1_SIZES, SS1_MU, SS1_TAU, 3.0, seed=5)
    assert a == b
    assert ta.nu_star.sum() == 0


def test_scenario2_denser_than_scenario1():
    for s in range(5):
        y1 = simulate_preset("ss1-scenario1", s)[0].y
        y2 = simulate_preset("ss1-scenario2", s)[0].y
        assert np.count_nonzero(y2) > np.count_nonzero(y1)


def test_vanishing_rates():
    net, _ = simulate_zip_lpcm([3, 2], [[0, 0], [1, 1]], [1, 1], -30.0, np.full((2, 2), 0.2), seed=1)
    assert net.y.sum() == 0


def test_two_node_mean_weight():
    # u_i - u_j ~ N(0, 2 I_1) so E[lambda] = e^beta E[exp(-|N(0, 2)|)]
    beta = 1.0
    vals = [simulate_pois_lpcm([2], [[0.0]], [1.0], beta, seed=s)[0].y[0, 1] for s in range(20000)]
    s = np.sqrt(2.0)
    e_exp = 2 * np.exp(s * s / 2) * stats.norm.sf(s)
    want = np.exp(beta) * e_exp
    assert abs(np.mean(vals) - want) < 4 * np.std(vals) / np.sqrt(len(vals))


def test_sbm_block_moments():
    lam = np.array([[4.0, 0.5], [0.5, 2.0]])
    P = np.array([[0.3, 0.1], [0.1, 0.0]])
    sums = np.zeros((2, 2))
    counts = np.zeros((2, 2))
    for s in range(200):
        net, truth = simulate_zip_sbm([6, 9], lam, P, seed=s)
        z = truth.z_star - 1
        for g in range(2):
            for h in range(2):
                m = (z[:, None] == g) & (z[None, :] == h) & ~np.eye(15, dtype=bool)
                sums[g, h] += net.y[m].sum()
                counts[g, h] += m.sum()
    want = (1 - P) * lam
    sd = np.sqrt(((1 - P) * lam * (1 + P * lam)) / counts)
    assert np.all(np.abs(sums / counts - want) < 4 * sd)


def test_undirected_generation_symmetric():
    net, truth = simulate_zip_sbm([4, 4], np.full((2, 2), 2.0), np.full((2, 2), 0.3), seed=1, directed=False)
    assert np.array_equal(net.y, net.y.T)
    assert np.array_equal(truth.nu_star, truth.nu_star.T)


def test_contaminate():
    z = np.repeat([1, 2, 3], 4)
    assert np.array_equal(contaminate(z, 0, seed=1).c, z)
    c = contaminate(z, 5, seed=2).c
    assert np.count_nonzero(c != z) == 5
    with pytest.raises(ValueError):
        contaminate(z, 13)


def test_presets_and_truth_io(tmp_path):
    assert set(PRESETS) == {"ss1-scenario1", "ss1-scenario2", "ss2-scenario1", "ss2-scenario2",
                            "ss3-n150", "ss3-n225", "ss3-k2"}
    assert get_preset("ss3-n225").params["sizes"] == (15, 30, 45, 60, 75)
    assert np.allclose(get_preset("ss3-n150").params["mu"], SS1_MU * 1.25)
    with pytest.raises(KeyError):
        get_preset("nope")
    net, truth, _ = simulate_preset("ss2-scenario2", 4)
    assert truth.lambda_star[0, 3] == 2.0
    truth.save(tmp_path / "t.json")
    back = GroundTruth.load(tmp_path / "t.json")
    assert np.array_equal(back.nu_star, truth.nu_star)
    assert np.array_equal(back.lambda_star, truth.lambda_star)


def test_shape_errors():
    with pytest.raises(ValueError):
        simulate_zip_lpcm([2, 2], [[0, 0]], [1, 1], 1.0, np.zeros((2, 2)))
    with pytest.raises(ValueError):
        simulate_zip_sbm([2, 2], np.zeros((2, 2)), np.zeros((2, 2)))
