import math

import numpy as np
import pytest
from scipy import stats

from headway_interference.lattice import LatticeParams
from headway_interference.pcf import pcf
from headway_interference.scenario import FadingModel, ParameterError, Pathloss, make_scenario
from headway_interference.simulate import (
    Deployment,
    SimConfig,
    SimModel,
    chunk_rng,
    estimate_moments,
    interference_realization,
    lane_superposition_cdf,
    pcf_histogram,
    sample_hardcore,
    sample_lattice,
    simulate_interference,
    summarize,
)
from oracles import quad_pieces

HC = make_scenario(lam=0.1, c=4, r0=100, eta=3)
PPP = make_scenario(lam=0.1, c=0, r0=100, eta=3)
LAT = LatticeParams(10.0, 100.0, 3.0)


def _within(a, b, k=3.0):
    return abs(a.value - b.value) <= k * math.hypot(a.std_error, b.std_error)


# -- configuration -------------------------------------------------------------------------------

@pytest.mark.parametrize("kw", [dict(runs=0, seed=1), dict(runs=10, seed=-1), dict(runs=10, seed=2 ** 64),
                                dict(runs=10, seed=1, half_length=0.0), dict(runs=10, seed=1, burn_in=-1.0),
                                dict(runs=10, seed=1, workers=0)])
def test_config_validation(kw):
    with pytest.raises(ParameterError):
        SimConfig(**kw)


def test_burn_in_rule():
    cfg = SimConfig(runs=1, seed=1)
    assert cfg.burn_in_for(HC) == max(50 / HC.mu, 200.0)
    assert cfg.burn_in_for(PPP) == 500.0
    assert SimConfig(runs=1, seed=1, burn_in=7.0).burn_in_for(HC) == 7.0
    assert SimConfig(runs=1, seed=1, model="ppp").model is SimModel.PPP


def test_window_must_exceed_cell():
    with pytest.raises(ParameterError):
        simulate_interference(HC, SimConfig(runs=10, seed=1, half_length=50.0))


def test_model_parameter_types_checked():
    with pytest.raises(ParameterError):
        simulate_interference(HC, SimConfig(runs=10, seed=1, model="lattice"))
    with pytest.raises(ParameterError):
        simulate_interference(LAT, SimConfig(runs=10, seed=1))


# -- deployments -----------------------------------------------------------------------------------

def test_deployment_invariants():
    with pytest.raises(ValueError):
        Deployment(np.array([0.0, 1.0, 1.0]))
    d = Deployment(np.array([-3.0, 1.0, 5.0]))
    np.testing.assert_array_equal(d.gaps(), [4.0, 4.0])
    assert Deployment(np.array([])).min_gap() == math.inf


def test_hardcore_minimum_gap_over_a_million_gaps():
    d = sample_hardcore(HC, SimConfig(runs=1, seed=3, half_length=5.1e6), chunk_rng(3, 0))
    assert d.gaps().size > 1_000_000
    assert d.min_gap() >= 4.0


def test_hardcore_mean_gap():
    g = sample_hardcore(HC, SimConfig(runs=1, seed=4, half_length=1e6), chunk_rng(4, 0)).gaps()
    se = g.std(ddof=1) / math.sqrt(g.size)
    assert abs(g.mean() - 10.0) <= 3 * se
    assert np.all(g >= 4.0)


def test_ppp_gaps_exponential():
    g = sample_hardcore(PPP, SimConfig(runs=1, seed=5, half_length=6e4), chunk_rng(5, 0)).gaps()[:10_000]
    assert g.size == 10_000
    assert stats.kstest(g, stats.expon(scale=10.0).cdf).pvalue > 0.01


def test_lattice_gaps_and_offset():
    cfg = SimConfig(runs=1, seed=1, half_length=2000.0, model="lattice")
    near = []
    for i in range(2000):
        d = sample_lattice(LAT, cfg, chunk_rng(8, i))
        np.testing.assert_allclose(d.gaps(), 10.0, rtol=0, atol=1e-9)
        x = d.positions
        near.append(x[x > 100].min() - 100)
    assert stats.kstest(near, stats.uniform(scale=10.0).cdf).pvalue > 0.01


def test_lattice_left_offset_branch_frequency():
    p = LatticeParams(7.0, 100.0, 3.0)
    eps = p.epsilon
    cfg = SimConfig(runs=1, seed=1, half_length=500.0, model="lattice")
    hits, n = 0, 4000
    for i in range(n):
        x = sample_lattice(p, cfg, chunk_rng(9, i)).positions
        z = x[x > 100].min() - 100
        z_left = -100 - x[x < -100].max()
        first_branch = z <= (1 - eps) * 7.0
        expected = (1 - eps) * 7.0 - z if first_branch else (2 - eps) * 7.0 - z
        assert z_left == pytest.approx(expected, abs=1e-9)
        hits += first_branch
    se = math.sqrt((1 - eps) * eps / n)
    assert abs(hits / n - (1 - eps)) <= 3 * se
    assert 1 - eps == pytest.approx(0.4286, abs=1e-4)


# -- interference functional ---------------------------------------------------------------------

def test_realization_examples():
    path = Pathloss(100.0, 3.0)
    rng = chunk_rng(1, 0)
    assert interference_realization(Deployment(np.array([])), path, FadingModel.RAYLEIGH_UNIT_MEAN, rng) == 0.0
    one = Deployment(np.array([200.0]))
    assert interference_realization(one, path, FadingModel.NONE, rng) == pytest.approx(1.25e-7, rel=1e-15, abs=0)
    inside = Deployment(np.array([-50.0, 20.0, 99.0]))
    assert interference_realization(inside, path, FadingModel.RAYLEIGH_UNIT_MEAN, rng) == 0.0


def test_determinism_across_workers():
    base = simulate_interference(HC, SimConfig(runs=2000, seed=42, half_length=5000.0))
    again = simulate_interference(HC, SimConfig(runs=2000, seed=42, half_length=5000.0))
    par = simulate_interference(HC, SimConfig(runs=2000, seed=42, half_length=5000.0, workers=3))
    other = simulate_interference(HC, SimConfig(runs=2000, seed=43, half_length=5000.0))
    np.testing.assert_array_equal(base, again)
    np.testing.assert_array_equal(base, par)
    assert not np.array_equal(base, other)


def test_prefix_stability():
    short = simulate_interference(HC, SimConfig(runs=500, seed=7, half_length=5000.0))
    long = simulate_interference(HC, SimConfig(runs=1000, seed=7, half_length=5000.0))
    np.testing.assert_array_equal(short, long[:500])


def test_standard_error_scaling():
    a = estimate_moments(HC, SimConfig(runs=10_000, seed=21, half_length=5000.0))
    b = estimate_moments(HC, SimConfig(runs=20_000, seed=21, half_length=5000.0))
    assert 0.55 <= b.mean.std_error / a.mean.std_error <= 0.9
    assert 0.55 <= b.std_dev.std_error / a.std_dev.std_error <= 0.9


def test_summarize_needs_batches():
    with pytest.raises(ParameterError):
        summarize(np.ones(50), seed=1)
    m = summarize(np.arange(1.0, 1001.0), seed=1)
    assert m.mean.value == pytest.approx(500.5) and m.mean.std_error > 0
    assert m.method == "MonteCarlo"


@pytest.mark.slow
def test_ppp_mean_and_std():
    m = estimate_moments(PPP, SimConfig(runs=100_000, seed=31))
    assert abs(m.mean.value - 1e-5) <= 3 * m.mean.std_error
    assert abs(m.std_dev.value - math.sqrt(8e-12)) <= 3 * m.std_dev.std_error


@pytest.mark.slow
def test_mean_independent_of_model():
    cfg = dict(runs=20_000, half_length=20_000.0)
    hc = estimate_moments(HC, SimConfig(seed=32, **cfg))
    ppp = estimate_moments(HC, SimConfig(seed=33, model="ppp", **cfg))
    lat = estimate_moments(LAT, SimConfig(seed=34, model="lattice", **cfg))
    assert _within(hc.mean, ppp.mean) and _within(hc.mean, lat.mean) and _within(ppp.mean, lat.mean)


@pytest.mark.slow
def test_std_ordering_across_models():
    cfg = dict(runs=20_000, half_length=20_000.0)
    hc = estimate_moments(HC, SimConfig(seed=35, **cfg)).std_dev
    ppp = estimate_moments(HC, SimConfig(seed=36, model="ppp", **cfg)).std_dev
    lat = estimate_moments(LAT, SimConfig(seed=37, model="lattice", **cfg)).std_dev
    assert ppp.value - 3 * ppp.std_error > hc.value + 3 * hc.std_error
    assert hc.value - 3 * hc.std_error > lat.value + 3 * lat.std_error


def test_edge_effect_of_segment_length():
    # common random numbers: one 80 km deployment summed over the 40 km and 80 km windows
    half = 20_000.0
    cfg = SimConfig(runs=1, seed=1, half_length=2 * half)
    path = Pathloss(HC.r0, HC.eta)
    short, full = [], []
    for i in range(300):
        rng = chunk_rng(44, i)
        x = sample_hardcore(HC, cfg, rng).positions
        g = np.asarray(path(x)) * rng.standard_exponential(x.size)
        full.append(g.sum())
        short.append(g[np.abs(x) <= half].sum())
    shift = np.mean(full) - np.mean(short)
    se_protocol = np.std(short, ddof=1) / math.sqrt(100_000)
    assert 0 <= shift < se_protocol


# -- lane superposition ---------------------------------------------------------------------------------

def _palm_superposition_cdf(p, n_lanes, x):
    """Gap CDF of superposed stationary renewal lanes: own-lane gap times forward recurrences of the rest."""
    lam, mu, c = p.lam, p.mu, p.c
    x = np.asarray(x, dtype=float)
    own = np.where(x < c, 1.0, np.exp(-mu * (x - c)))
    fwd = np.where(x < c, lam * (c - x + 1 / mu), lam / mu * np.exp(-mu * (x - c)))
    return 1 - own * fwd ** (n_lanes - 1)


LANE_CFG = SimConfig(runs=2000, seed=2, half_length=1000.0)


def test_single_lane_cdf_zero_below_c():
    p = make_scenario(lam=0.025, c=16, r0=100, eta=3)
    res = lane_superposition_cdf(p, 1, LANE_CFG, x=np.array([0.0, 8.0, 15.999, 40.0]))
    np.testing.assert_array_equal(res.empirical[:3], 0.0)
    assert res.empirical[3] > 0


def test_two_lanes_kink_at_c():
    p = make_scenario(lam=0.025, c=16, r0=100, eta=3)
    assert lane_superposition_cdf(p, 2, LANE_CFG).deficit_at_c > 0.05


@pytest.mark.parametrize("c, lanes", [(4.0, 4), (16.0, 2), (16.0, 8)])
def test_lanes_match_palm_prediction(c, lanes):
    p = make_scenario(lam=0.025, c=c, r0=100, eta=3)
    res = lane_superposition_cdf(p, lanes, LANE_CFG)
    pred = _palm_superposition_cdf(p, lanes, res.x)
    assert np.max(np.abs(res.empirical - pred)) < 4 / math.sqrt(res.n_gaps) + 2e-3
    rate = lanes * p.lam
    assert res.deficit_at_c == pytest.approx(-math.expm1(-rate * c) - _palm_superposition_cdf(p, lanes, c),
                                             abs=0.01)


def test_lanes_validation():
    with pytest.raises(ParameterError):
        lane_superposition_cdf(HC, 0, LANE_CFG)


# -- pair correlation histogram ----------------------------------------------------------------------------

@pytest.fixture(scope="module")
def hist():
    return pcf_histogram(HC, SimConfig(runs=2000, seed=10), bin_width=0.5, d_max=100.0)


def test_histogram_empty_below_c(hist):
    assert np.all(hist.density[hist.edges[1:] <= 4.0] == 0.0)


def test_histogram_first_bin_matches_pcf(hist):
    i = int(np.searchsorted(hist.edges, 4.0))
    expected = quad_pieces(lambda d: pcf(d, HC).value, 4.0, 4.5) / 0.5
    assert abs(hist.density[i] - expected) <= 3 * hist.std_error[i]


def test_histogram_decorrelates():
    # one wide bin: its batch SE carries the pair correlation that fine bins would hide
    wide = pcf_histogram(HC, SimConfig(runs=2000, seed=10), bin_width=20.0, d_max=100.0)
    exact = quad_pieces(lambda d: pcf(d, HC).value, 80.0, 100.0) / 20.0
    assert exact == pytest.approx(0.01, rel=1e-12, abs=0)
    assert abs(wide.density[-1] - 0.01) <= 3 * wide.std_error[-1]


def test_histogram_validation():
    with pytest.raises(ParameterError):
        pcf_histogram(HC, SimConfig(runs=10, seed=1), bin_width=0.0)
