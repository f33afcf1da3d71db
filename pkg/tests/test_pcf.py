import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from headway_interference.pcf import K_MAX, pcf, pcf_branch, pcf_truncated, rho3
from headway_interference.scenario import make_scenario
from oracles import renewal_oracle

P = make_scenario(lam=0.1, c=4, r0=100, eta=3)


@pytest.mark.parametrize("lam, c", [(0.1, 4.0), (0.05, 10.0), (0.2, 2.0)])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_branches_match_convolution(lam, c, k):
    p = make_scenario(lam=lam, c=c, r0=100, eta=3)
    oracle = renewal_oracle(p, k)
    for frac in (0.01, 0.3, 0.5, 0.77, 0.99):
        d = (k + frac) * c
        assert abs(pcf_branch(k, d, p) / p.lam - oracle(d)) <= 1e-6


def test_branch_one_at_c():
    assert pcf_branch(1, 4.0, P) == pytest.approx(0.1 / 6, rel=1e-14, abs=0)


def test_branch_zero_vanishes():
    assert pcf_branch(0, 2.0, P) == 0.0


def test_branch_outside_its_range_is_zero():
    assert pcf_branch(1, 9.0, P) == 0.0
    assert pcf_branch(2, 7.9, P) == 0.0


def test_branch_two_example():
    d = 10.0
    mu = P.mu
    expected = P.lam * (mu * math.exp(-mu * (d - 4)) + mu * mu * (d - 8) * math.exp(-mu * (d - 8)))
    assert pcf_branch(2, d, P) == pytest.approx(expected, rel=1e-14, abs=0)


def test_right_continuous_at_multiples():
    v = pcf(8.0, P)
    assert v.branch_index == 2
    assert v.value == pytest.approx(pcf_branch(2, 8.0, P))


@given(d=st.floats(1e-9, 4.0, exclude_max=True))
def test_hardcore_exclusion(d):
    assert pcf(d, P).value == 0.0


@given(d=st.floats(1e-6, 1e4))
def test_ppp_limit(d):
    p = make_scenario(lam=0.1, c=0, r0=100, eta=3)
    assert pcf(d, p).value == pytest.approx(0.01, rel=1e-15, abs=0)


def test_branch_one_normalization():
    val = integrate.quad(lambda d: pcf_branch(1, d, P) / (P.lam * P.mu) * P.mu, 4, 8, epsabs=0, epsrel=1e-12)[0]
    assert val == pytest.approx(1 - math.exp(-P.mu * 4), rel=1e-10, abs=0)
    assert val <= 1


@pytest.mark.parametrize("lam, c", [(0.1, 1.0), (0.1, 5.0), (0.025, 20.0), (0.05, 2.0)])
def test_decorrelation(lam, c):
    p = make_scenario(lam=lam, c=c, r0=100, eta=3)
    start = 20 / p.mu + 20 * c
    for d in np.linspace(start + 1e-3, start + 10 * c, 57):
        assert abs(pcf(d, p).value - lam ** 2) / lam ** 2 < 0.01


def test_truncation_flag_far_away():
    v = pcf((K_MAX + 5) * 4.0, P)
    assert v.truncated and v.value == P.lam ** 2
    assert not pcf(50.0, P).truncated


def test_large_branch_index_against_high_precision_sum():
    p = make_scenario(lam=0.1, c=9.5, r0=100, eta=3)
    d = 60.3 * 9.5
    mu, c = mp.mpf(p.mu), mp.mpf(9.5)
    ref = p.lam * mp.fsum(mu ** j * (d - j * c) ** (j - 1) * mp.exp(-mu * (d - j * c)) / mp.gamma(j)
                          for j in range(1, 61))
    v = pcf(d, p)
    assert v.branch_index == 60 and math.isfinite(v.value)
    assert v.value == pytest.approx(float(ref), rel=1e-10, abs=0)


def test_negative_separation_symmetric():
    assert pcf(-6.0, P).value == pcf(6.0, P).value


def test_truncated_examples():
    assert pcf_truncated(2 * 4 + 1, 2, P) == pytest.approx(0.01)
    for d in (4.5, 6.0, 7.9):
        assert pcf_truncated(d, 2, P) == pcf(d, P).value
    d = 10.0
    exact = pcf(d, P).value
    assert pcf_truncated(d, 3, P) == exact
    assert pcf_truncated(d, 2, P) == P.lam ** 2
    assert abs(pcf_truncated(d, 3, P) - P.lam ** 2) == pytest.approx(abs(exact - P.lam ** 2))
    with pytest.raises(ValueError):
        pcf_truncated(5.0, 1, P)


def test_rho3_examples():
    assert rho3(3.0, 20.0, P) == 0.0
    ppp = make_scenario(lam=0.1, c=0, r0=100, eta=3)
    assert rho3(1.0, 2.0, ppp) == pytest.approx(1e-3, rel=1e-14, abs=0)
    assert rho3(5.0, 7.0, P) == pytest.approx(pcf(5.0, P).value * pcf(7.0, P).value / 0.1, rel=1e-15, abs=0)


def test_rho3_matches_triple_convolution():
    # consecutive gaps d1, d2 of a renewal process: rho3 = lam * u(d1) * u(d2), u the renewal density
    oracle = renewal_oracle(P, 3)
    for d1, d2 in [(5.0, 7.0), (9.0, 4.5), (11.5, 6.0)]:
        assert rho3(d1, d2, P) == pytest.approx(P.lam * oracle(d1) * oracle(d2), rel=1e-7, abs=0)
