import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from sarchange.errors import DomainError, InputError, ParameterError
from sarchange.glr import (
    change_probability,
    change_sign,
    cumulative_monitor,
    pair_detect,
    s_glr,
    s_glr_general,
    saturated,
    threshold_from_probability,
    threshold_map,
    weighted_sglr_distance,
    weighted_sglr_mean,
)
from sarchange.speckle import ChangeProfile, inject_changes, simulate_speckle, simulate_stack
from sarchange.stack import AMPLITUDE, ImageStack

positive = st.floats(1e-6, 1e6, allow_nan=False)
looks = st.floats(0.3, 500.0)


def eq2_mp(a, b, la, lb):
    a, b, la, lb = (mpmath.mpf(v) for v in (a, b, la, lb))
    m = (la * a + lb * b) / (la + lb)
    return la * mpmath.log(m / a) + lb * mpmath.log(m / b)


def eq3_mp(a, b, enl):
    a, b = mpmath.mpf(a), mpmath.mpf(b)
    return 2 * enl * mpmath.log(mpmath.sqrt(a / b) + mpmath.sqrt(b / a)) - 2 * enl * mpmath.log(2)


mpmath.mp.dps = 40


def test_examples():
    assert s_glr(7.0, 7.0, 4.9) == 0.0
    assert s_glr(1.0, 4.0, 1.0) == pytest.approx(2 * math.log(1.25), rel=1e-15)
    assert s_glr(2.0, 8.0, 1.0) == s_glr(1.0, 4.0, 1.0)
    assert s_glr_general(5.0, 5.0, 3.0, 7.0) == 0.0
    assert s_glr_general(1.0, 4.0, 1.0, 1.0) == pytest.approx(float(eq2_mp(1, 4, 1, 1)), rel=1e-14)
    assert s_glr_general(1.0, 4.0, 2.0, 2.0) == pytest.approx(2 * s_glr_general(1.0, 4.0, 1.0, 1.0), rel=1e-15)


@given(positive, positive, looks)
@settings(max_examples=300)
def test_s_glr_against_arbitrary_precision(a, b, enl):
    want = float(eq3_mp(a, b, enl))
    assert s_glr(a, b, enl) == pytest.approx(want, rel=1e-12, abs=1e-300)


@given(positive, positive, looks, looks)
@settings(max_examples=300)
def test_general_glr_against_arbitrary_precision(a, b, la, lb):
    want = float(eq2_mp(a, b, la, lb))
    assert s_glr_general(a, b, la, lb) == pytest.approx(want, rel=1e-11, abs=1e-300)


@given(positive, positive, looks)
def test_symmetry_and_sign(a, b, enl):
    assert s_glr(a, b, enl) == s_glr(b, a, enl)
    assert s_glr(a, b, enl) >= 0.0
    assert (s_glr(a, b, enl) == 0.0) == (a == b)
    assert change_sign(a, b) == -change_sign(b, a)


@given(positive, positive, looks, st.integers(-20, 20))
def test_power_of_two_scaling_is_exact(a, b, enl, e):
    c = 2.0**e
    assert s_glr(c * a, c * b, enl) == s_glr(a, b, enl)


def test_linear_in_enl():
    rng = np.random.default_rng(0)
    a, b = rng.uniform(0.1, 10, (2, 1000))
    np.testing.assert_allclose(s_glr(a, b, 3.0 * 4.9), 3.0 * s_glr(a, b, 4.9), rtol=1e-14)


def test_zero_pixels_saturate():
    s = s_glr(np.array([0.0, 1.0, 0.0]), np.array([1.0, 0.0, 0.0]), 4.0)
    assert np.all(np.isinf(s)) and saturated(s).all()
    with pytest.raises(DomainError):
        s_glr(-1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        s_glr_general(0.0, 1.0, 1.0, 1.0)
    with pytest.raises(ParameterError):
        s_glr(1.0, 2.0, 0.0)


def test_change_sign_examples():
    assert change_sign(1.0, 4.0) == 1
    assert change_sign(4.0, 1.0) == -1
    assert change_sign(3.0, 3.0) == 0


def test_probability_examples():
    assert change_probability(0.0, 4.9) == 0.0
    rho = 1 - 1 / 19.6
    assert rho == pytest.approx(0.9489796, abs=1e-7)
    assert -0.25 * (1 - 1 / rho) ** 2 == pytest.approx(-7.23e-4, rel=1e-3)
    with pytest.raises(ParameterError):
        change_probability(1.0, 0.25)


def test_probability_matches_scipy_mixture():
    s = np.linspace(0.0, 30.0, 301)
    for enl in (1.0, 4.9, 9.0):
        rho = 1 - 1 / (4 * enl)
        w2 = -0.25 * (1 - 1 / rho) ** 2
        d = 2 * rho * s
        want = np.clip(stats.chi2.cdf(d, 1) + w2 * (stats.chi2.cdf(d, 5) - stats.chi2.cdf(d, 1)), 0, 1)
        np.testing.assert_allclose(change_probability(s, enl), want, atol=1e-13)


@given(st.floats(0, 100), st.floats(0, 100), st.floats(0.3, 100))
def test_probability_monotone(s1, s2, enl):
    lo, hi = sorted((s1, s2))
    p_lo, p_hi = change_probability(lo, enl), change_probability(hi, enl)
    assert 0.0 <= p_lo <= p_hi <= 1.0


@pytest.mark.parametrize("tau", [0.5, 0.9, 0.95, 0.99, 0.999])
@pytest.mark.parametrize("enl", [1.0, 4.9, 9.0, 16.0])
def test_threshold_round_trip(tau, enl):
    thr = threshold_from_probability(tau, enl)
    assert change_probability(thr, enl) == pytest.approx(tau, abs=1e-8)


def test_threshold_limits():
    assert threshold_from_probability(1e-9, 4.9) < 1e-12
    with pytest.raises(ParameterError):
        threshold_from_probability(1.0, 4.9)


def test_threshold_far_at_095():
    # no-change pairs at L = 4.9: exceedance of the 95% threshold is 5% +- 0.5 pp
    u = np.ones(10**6)
    a = simulate_speckle(u, 4.9, seed=21)
    b = simulate_speckle(u, 4.9, seed=22)
    far = np.mean(s_glr(a, b, 4.9) >= threshold_from_probability(0.95, 4.9))
    assert abs(far - 0.05) < 0.005


def test_threshold_map_examples():
    zeros = np.zeros((2, 2))
    assert threshold_map(zeros, 0.0).all()
    assert not threshold_map(zeros, 0.1).any()
    assert threshold_map(np.array([0.3, 0.5]), 0.4).tolist() == [False, True]


def test_weighted_examples():
    assert weighted_sglr_mean(3.0, 3.0, 1.0) == 0.0
    assert weighted_sglr_mean(1.0, 4.0, 1.0) == pytest.approx(math.exp(1.5) * 2 * math.log(1.25), rel=1e-14)
    assert weighted_sglr_distance(1.0, 4.0, 1.0) == 0.0
    want = float(mpmath.log(2) * 2 * mpmath.log(mpmath.mpf(5) / 3))
    assert weighted_sglr_distance(1.0, 9.0, 1.0) == pytest.approx(want, rel=1e-14)
    assert weighted_sglr_distance(2.0, 2.0, 1.0) == 0.0
    assert weighted_sglr_distance(0.25, 0.5, 1.0) < 0.0
    assert np.isinf(weighted_sglr_mean(1e6, 4e6, 1.0))


def test_weighted_mean_ordering_follows_weight():
    a = np.array([1.0, 4.0, 16.0])
    w = weighted_sglr_mean(a, 4 * a, 1.0)
    assert np.all(np.diff(w) > 0)


def test_pair_detect_identical_images():
    img = np.random.default_rng(1).uniform(0.5, 2.0, (8, 8))
    res = pair_detect(ImageStack(np.stack([img, img]), 9.0), 1, 2)
    assert np.all(res.similarity == 0.0) and not res.mask.any()
    assert np.all(res.sign == 0) and np.all(res.magnitude == 0)


def _power_oracle(factor, enl, tau):
    # b / a of two Gamma(L, 1/L) variates scaled by factor is factor * F(2L, 2L)
    thr = threshold_from_probability(tau, enl)
    z = 2.0 * math.acosh(math.exp(thr / (2.0 * enl)))
    f = stats.f(2 * enl, 2 * enl)
    return f.sf(math.exp(z) / factor) + f.cdf(math.exp(-z) / factor)


@pytest.mark.parametrize("factor", [4.0, 10.0])
def test_pair_detect_power_matches_oracle(factor):
    # L = 1 images, 3x3 multilook (ENL 9); interior region pixels are exact Gamma(9)
    from sarchange.speckle import temporal_multilook

    prof = ChangeProfile((8, 120, 8, 120), "step", onset=2, factor=factor)
    sim = simulate_stack(np.ones((128, 128)), [prof], 2, 1.0, seed=31)
    stack = temporal_multilook(sim.stack(), 3)
    res = pair_detect(stack, 1, 2, tau=0.99)
    interior = np.zeros((128, 128), bool)
    interior[9:119, 9:119] = True
    p = _power_oracle(factor, 9.0, 0.99)
    n = interior.sum()
    # neighbouring pixels share looks, so allow 4 sigma of 9x the binomial variance
    assert abs(res.mask[interior].mean() - p) < 4 * math.sqrt(9 * p * (1 - p) / n)
    if factor == 10.0:
        assert res.mask[interior].mean() >= 0.95


def test_pair_detect_weighted_needs_threshold():
    stack = ImageStack(np.ones((2, 3, 3)) + np.arange(2)[:, None, None], 4.0)
    with pytest.raises(ParameterError):
        pair_detect(stack, 1, 2, weights="mean")
    res = pair_detect(stack, 1, 2, weights="distance", weight_threshold=-1.0)
    assert res.mask.all()
    with pytest.raises(ParameterError):
        pair_detect(stack, 1, 2, weights="bogus")
    with pytest.raises(InputError):
        pair_detect(stack, 0, 2)


def test_pair_detect_amplitude_domain():
    amp = np.stack([np.full((2, 2), 1.0), np.full((2, 2), 2.0)])
    res = pair_detect(ImageStack(amp, 4.0, domain=AMPLITUDE), 1, 2)
    assert res.similarity[0, 0] == pytest.approx(s_glr(1.0, 4.0, 4.0))


def test_monitor_constructed_truth():
    prof = ChangeProfile((1, 3, 1, 3), "step", onset=3, factor=4.0)
    maps, truth = inject_changes(np.ones((4, 4)), [prof], 5)
    steps = cumulative_monitor(ImageStack(maps, 9.0), reference=1)
    assert [s.t for s in steps] == [2, 3, 4, 5]
    assert not steps[0].signed_mask.any()
    for step in steps[1:]:
        np.testing.assert_array_equal(step.signed_mask != 0, truth[step.t - 1])
        assert np.all(step.signed_mask[truth[step.t - 1]] == 1)
        np.testing.assert_allclose(step.ratio[1, 1], 0.25)
    assert cumulative_monitor(ImageStack(maps[:1], 9.0), reference=1) == []
