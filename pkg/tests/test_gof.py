import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import kstest

from phmoe import gof, phcore
from phmoe import transforms as tf
from phmoe.data import Dataset
from phmoe.moe import CovariateSchema, PhMoeModel
from phmoe.simulate import apply_censoring, Censoring, sample_responses
from conftest import random_subintensity

EMPTY = CovariateSchema()
KS_1PCT = 1.63  # asymptotic 1% critical value of sqrt(n) D_n


def _model(T, transform=None, alpha=None):
    T = np.asarray(T, dtype=float)
    if alpha is None:
        alpha = np.zeros((T.shape[0], 1))
    return PhMoeModel(EMPTY, alpha, T, transform or tf.Transform())


def _simulate(model, n, seed):
    y = sample_responses(model, np.ones((n, 1)), np.random.default_rng(seed))
    return Dataset.exact(y)


def test_residual_of_unit_exponential():
    res = gof.residuals(_model([[-1.0]]), Dataset.exact(np.array([2.0])))
    assert res.r[0] == pytest.approx(2.0, rel=1e-14)
    assert res.delta[0] == 1


def test_residual_at_median(rng):
    model = _model(random_subintensity(rng, 3), tf.Transform(tf.WEIBULL, 1.7),
                   alpha=np.array([[0.0], [0.4], [-1.0]]))
    med = phcore.iph_quantile(model.conditional(np.ones((1, 1))[0]), 0.5)
    res = gof.residuals(model, Dataset.exact(np.array([med])))
    assert res.r[0] == pytest.approx(np.log(2), abs=1e-9)


def test_residuals_follow_unit_exponential(rng):
    model = _model(random_subintensity(rng, 3), alpha=np.array([[0.0], [1.0], [-0.5]]))
    data = _simulate(model, 10**4, 5)
    res = gof.residuals(model, data)
    assert abs(res.r.mean() - 1.0) < 0.05
    assert kstest(res.r, "expon").statistic < KS_1PCT / np.sqrt(res.r.size)
    passed, D, pv = gof.uniformity_check(res)
    assert passed and D < KS_1PCT / 100


def test_residuals_censoring_handling():
    model = _model([[-1.0]])
    data = Dataset(np.array([1.0, 2.0, 3.0]), np.array([1.0, np.inf, 4.0]), np.ones((3, 1)))
    with pytest.warns(RuntimeWarning, match="1 interval-censored"):
        res = gof.residuals(model, data)
    np.testing.assert_allclose(res.r, [1.0, 2.0])
    np.testing.assert_array_equal(res.delta, [1, 0])
    assert res.excluded == 1


def test_km_without_censoring_is_empirical_survival(rng):
    r = rng.exponential(size=50)
    curve = gof.kaplan_meier((r, np.ones(50, dtype=int)))
    ecdf = np.searchsorted(np.sort(r), curve.times, side="right") / r.size
    np.testing.assert_allclose(curve.survival, 1 - ecdf, atol=1e-14)
    # right-continuous steps between the points
    assert curve(np.sort(r)[0] - 1e-9) == 1.0
    assert curve(np.sort(r)[2]) == pytest.approx(47 / 50)


def test_km_all_censored():
    curve = gof.kaplan_meier((np.array([0.5, 1.0, 2.0]), np.zeros(3, dtype=int)))
    np.testing.assert_array_equal(curve.survival, 1.0)
    np.testing.assert_array_equal(curve.variance, 0.0)


def test_km_textbook_example():
    # values 1..6, censored at 2 and 5
    r = np.arange(1.0, 7.0)
    delta = np.array([1, 0, 1, 1, 0, 1])
    curve = gof.kaplan_meier((r, delta))
    s1, s3 = 5 / 6, 5 / 6 * 3 / 4
    s4 = s3 * 2 / 3
    np.testing.assert_allclose(curve.survival, [s1, s1, s3, s4, s4, 0.0], atol=1e-12)
    np.testing.assert_array_equal(curve.at_risk, [6, 5, 4, 3, 2, 1])
    gw = np.cumsum([1 / 30, 0, 1 / 12, 1 / 6, 0, 0])
    np.testing.assert_allclose(curve.variance, np.array([s1, s1, s3, s4, s4, 0.0]) ** 2 * gw,
                               atol=1e-12)
    assert np.all(curve.lower >= 0) and np.all(curve.upper <= 1)


def test_km_ties_grouped():
    r = np.array([2.0, 2.0, 3.0, 3.0, 5.0])
    delta = np.array([1, 1, 1, 0, 1])
    curve = gof.kaplan_meier((r, delta))
    np.testing.assert_allclose(curve.times, [2.0, 3.0, 5.0])
    np.testing.assert_array_equal(curve.events, [2, 1, 1])
    np.testing.assert_allclose(curve.survival, [3 / 5, 3 / 5 * 2 / 3, 0.0], atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_greenwood_flat_between_events(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 40))
    r = rng.exponential(size=n).round(1)
    delta = rng.integers(0, 2, size=n)
    curve = gof.kaplan_meier((r, delta))
    first = np.flatnonzero(curve.events > 0)
    if first.size:
        assert np.all(curve.variance[:first[0]] == 0)
    # the variance only moves at event times
    flat = np.flatnonzero(curve.events[1:] == 0) + 1
    np.testing.assert_array_equal(curve.variance[flat], curve.variance[flat - 1])


def test_km_empty_raises():
    with pytest.raises(ValueError):
        gof.kaplan_meier((np.array([]), np.array([], dtype=int)))


def test_pp_single_observation():
    model = _model([[-1.0]])
    pts = gof.pp_points(model, Dataset.exact(np.array([1.0])))
    np.testing.assert_allclose(pts, [[0.5, 1 - np.exp(-1.0)]])


def test_pp_perfect_model_within_band(rng):
    model = _model(random_subintensity(rng, 2), tf.Transform(tf.PARETO, 2.0))
    data = _simulate(model, 5000, 8)
    pts = gof.pp_points(model, data)
    assert np.all(np.diff(pts[:, 1]) >= 0)
    assert np.abs(pts[:, 0] - pts[:, 1]).max() < KS_1PCT / np.sqrt(5000)


def test_pp_too_light_tail_departs_upward():
    # Lomax data against an exponential of the same median
    truth = _model([[-2.0]], tf.Transform(tf.PARETO, 1.0))
    data = _simulate(truth, 5000, 9)
    wrong = _model([[-np.log(2) / (np.sqrt(2) - 1)]])
    pts = gof.pp_points(wrong, data)
    upper = pts[:, 0] > 0.9
    assert np.mean(pts[upper, 1] - pts[upper, 0]) > 0


def test_pp_invariant_under_transform(rng):
    T = random_subintensity(rng, 3)
    ph = _model(T)
    iph = _model(T, tf.Transform(tf.WEIBULL, 0.6))
    z = _simulate(ph, 300, 4).low
    a = gof.pp_points(ph, Dataset.exact(z))
    b = gof.pp_points(iph, Dataset.exact(tf.g_forward(iph.transform, z)))
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_pp_skips_censored_rows():
    model = _model([[-1.0]])
    data = apply_censoring(Dataset.exact(np.array([0.5, 1.0, 3.0])), Censoring("right", 2.0))
    assert gof.pp_points(model, data).shape == (2, 2)


def test_hill_pareto_sample():
    u = np.random.default_rng(2).random(10**5)
    x = (1 - u) ** (-1 / 2.0)
    ks, H = gof.hill_estimator(x, [1000])
    assert ks[0] == 1000
    assert abs(H[0] - 0.5) < 0.05


def test_hill_k_one_and_scale_invariance(rng):
    x = rng.pareto(1.5, size=200) + 1
    ks, H = gof.hill_estimator(x)
    s = np.sort(x)
    assert H[0] == pytest.approx(np.log(s[-1] / s[-2]), rel=1e-14)
    _, H7 = gof.hill_estimator(7 * x)
    np.testing.assert_allclose(H7, H, atol=1e-12)
    assert ks[-1] == x.size - 2


def test_hill_rejects_bad_input():
    with pytest.raises(ValueError):
        gof.hill_estimator(np.array([1.0, 0.0, 2.0, 3.0]))
    with pytest.raises(ValueError):
        gof.hill_estimator(np.array([1.0, 2.0, 3.0]), [2])


def test_uniformity_requires_events():
    sample = gof.ResidualSample(np.array([0.3]), np.array([0]))
    with pytest.raises(ValueError):
        gof.uniformity_check(sample)


def test_no_warning_for_exact_data():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        gof.residuals(_model([[-1.0]]), Dataset.exact(np.array([1.0, 2.0])))
