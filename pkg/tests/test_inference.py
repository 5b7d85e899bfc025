import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from phmoe import emfit
from phmoe.moe import CovariateSchema
from phmoe.inference import (CoefficientTable, gating_inference, information_criteria,
                             fit_information_criteria, stars)


def _problem(rng, n=200, p=3, d=3):
    X = np.column_stack([np.ones(n), rng.normal(size=(n, d - 1))])
    B = rng.dirichlet(np.ones(p), size=n)
    w = rng.uniform(0.5, 2.0, size=n)
    res = emfit.rstep(B, X, w)
    assert res.converged
    return B, X, w, res.alpha


def test_binomial_logit_closed_form():
    n, m = 40, 13
    B = np.zeros((n, 2))
    B[:m, 1] = 1.0
    B[m:, 0] = 1.0
    X = np.ones((n, 1))
    alpha = emfit.rstep(B, X).alpha
    tab = gating_inference(B, X, alpha, labels=["(Intercept)"])
    assert tab.estimate[0, 0] == pytest.approx(np.log(m / (n - m)), abs=1e-10)
    assert tab.std_error[0, 0] == pytest.approx(np.sqrt(1 / m + 1 / (n - m)), rel=1e-10)
    assert not tab.ridge_stabilized


def test_duplicate_column_flags_missing(rng):
    n = 100
    x = rng.normal(size=n)
    X = np.column_stack([np.ones(n), x, x, rng.normal(size=n)])
    B = rng.dirichlet(np.ones(2), size=n)
    alpha = emfit.rstep(B, X).alpha
    tab = gating_inference(B, X, alpha)
    assert tab.ridge_stabilized
    np.testing.assert_array_equal(tab.missing[0], [False, True, True, False])
    assert np.all(np.isfinite(tab.std_error[0, [0, 3]]))
    assert "( )" in tab.format()


def _fd_hessian(f, x, h=1e-4):
    k = x.size
    H = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            ei, ej = np.eye(k)[i] * h, np.eye(k)[j] * h
            H[i, j] = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4 * h * h)
    return H


def test_standard_errors_match_finite_difference(rng):
    B, X, w, alpha = _problem(rng)
    p, d = alpha.shape

    def f(v):
        a = np.vstack([np.zeros((1, d)), v.reshape(p - 1, d)])
        return emfit.rstep_objective(a, B, X, w)

    H = _fd_hessian(f, alpha[1:].ravel())
    se_fd = np.sqrt(np.diag(np.linalg.inv(-H))).reshape(p - 1, d)
    tab = gating_inference(B, X, alpha, weights=w)
    np.testing.assert_allclose(tab.std_error, se_fd, rtol=1e-4)


def test_z_and_p_relations(rng):
    B, X, w, alpha = _problem(rng)
    tab = gating_inference(B, X, alpha, weights=w)
    np.testing.assert_allclose(tab.z_value, tab.estimate / tab.std_error, rtol=1e-10)
    np.testing.assert_allclose(tab.p_value, 2 * (1 - norm.cdf(np.abs(tab.z_value))),
                               rtol=1e-10, atol=1e-12)
    rows = tab.rows()
    assert len(rows) == tab.estimate.size
    assert rows[0]["state"] == 2


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_shift_invariance(seed):
    rng = np.random.default_rng(seed)
    B, X, w, alpha = _problem(rng, n=80)
    shift = rng.normal(size=alpha.shape[1])
    a = gating_inference(B, X, alpha, weights=w)
    b = gating_inference(B, X, alpha + shift, weights=w)
    np.testing.assert_allclose(b.estimate, a.estimate, atol=1e-10)
    np.testing.assert_allclose(b.std_error, a.std_error, rtol=1e-10)


def test_single_state_has_empty_table():
    tab = gating_inference(np.ones((5, 1)), np.ones((5, 1)), np.zeros((1, 1)))
    assert tab.estimate.shape == (0, 1)


def test_information_criteria_example():
    ll, dof, aic, bic = information_criteria(0.0, 1, np.e ** 2)
    assert (ll, dof) == (0.0, 1)
    assert aic == pytest.approx(2.0)
    assert bic == pytest.approx(2.0)


def test_fit_information_criteria():
    y = np.array([0.5, 1.0, 2.5])
    data = emfit.make_dataset(y)
    fit = emfit.fit(data, CovariateSchema(), config=emfit.FitConfig(p=1))
    ll, dof, aic, bic = fit_information_criteria(fit, data)
    assert dof == 1
    assert aic == pytest.approx(-2 * ll + 2)
    assert bic == pytest.approx(-2 * ll + np.log(3))


def test_stars():
    assert [stars(v) for v in (0.0001, 0.005, 0.03, 0.2, np.nan)] == ["***", "**", "*", "", ""]


def test_format_layout():
    tab = CoefficientTable(np.array([[1.0, -0.5]]), np.array([[0.1, 0.5]]), ["a", "b"])
    text = tab.format()
    assert "1.000 (0.100)***" in text
    assert "Signif. codes" in text.splitlines()[-1]
