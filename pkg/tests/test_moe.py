import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phmoe import moe, phcore
from phmoe import transforms as tf
from phmoe.errors import SchemaError
from phmoe.moe import CATEGORICAL, Column, CovariateSchema, PhMoeModel
from conftest import random_subintensity

GROUPS = CovariateSchema((Column("group", CATEGORICAL, ("A", "B", "C", "D")),))


def test_build_design_examples():
    np.testing.assert_array_equal(GROUPS.build_design({"group": "A"}), [1, 0, 0, 0])
    np.testing.assert_array_equal(GROUPS.build_design({"group": "C"}), [1, 0, 1, 0])
    s = CovariateSchema((Column("x"), Column("g", CATEGORICAL, ("a", "b"))))
    np.testing.assert_array_equal(s.build_design({"x": 2.5, "g": "b"}), [1, 2.5, 1])
    assert s.labels() == ["(Intercept)", "x", "gb"]


def test_build_design_errors():
    with pytest.raises(SchemaError) as exc:
        GROUPS.build_design({"group": "E"})
    assert exc.value.column == "group"
    with pytest.raises(SchemaError):
        GROUPS.build_design({})


def test_standardized_column_applies_map():
    s = CovariateSchema((Column("x", center=10.0, scale=2.0),))
    np.testing.assert_allclose(s.build_design({"x": 14.0}), [1.0, 2.0])
    assert CovariateSchema.from_list(s.to_list()) == s


def test_softmax_examples():
    np.testing.assert_allclose(moe.softmax_pi([1.0, 2.0], np.zeros((4, 2))), [0.25] * 4)
    alpha = np.array([[0.0], [np.log(3)]])
    np.testing.assert_allclose(moe.softmax_pi([1.0], alpha), [0.25, 0.75], rtol=1e-15)
    assert moe.log_odds([1.0], alpha, 1, 0) == pytest.approx(np.log(3))
    assert moe.log_odds([1.0], alpha, 1, 1) == 0.0
    with pytest.raises(ValueError):
        moe.softmax_pi([1.0], np.array([[0.0], [np.inf]]))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), big=st.floats(-700, 700))
def test_softmax_properties(seed, big):
    rng = np.random.default_rng(seed)
    p, d = int(rng.integers(2, 6)), int(rng.integers(1, 4))
    alpha = rng.normal(size=(p, d))
    alpha[-1, 0] = big
    x = np.r_[1.0, rng.normal(size=d - 1)]
    pi = moe.softmax_pi(x, alpha)
    assert abs(pi.sum() - 1) < 1e-14 and np.all(pi >= 0)
    shifted = moe.softmax_pi(x, alpha + rng.normal(size=d))
    np.testing.assert_allclose(shifted, pi, atol=1e-15 * max(1.0, abs(big)))
    np.testing.assert_allclose(moe.softmax_pi(x, moe.normalize_alpha(alpha)), pi, atol=1e-15)
    for k in range(p):
        for j in range(p):
            if pi[k] > 1e-300 and pi[j] > 1e-300:
                lo = np.log(pi[k]) - np.log(pi[j])
                assert moe.log_odds(x, alpha, k, j) == pytest.approx(lo, abs=1e-12 * max(1, abs(lo)))


def test_conditional_mean_examples():
    empty = CovariateSchema()
    m = PhMoeModel(empty, np.zeros((1, 1)), [[-0.5]])
    assert moe.conditional_mean(m, [1.0]) == pytest.approx(2.0)
    m = PhMoeModel(empty, np.zeros((2, 1)), np.diag([-1.0, -1 / 3]))
    assert moe.conditional_mean(m, [1.0]) == pytest.approx(2.0)
    m = PhMoeModel(empty, np.zeros((1, 1)), [[-1.0]], tf.Transform(tf.WEIBULL, 2.0))
    assert moe.conditional_mean(m, [1.0]) == pytest.approx(0.886226925, rel=1e-8)


def test_conditional_mean_is_mixture(rng):
    T = random_subintensity(rng, 3)
    alpha = rng.normal(size=(3, 4))
    for tr in (tf.Transform(), tf.Transform(tf.WEIBULL, 0.8), tf.Transform(tf.PARETO, 1.0),
               tf.Transform(tf.SEMI_WEIBULL, 1.4, 0.7)):
        if tr.family == tf.PARETO and phcore.tail_report([1 / 3] * 3, T).eta <= 1:
            T = T * 2.0 / phcore.tail_report([1 / 3] * 3, T).eta
        model = PhMoeModel(GROUPS, alpha, T, tr)
        x = GROUPS.build_design({"group": "B"})
        pi = model.pi(x)
        parts = [phcore.iph_mean(phcore.IphDistribution.make(np.eye(3)[k], T, tr)) for k in range(3)]
        assert moe.conditional_mean(model, x) == pytest.approx(pi @ parts, rel=1e-8)


def test_model_validation_and_dof(rng):
    T = random_subintensity(rng, 5)
    cols = tuple(Column(f"x{j}") for j in range(20))
    schema = CovariateSchema(cols)
    model = PhMoeModel(schema, np.zeros((5, 21)), T, tf.Transform(tf.PARETO, 1.0))
    assert schema.d == 21
    assert model.dof() == 110
    with pytest.raises(ValueError):
        PhMoeModel(schema, np.zeros((4, 21)), T)
    alpha = rng.normal(size=(5, 21))
    m = PhMoeModel(schema, alpha, T)
    np.testing.assert_array_equal(m.alpha[0], np.zeros(21))
