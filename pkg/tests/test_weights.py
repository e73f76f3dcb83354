import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acceptability.market import GBMScenario, PathBatch, TreeScenario
from acceptability.oracle import exact_pipeline
from acceptability.risk import NormalShift, ReferenceMeasure, RiskSpec, TreeMeasure
from acceptability.weights import (
    LOGISTIC,
    NORMAL,
    ConfigurationError,
    MissingEvaluatorError,
    ParametricStrategy,
    StrategyParams,
    compute_constants,
    describe_strategy,
    expected_weight,
    get_eta,
    lambda_batch,
    lambda_process,
    parametric_strategy,
    strategy_from_params,
    v_batch,
    v_weight,
)

E = math.e
drivers3 = st.lists(st.floats(-3, 3), min_size=3, max_size=3)


@settings(max_examples=50, deadline=None)
@given(drivers3)
def test_closed_forms_of_the_three_weights(gbm, gbm_spec, z):
    path = gbm.batch(np.array([z])).path(0)
    for t in range(3):
        v1 = 4 * (E - 1) * math.exp(2 * sum(z[:t]) - t)
        v2 = -4 * (E - 1) * math.exp(-t - 1)
        assert v_weight(gbm, gbm_spec, 0, path, t) == pytest.approx(v1, rel=1e-12)
        assert v_weight(gbm, gbm_spec, 1, path, t) == pytest.approx(v2, rel=1e-12)
        assert v_weight(gbm, gbm_spec, 2, path, t) == 0.0


def test_weights_are_adapted(gbm, gbm_spec):
    a = gbm.batch(np.array([[0.3, -1.0, 2.0]])).path(0)
    b = gbm.batch(np.array([[0.3, 5.0, -7.0]])).path(0)
    assert v_weight(gbm, gbm_spec, 0, a, 1) == v_weight(gbm, gbm_spec, 0, b, 1)


def test_three_period_constants(gbm_weights):
    w = gbm_weights
    assert w.d_plus[0] == pytest.approx(76.34, abs=0.01)
    assert w.d_minus[1] == pytest.approx(3.80, abs=0.01)
    assert (w.d_minus[0], w.d_plus[1], w.d_plus[2], w.d_minus[2]) == (0.0, 0.0, 0.0, 0.0)
    assert w.c == (0.0, 0.0, 0.0)
    assert w.aleph == 2
    assert w.active == (0, 1)
    assert w.pairs() == [(0, 1), (1, -1)]
    assert w.certified


def test_expected_weight_closed_form(gbm, gbm_spec):
    for t in range(3):
        ev = expected_weight(gbm, gbm_spec.measures[0], t)
        assert ev == pytest.approx(4 * (E - 1) * E**t, rel=1e-12)
        assert ev == pytest.approx(6.87 * E**t, abs=0.01 * E**t)


def test_nested_monte_carlo_agrees_with_closed_form(gbm, gbm_spec):
    r = np.random.default_rng(11)
    n = 200_000
    for _ in range(10):
        t = int(r.integers(0, 3))
        i = int(r.integers(0, 3))
        prefix = r.normal(size=t)
        tail = r.standard_normal((n, 3 - t))
        z = np.hstack([np.broadcast_to(prefix, (n, t)), tail])
        paths = gbm.batch(z)
        f = gbm_spec.measures[i].density(gbm, z)
        x = (paths.prices[:, t + 1] - paths.prices[:, t]) * f
        closed = v_batch(gbm, gbm_spec, i, paths.take([0]), t)[0]
        assert abs(x.mean() - closed) <= 4 * x.std(ddof=1) / math.sqrt(n) + 1e-12


def test_degenerate_bounds_give_no_weights():
    sc = GBMScenario(horizon=3, s0=4.0, lower=0.5, upper=0.5)
    w = compute_constants(sc, RiskSpec((NormalShift(1.0), NormalShift(-1.0)), (1.0, 1.0)))
    assert w.aleph == 0 and w.active == ()
    tree = TreeScenario(horizon=2, s0=1.0, lower=0.2, upper=0.2)
    assert compute_constants(tree, RiskSpec((ReferenceMeasure(),), (0.0,))).aleph == 0


def test_tree_constants_match_enumeration(tree_case, tree_weights):
    ex = exact_pipeline(*tree_case)
    np.testing.assert_allclose(tree_weights.c, ex.c, atol=1e-13)
    np.testing.assert_allclose(tree_weights.d_plus, ex.d_plus, atol=1e-13)
    np.testing.assert_allclose(tree_weights.d_minus, ex.d_minus, atol=1e-13)
    assert tree_weights.aleph == ex.aleph == 3


def test_no_route_is_a_configuration_error():
    sc = GBMScenario(horizon=2, s0=1.0, upper=lambda prefix, t: 1.0 + 0.0 * prefix.sum(axis=1))
    spec = RiskSpec((NormalShift(0.5),), (0.0,))
    with pytest.raises(ConfigurationError):
        compute_constants(sc, spec)
    w = compute_constants(sc, spec, budget=50_000, rng=np.random.default_rng(0))
    assert not w.certified
    assert w.provenance[0]["route"] == "monte-carlo" and w.provenance[0]["std_error"] > 0
    exact = compute_constants(GBMScenario(horizon=2, s0=1.0), spec)
    assert abs(w.d_plus[0] - exact.d_plus[0]) <= 5 * w.provenance[0]["std_error"]


def test_missing_evaluator(gbm):
    spec = RiskSpec((TreeMeasure((1.0,)),), (0.0,))
    path = gbm.batch(np.zeros((1, 3))).path(0)
    with pytest.raises(MissingEvaluatorError):
        v_weight(gbm, spec, 0, path, 0)


def test_lambda_zero_and_dimension(gbm_weights, gbm):
    path = gbm.batch(np.ones((1, 3))).path(0)
    for t in range(3):
        assert lambda_process(gbm_weights, StrategyParams((0, 0, 0)), path, t) == 0.0
    with pytest.raises(ValueError):
        lambda_process(gbm_weights, StrategyParams((1.0, 2.0)), path, 0)


@settings(max_examples=50, deadline=None)
@given(drivers3, st.floats(-2, 2), st.floats(-20, 20), st.floats(-5, 5))
def test_lambda_closed_form(gbm_weights, gbm, z, s1, s2, s3):
    path = gbm.batch(np.array([z])).path(0)
    for t in range(3):
        expect = 4 * (E - 1) * (s1 * (path.prices[t] / 4.0) ** 2 - s2 * math.exp(-t - 1))
        got = lambda_process(gbm_weights, StrategyParams((s1, s2, s3)), path, t)
        assert got == pytest.approx(expect, rel=1e-9, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(drivers3, st.lists(st.floats(-10, 10), min_size=3, max_size=3), st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_lambda_is_additive(gbm_weights, gbm, z, s, u):
    path = gbm.batch(np.array([z])).path(0)
    both = tuple(a + b for a, b in zip(s, u))
    for t in range(3):
        lhs = lambda_process(gbm_weights, StrategyParams(both), path, t)
        rhs = lambda_process(gbm_weights, StrategyParams(tuple(s)), path, t) + lambda_process(
            gbm_weights, StrategyParams(tuple(u)), path, t
        )
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-9)


def test_zero_parameters_hold_half(gbm_weights, gbm):
    path = gbm.batch(np.array([[0.3, 0.1, -2.0]])).path(0)
    np.testing.assert_array_equal(strategy_from_params(gbm_weights, StrategyParams((0, 0, 0)), path), [0.5] * 3)


def test_huge_lambda_saturates_at_upper_bound(gbm_weights, gbm):
    path = gbm.batch(np.zeros((1, 3))).path(0)
    xi = strategy_from_params(gbm_weights, StrategyParams((1e6, 0, 0)), path)
    np.testing.assert_allclose(xi, 1.0)
    xi = strategy_from_params(gbm_weights, StrategyParams((0, 1e6, 0)), path)
    np.testing.assert_allclose(xi, 0.0, atol=1e-300)


def test_strategy_closed_form_at_reported_optimum(gbm_weights, gbm):
    from scipy.stats import norm

    path = gbm.batch(np.array([[0.4, -0.2, 1.0]])).path(0)
    xi = strategy_from_params(gbm_weights, StrategyParams((0.05, 9.65, 0.0)), path)
    for t in range(3):
        lam = 4 * (E - 1) * (0.05 * (path.prices[t] / 4) ** 2 - 9.65 * math.exp(-t - 1))
        assert xi[t] == pytest.approx(norm.cdf(lam), rel=1e-10, abs=1e-300)
    text = describe_strategy(gbm_weights, StrategyParams((0.05, 9.65, 0.0)))
    assert "0.05*v_t(f_1)" in text and "9.65*v_t(f_2)" in text


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=2, max_size=2), st.sampled_from(["normal", "logistic"]))
def test_strategy_respects_bounds(tree_weights, tree_case, s, eta):
    sc, _ = tree_case
    paths = sc.batch(sc.all_drivers())
    xi = ParametricStrategy(tree_weights, StrategyParams(tuple(s), get_eta(eta))).holdings(paths)
    assert np.all(xi >= sc.lower) and np.all(xi <= sc.upper)


@settings(max_examples=30, deadline=None)
@given(st.floats(-20, 20), st.floats(0, 5))
def test_strategy_monotone_in_lambda(gbm_weights, gbm, s1, step):
    paths = gbm.batch(np.array([[0.1, 0.2, 0.3]]))
    lo = parametric_strategy(gbm_weights, (s1, 0, 0)).holdings(paths)
    hi = parametric_strategy(gbm_weights, (s1 + step, 0, 0)).holdings(paths)
    assert np.all(hi >= lo)  # v_t(f_1) > 0, so lambda grows with s_1


def test_eta_choices():
    x = np.linspace(-30, 30, 101)
    for eta in (NORMAL, LOGISTIC):
        c = eta.cdf(x)
        assert np.all(np.diff(c) >= 0) and c[0] < 1e-12 and c[-1] > 1 - 1e-12
        assert eta.cdf(0.0) == 0.5
    with pytest.raises(ConfigurationError):
        get_eta("cauchy")


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=1, max_size=4))
def test_aleph_at_most_twice_m(shifts):
    spec = RiskSpec(tuple(NormalShift(s) for s in shifts), (0.0,) * len(shifts))
    w = compute_constants(GBMScenario(horizon=3, s0=1.0), spec)
    assert w.aleph <= 2 * spec.m


def test_lambda_batch_matches_single_path(gbm_weights, gbm):
    batch = gbm.batch(np.random.default_rng(0).normal(size=(6, 3)))
    params = StrategyParams((0.3, -2.0, 4.0))
    for t in range(3):
        vec = lambda_batch(gbm_weights, params, batch, t)
        for k in range(6):
            assert vec[k] == lambda_process(gbm_weights, params, batch.path(k), t)
