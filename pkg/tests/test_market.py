import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acceptability.market import (
    ConstraintError,
    DriverPath,
    FixedHoldings,
    GBMScenario,
    TreeScenario,
    UnsupportedKindError,
    check_holdings,
    enumerate_paths,
    sample_path,
    sample_paths,
    wealth_increment,
)


def test_gbm_zero_drivers_give_deterministic_drift(gbm):
    path = gbm.batch(np.zeros((1, 3))).path(0)
    expected = 4 * np.exp(-0.5 * np.arange(4))
    np.testing.assert_allclose(path.prices, expected, rtol=1e-15)


def test_single_branch_tree_has_one_certain_path():
    sc = TreeScenario(horizon=3, s0=2.0, factors=(1.0,), probs=(1.0,))
    paths = enumerate_paths(sc)
    assert len(paths) == 1
    assert paths[0][1] == 1.0
    np.testing.assert_array_equal(paths[0][0].prices, [2.0] * 4)


def test_gbm_price_is_martingale(gbm):
    batch = sample_paths(gbm, np.random.default_rng(0), 100_000)
    s3 = batch.prices[:, 3]
    se = s3.std(ddof=1) / np.sqrt(len(s3))
    assert abs(s3.mean() - 4.0) < 4 * se


def test_martingale_at_every_date(gbm):
    batch = sample_paths(gbm, np.random.default_rng(1), 100_000)
    for t in range(4):
        col = batch.prices[:, t]
        assert abs(col.mean() - 4.0) <= 4 * col.std(ddof=1) / np.sqrt(len(col)) + 1e-12


def test_same_seed_same_path(gbm):
    a = sample_path(gbm, np.random.default_rng(7))
    b = sample_path(gbm, np.random.default_rng(7))
    assert np.array_equal(a.drivers, b.drivers) and np.array_equal(a.prices, b.prices)


def test_zero_strategy_has_zero_wealth(gbm):
    path = sample_path(gbm, np.random.default_rng(2))
    assert wealth_increment(path, [0, 0, 0], gbm) == 0.0


def test_one_period_identity():
    path = DriverPath([0.0], [4.0, 5.0])
    assert wealth_increment(path, [1.0]) == 1.0


def test_full_holding_telescopes(gbm):
    path = sample_path(gbm, np.random.default_rng(3))
    w = wealth_increment(path, [1, 1, 1], gbm)
    assert w == pytest.approx(path.prices[-1] - path.prices[0], rel=1e-12)


def test_bound_violation_names_the_period(gbm):
    path = sample_path(gbm, np.random.default_rng(4))
    with pytest.raises(ConstraintError) as err:
        wealth_increment(path, [0.5, 1.5, 0.5], gbm)
    assert err.value.t == 1
    assert "t=1" in str(err.value)


def test_prefix_dependent_bounds_are_checked():
    def upper(prefix, t):
        return 1.0 + prefix.sum(axis=1) if t else np.ones(prefix.shape[0])

    sc = TreeScenario(horizon=2, s0=1.0, lower=0.0, upper=upper, factors=(1.1, 0.9), probs=(0.5, 0.5))
    batch = sc.batch(sc.all_drivers())
    check_holdings(sc, batch, np.array([[1, 1], [1, 1], [1, 2], [1, 2]], dtype=float))
    with pytest.raises(ConstraintError):
        check_holdings(sc, batch, np.array([[1, 1.5]] * 4))


def test_enumerate_two_period_tree():
    sc = TreeScenario(horizon=2, s0=1.0, factors=(1.1, 0.9), probs=(0.3, 0.7))
    paths = enumerate_paths(sc)
    assert len(paths) == 4
    assert sum(p for _, p in paths) == pytest.approx(1.0, abs=1e-12)


def test_enumerate_one_period():
    sc = TreeScenario(horizon=1, s0=10.0, factors=(1.2, 0.8), probs=(0.5, 0.5))
    (up, pu), (down, pd) = enumerate_paths(sc)
    assert (pu, pd) == (0.5, 0.5)
    assert up.prices[-1] == pytest.approx(12.0) and down.prices[-1] == pytest.approx(8.0)


def test_enumerate_three_periods():
    assert len(enumerate_paths(TreeScenario(horizon=3, s0=1.0))) == 8


def test_enumerate_rejects_continuous(gbm):
    with pytest.raises(UnsupportedKindError):
        enumerate_paths(gbm)


def test_scenario_validation():
    with pytest.raises(ValueError):
        GBMScenario(horizon=0, s0=1.0)
    with pytest.raises(ValueError):
        GBMScenario(horizon=1, s0=-1.0)
    with pytest.raises(ValueError):
        GBMScenario(horizon=1, s0=1.0, lower=1.0, upper=0.0)
    with pytest.raises(ValueError):
        TreeScenario(horizon=1, s0=1.0, factors=(1.1, 0.9), probs=(0.5, 0.6))


def test_fixed_holdings_shape(gbm):
    batch = sample_paths(gbm, np.random.default_rng(0), 5)
    assert FixedHoldings((0.1, 0.2, 0.3)).holdings(batch).shape == (5, 3)
    with pytest.raises(ValueError):
        FixedHoldings((0.1,)).holdings(batch)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_prices_consistent_with_prefix(z):
    sc = GBMScenario(horizon=3, s0=4.0, drift=0.1, vol=0.7)
    prices = sc.batch(np.array([z])).prices[0]
    assert sc.price_fn([]) == 4.0
    for t in range(4):
        assert sc.price_fn(z[:t]) == pytest.approx(prices[t], rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 3))
def test_tree_probabilities_sum_to_one(horizon, branching):
    probs = np.arange(1, branching + 1, dtype=float)
    probs /= probs.sum()
    sc = TreeScenario(horizon=horizon, s0=1.0, factors=tuple(np.linspace(0.8, 1.2, branching)), probs=tuple(probs))
    p = sc.path_probs()
    assert np.all(p >= 0)
    assert abs(p.sum() - 1.0) <= 1e-12
    assert np.array_equal(sc.path_index(sc.all_drivers()), np.arange(sc.n_paths))
