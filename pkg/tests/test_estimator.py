import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acceptability.estimator import (
    batch_counts,
    d_i_of_s,
    d_matrix,
    empirical_frequency,
    rho_hat,
    rho_hat_batch,
    write_estimates_csv,
)
from acceptability.market import GBMScenario
from acceptability.oracle import exact_pipeline
from acceptability.risk import NormalShift, RiskSpec
from acceptability.sampler import CertificationError, SampleBank, TiltedBatch, ZeroMeasureError, build_bank
from acceptability.vcbound import plan_samples
from acceptability.weights import compute_constants


@pytest.fixture(scope="module")
def gbm_bank(gbm_weights):
    plan = plan_samples(gbm_weights, 0.5, 0.05).with_kappas({(0, 1): 20_000, (1, -1): 2_000})
    return build_bank(gbm_weights, plan, seed=3)


@pytest.fixture(scope="module")
def tree_bank(tree_weights):
    return build_bank(tree_weights, plan_samples(tree_weights, 0.1, 0.05), seed=17)


def test_zero_parameters_give_half(gbm_bank):
    b = gbm_bank[(0, 1)]
    f = empirical_frequency(b, (0, 0, 0))
    assert abs(f - 0.5) <= 4 * math.sqrt(0.25 / len(b))


def test_saturation(gbm_bank):
    # v_t(f_1) > 0 on every draw, so a huge s_1 beats any sampled z
    assert empirical_frequency(gbm_bank[(0, 1)], (1e6, 0, 0)) == 1.0
    assert empirical_frequency(gbm_bank[(0, 1)], (-1e6, 0, 0)) == 0.0


def test_ties_count_as_zero():
    b = TiltedBatch(0, 1, np.zeros((3, 1)), np.zeros(3, np.int16), np.array([1.0, 2.0, 0.5]), np.ones((3, 1)))
    assert empirical_frequency(b, (1.0,)) == pytest.approx(1 / 3)
    assert empirical_frequency(b, (2.0,)) == pytest.approx(2 / 3)


def test_empty_list_is_zero_measure():
    b = TiltedBatch(0, 1, np.zeros((0, 1)), np.zeros(0, np.int16), np.zeros(0), np.zeros((0, 1)))
    with pytest.raises(ZeroMeasureError):
        empirical_frequency(b, (1.0,))


def test_dimension_mismatch(gbm_weights, gbm_bank):
    with pytest.raises(ValueError):
        rho_hat(gbm_weights, gbm_bank, (1.0, 2.0))
    with pytest.raises(ValueError):
        rho_hat_batch(gbm_weights, gbm_bank, np.zeros((0, 3)))


def test_inactive_measure_is_exact(gbm_weights, gbm_bank):
    assert d_i_of_s(gbm_weights, gbm_bank, 2, (0, 0, 0)) == 0.2
    assert d_i_of_s(gbm_weights, gbm_bank, 2, (3.0, -1.0, 7.0)) == 0.2


def test_single_measure_reduction():
    w = compute_constants(GBMScenario(horizon=2, s0=1.0), RiskSpec((NormalShift(1.0),), (0.7,)))
    assert w.pairs() == [(0, 1)]
    bank = build_bank(w, plan_samples(w, 0.5, 0.05).with_kappas({(0, 1): 1000}), seed=0)
    s = (0.4,)
    freq = empirical_frequency(bank[(0, 1)], s)
    assert rho_hat(w, bank, s).rho_hat == pytest.approx(-w.d_plus[0] * freq + 0.7 - w.c[0], abs=1e-15)


def test_missing_pair_is_certification_error(gbm_weights, gbm_bank):
    partial = SampleBank(gbm_bank.plan, gbm_bank.seed, gbm_bank.eta, {(0, 1): gbm_bank[(0, 1)]})
    with pytest.raises(CertificationError):
        rho_hat(gbm_weights, partial, (0, 0, 0))


def test_estimate_invariants(gbm_weights, gbm_bank):
    est = rho_hat(gbm_weights, gbm_bank, (0.05, 9.65, 0.0))
    assert est.rho_hat == max(est.per_i) == est.per_i[est.argmax_i]
    assert est.certificate.aleph == 2
    assert est.certificate.failure_probability == pytest.approx(0.1)
    assert abs(est.rho_hat - 0.41) <= 0.5


def test_batch_equals_pointwise(gbm_weights, gbm_bank):
    r = np.random.default_rng(0)
    grid = np.column_stack([r.uniform(-1, 1, 50), r.uniform(0, 20, 50), np.zeros(50)])
    grid[::7, 0] = 0.0  # some rows with a zero coordinate exercise the column skipping
    batch = rho_hat_batch(gbm_weights, gbm_bank, grid)
    for row, est in zip(grid, batch):
        assert est == rho_hat(gbm_weights, gbm_bank, row)


def test_workers_and_chunking_do_not_change_counts(gbm_bank):
    grid = np.random.default_rng(1).normal(size=(30, 3))
    b = gbm_bank[(0, 1)]
    ref = batch_counts(b, grid)
    assert np.array_equal(ref, batch_counts(b, grid, workers=3, chunk=999))


def test_permutation_invariance(gbm_weights, gbm_bank):
    perm = {}
    for pair, b in gbm_bank.batches.items():
        idx = np.random.default_rng(2).permutation(len(b))
        perm[pair] = TiltedBatch(b.i, b.sign, b.drivers[idx], b.t[idx], b.z[idx], b.features[idx])
    shuffled = SampleBank(gbm_bank.plan, gbm_bank.seed, gbm_bank.eta, perm)
    grid = np.random.default_rng(3).normal(size=(20, 3)) * (1, 10, 1)
    assert rho_hat_batch(gbm_weights, gbm_bank, grid) == rho_hat_batch(gbm_weights, shuffled, grid)


@settings(max_examples=30, deadline=None)
@given(st.floats(-2, 2), st.floats(0.0, 3.0))
def test_frequency_monotone_along_positive_rays(gbm_bank, s1, step):
    b = gbm_bank[(0, 1)]  # only feature 1 is nonzero here and it is positive
    assert empirical_frequency(b, (s1 + step, 0, 0)) >= empirical_frequency(b, (s1, 0, 0))


def test_tree_frequencies_within_relative_precision(tree_case, tree_weights, tree_bank):
    ex = exact_pipeline(*tree_case)
    axis = np.linspace(-10, 10, 10)
    grid = np.array([(a, b) for a in axis for b in axis])
    for e in tree_bank.plan.entries:
        b = tree_bank[(e.i, e.sign)]
        freqs = batch_counts(b, grid) / len(b)
        exact = np.array([ex.tilted_prob(e.i, e.sign, s) for s in grid])
        assert np.max(np.abs(freqs - exact)) <= e.relative_epsilon


def test_tree_d_values_within_two_epsilon(tree_case, tree_weights, tree_bank):
    ex = exact_pipeline(*tree_case)
    grid = np.random.default_rng(4).uniform(-10, 10, size=(40, 2))
    d = d_matrix(tree_weights, tree_bank, grid)
    for row, s in zip(d, grid):
        np.testing.assert_array_less(np.abs(row - ex.terms(s)), 2 * 0.1)


def test_estimates_csv(gbm_weights, gbm_bank, tmp_path):
    est = rho_hat_batch(gbm_weights, gbm_bank, [(0, 0, 0), (0.05, 9.65, 0)])
    path = tmp_path / "est.csv"
    write_estimates_csv(est, path)
    rows = path.read_text().splitlines()
    assert rows[0] == "s_1,s_2,s_3,D_1,D_2,D_3,rho_hat"
    assert len(rows) == 3
