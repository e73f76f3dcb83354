import math

import numpy as np
import pytest
from scipy import stats

from acceptability.market import GBMScenario
from acceptability.oracle import exact_pipeline
from acceptability.risk import NormalShift, RiskSpec
from acceptability.sampler import (
    CertificationError,
    ZeroMeasureError,
    build_bank,
    config_key,
    export_csv,
    load_bank,
    sample_tilted,
    save_bank,
    tree_envelope,
)
from acceptability.vcbound import plan_samples
from acceptability.weights import compute_constants, v_weight


def _cell_counts(batch, sc):
    cells = sc.path_index(batch.drivers) * sc.horizon + batch.t.astype(np.int64)
    return np.bincount(cells, minlength=sc.n_paths * sc.horizon)


def _chi2_pvalue(counts, probs):
    keep = probs > 0
    assert counts[~keep].sum() == 0
    return stats.chisquare(counts[keep], counts.sum() * probs[keep]).pvalue


def test_up_measure_period_marginal(gbm_weights):
    b = sample_tilted(gbm_weights, 0, 1, 100_000, np.random.default_rng(0))
    p = np.exp(np.arange(3)) / np.exp(np.arange(3)).sum()
    freq = np.bincount(b.t, minlength=3) / len(b)
    se = np.sqrt(p * (1 - p) / len(b))
    assert np.all(np.abs(freq - p) <= 4 * se)


def test_up_measure_tilts_the_first_t_drivers(gbm_weights):
    b = sample_tilted(gbm_weights, 0, 1, 100_000, np.random.default_rng(1))
    for k in range(3):
        plain = b.drivers[b.t <= k, k]
        assert abs(plain.mean()) < 4 / math.sqrt(len(plain))
        if k < 2:
            tilted = b.drivers[b.t > k, k]
            assert abs(tilted.mean() - 2.0) < 4 / math.sqrt(len(tilted))


def test_down_measure_is_untilted(gbm_weights):
    b = sample_tilted(gbm_weights, 1, -1, 100_000, np.random.default_rng(2))
    p = np.exp(-np.arange(3)) / np.exp(-np.arange(3)).sum()
    freq = np.bincount(b.t, minlength=3) / len(b)
    assert np.all(np.abs(freq - p) <= 4 * np.sqrt(p * (1 - p) / len(b)))
    assert np.all(np.abs(b.drivers.mean(axis=0)) < 4 / math.sqrt(len(b)))


def test_features_are_exact_weights(gbm_weights, gbm, gbm_spec):
    b = sample_tilted(gbm_weights, 0, 1, 50, np.random.default_rng(3))
    for k in range(0, 50, 7):
        s = b.sample(k, gbm)
        for j in range(3):
            assert s.features[j] == v_weight(gbm, gbm_spec, j, s.path, s.t)


def test_noise_independent_of_features(gbm_weights):
    b = sample_tilted(gbm_weights, 0, 1, 100_000, np.random.default_rng(4))
    for j in range(2):
        r = np.corrcoef(b.z, np.log(np.abs(b.features[:, j])))[0, 1]
        assert abs(r) < 4 / math.sqrt(len(b))


@pytest.mark.parametrize("pair", [(0, 1), (1, 1), (1, -1)])
def test_tree_exact_route_matches_enumerated_law(tree_case, tree_weights, pair):
    sc, spec = tree_case
    probs = exact_pipeline(sc, spec).tilted_cells(*pair).ravel()
    b = sample_tilted(tree_weights, *pair, 100_000, np.random.default_rng(5), route="exact")
    assert _chi2_pvalue(_cell_counts(b, sc), probs) > 0.01


@pytest.mark.parametrize("pair", [(0, 1), (1, -1)])
def test_rejection_matches_exact_route(tree_case, tree_weights, pair):
    sc, _ = tree_case
    a = sample_tilted(tree_weights, *pair, 50_000, np.random.default_rng(6), route="exact")
    r = sample_tilted(tree_weights, *pair, 50_000, np.random.default_rng(7), route="rejection")
    ca, cr = _cell_counts(a, sc), _cell_counts(r, sc)
    keep = (ca + cr) > 0
    table = np.vstack([ca[keep], cr[keep]])
    assert stats.chi2_contingency(table).pvalue > 0.01


def test_envelope_violation_aborts(tree_weights):
    m = tree_envelope(tree_weights, 0, 1)
    with pytest.raises(CertificationError, match="envelope"):
        sample_tilted(tree_weights, 0, 1, 100, np.random.default_rng(0), route="rejection", envelope=0.5 * m)


def test_zero_measure(gbm_weights):
    with pytest.raises(ZeroMeasureError):
        sample_tilted(gbm_weights, 2, 1, 10, np.random.default_rng(0))
    with pytest.raises(ZeroMeasureError):
        sample_tilted(gbm_weights, 0, -1, 10, np.random.default_rng(0))


def test_continuous_without_direct_route_needs_envelope():
    sc = GBMScenario(horizon=2, s0=1.0, upper=lambda prefix, t: 1.0 + 0.0 * prefix.sum(axis=1))
    w = compute_constants(sc, RiskSpec((NormalShift(0.5),), (0.0,)), budget=20_000, rng=np.random.default_rng(0))
    with pytest.raises(CertificationError):
        sample_tilted(w, 0, 1, 10, np.random.default_rng(0))


def test_bank_sizes_follow_plan(gbm_weights):
    plan = plan_samples(gbm_weights, 0.5, 0.05).with_kappas({(0, 1): 3000, (1, -1): 200})
    bank = build_bank(gbm_weights, plan, seed=1)
    assert bank.sizes() == {"1+": 3000, "2-": 200}
    assert bank.aleph == 2 and bank.delta == 0.05
    assert bank.epsilon == plan.certified_epsilon()


def test_empty_bank_when_nothing_to_sample():
    w = compute_constants(GBMScenario(horizon=2, s0=1.0, lower=0.0, upper=0.0), RiskSpec((NormalShift(1.0),), (0.0,)))
    bank = build_bank(w, plan_samples(w, 0.5, 0.05), seed=0)
    assert bank.batches == {} and bank.aleph == 0


def _small_plan(weights):
    return plan_samples(weights, 0.5, 0.05).with_kappas({(0, 1): 5000, (1, -1): 700})


def _same(a, b):
    assert a.batches.keys() == b.batches.keys()
    for k in a.batches:
        for name in ("drivers", "t", "z", "features"):
            assert np.array_equal(getattr(a.batches[k], name), getattr(b.batches[k], name))


def test_bank_determinism_and_worker_independence(gbm_weights):
    plan = _small_plan(gbm_weights)
    a = build_bank(gbm_weights, plan, seed=9, chunk_size=1024)
    b = build_bank(gbm_weights, plan, seed=9, chunk_size=1024)
    c = build_bank(gbm_weights, plan, seed=9, chunk_size=1024, workers=3)
    _same(a, b)
    _same(a, c)
    d = build_bank(gbm_weights, plan, seed=10, chunk_size=1024)
    assert not np.array_equal(a.batches[(0, 1)].z, d.batches[(0, 1)].z)


def test_bank_roundtrip_and_key_check(gbm_weights, tmp_path):
    key = config_key({"seed": 9, "x": [1, 2]})
    bank = build_bank(gbm_weights, _small_plan(gbm_weights), seed=9, key=key)
    path = tmp_path / "bank.npz"
    save_bank(bank, path)
    back = load_bank(path, expected_key=key)
    _same(bank, back)
    assert back.epsilon == bank.epsilon and back.seed == 9 and back.key == key
    with pytest.raises(CertificationError, match="void the certificate"):
        load_bank(path, expected_key="0" * 16)


def test_csv_export(gbm_weights, tmp_path):
    bank = build_bank(gbm_weights, _small_plan(gbm_weights), seed=1)
    path = tmp_path / "bank.csv"
    export_csv(bank, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# bank format")
    assert lines[1] == "i,sign,t,z,v_1,v_2,v_3"
    assert len(lines) == 2 + 5000 + 700


def test_config_key_is_order_free():
    assert config_key({"a": 1, "b": 2}) == config_key({"b": 2, "a": 1})
    assert config_key({"a": 1}) != config_key({"a": 2})
