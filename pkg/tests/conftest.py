import json
from pathlib import Path

import numpy as np
import pytest

from acceptability.market import TreeScenario, three_period_gbm
from acceptability.risk import RiskSpec, TreeMeasure, shifted_normal_spec
from acceptability.weights import compute_constants

DATA = Path(__file__).parent / "data"
CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture(scope="session")
def fixture_data():
    return json.loads((DATA / "tree_fixture.json").read_text())


def two_period_tree(fx):
    tp = fx["two_period"]
    sc = TreeScenario(
        horizon=2,
        s0=tp["s0"],
        lower=tp["lower"],
        upper=tp["upper"],
        factors=tuple(tp["factors"]),
        probs=tuple(tp["probs"]),
    )
    spec = RiskSpec(tuple(TreeMeasure(tuple(q)) for q in tp["q_paths"]), tuple(tp["alphas"]))
    return sc, spec


@pytest.fixture(scope="session")
def tree_case(fixture_data):
    return two_period_tree(fixture_data)


@pytest.fixture(scope="session")
def tree_weights(tree_case):
    return compute_constants(*tree_case)


@pytest.fixture(scope="session")
def gbm():
    return three_period_gbm()


@pytest.fixture(scope="session")
def gbm_spec():
    return shifted_normal_spec()


@pytest.fixture(scope="session")
def gbm_weights(gbm, gbm_spec):
    return compute_constants(gbm, gbm_spec)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
