"""Near-minimal capital under convex risk constraints by tilted Monte-Carlo sampling."""
from .estimator import Certificate, RhoEstimate, d_i_of_s, rho_hat, rho_hat_batch
from .market import (
    ConstraintError,
    DriverPath,
    GBMScenario,
    MarketScenario,
    PathBatch,
    TreeScenario,
    three_period_gbm,
    sample_path,
    sample_paths,
    wealth_increment,
)
from .risk import NormalShift, ReferenceMeasure, RiskSpec, TreeMeasure, shifted_normal_spec, rho_exact, rho_mc_crosscheck
from .sampler import CertificationError, SampleBank, build_bank, load_bank, sample_tilted, save_bank
from .search import GridSpec, SearchResult, run_search
from .vcbound import SamplePlan, certified_epsilon, deviation_bound, minimal_sample_size, plan_samples
from .weights import LOGISTIC, NORMAL, StrategyParams, TiltedWeights, compute_constants, get_eta, parametric_strategy

__version__ = "0.1.0"
