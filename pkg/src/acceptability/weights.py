"""Weight processes ``v_t(f_i)``, their normalizers, and the parametric strategies.

``v_t(f) = (b_t - a_t) E[(S_{t+1} - S_t) f | F_t]`` is evaluated in one of two
ways:

* closed form for the Gaussian random walk with mean-shift densities, where
  ``E[(S_{t+1} - S_t) f | F_t] = S_t f_t (g - 1)`` with ``f_t`` the density of
  the first ``t`` drivers and ``g = exp(drift + vol * shift)``;
* backward conditional expectations on a finite tree.

Anything else raises :class:`MissingEvaluatorError`.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from .market import DriverPath, GBMScenario, MarketScenario, PathBatch, Strategy, TreeScenario
from .risk import NormalShift, ReferenceMeasure, RiskSpec, ScenarioMeasure, TreeMeasure


class MissingEvaluatorError(NotImplementedError):
    pass


class ConfigurationError(ValueError):
    pass


# ---------------------------------------------------------------- eta


@dataclass(frozen=True)
class Eta:
    """Continuous distribution function used to smooth the threshold rule."""

    name: str

    def cdf(self, x):
        if self.name == "normal":
            return special.ndtr(x)
        if self.name == "logistic":
            return special.expit(x)
        raise ConfigurationError(f"unknown eta {self.name!r}")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.name == "normal":
            return rng.standard_normal(n)
        if self.name == "logistic":
            return rng.logistic(size=n)
        raise ConfigurationError(f"unknown eta {self.name!r}")


NORMAL = Eta("normal")
LOGISTIC = Eta("logistic")


def get_eta(name: str) -> Eta:
    if name not in ("normal", "logistic"):
        raise ConfigurationError(f"unknown eta {name!r}; choose 'normal' or 'logistic'")
    return Eta(name)


# ---------------------------------------------------------------- v evaluators


def _shift_of(measure: ScenarioMeasure) -> float | None:
    if isinstance(measure, NormalShift):
        return float(measure.shift)
    if isinstance(measure, ReferenceMeasure):
        return 0.0
    return None


def _gbm_growth(scenario: GBMScenario, shift: float) -> float:
    return float(np.exp(scenario.drift + scenario.vol * shift))


@functools.lru_cache(maxsize=64)
def _tree_tables(scenario: TreeScenario, measure: TreeMeasure) -> tuple[np.ndarray, ...]:
    """Per ``t``: ``E[(S_{t+1} - S_t) f | prefix]`` indexed by prefix number."""
    B, T = scenario.branching, scenario.horizon
    drivers = scenario.all_drivers()
    prices = scenario.prices(drivers)
    f = measure.density(scenario, drivers)
    p = np.asarray(scenario.probs)
    tol = 1e-12 * scenario.s0
    tables = []
    for t in range(T):
        arr = (f * (prices[:, t + 1] - prices[:, t])).reshape((B,) * T)
        for axis in range(T - 1, t - 1, -1):
            arr = np.tensordot(arr, p, axes=([axis], [0]))
        arr = np.asarray(arr, dtype=float).reshape(-1)
        arr[np.abs(arr) <= tol] = 0.0
        tables.append(arr)
    return tuple(tables)


def _prefix_index(scenario: TreeScenario, drivers: np.ndarray, t: int) -> np.ndarray:
    if t == 0:
        return np.zeros(drivers.shape[0], dtype=np.int64)
    idx = drivers[:, :t].astype(np.int64)
    return idx @ (scenario.branching ** np.arange(t - 1, -1, -1))


def conditional_increment(
    scenario: MarketScenario, measure: ScenarioMeasure, paths: PathBatch, t: int
) -> np.ndarray:
    """``E[(S_{t+1} - S_t) f | F_t]`` on each row of ``paths``."""
    if isinstance(scenario, GBMScenario):
        shift = _shift_of(measure)
        if shift is None:
            raise MissingEvaluatorError(f"no closed form for {type(measure).__name__} on a GBM scenario")
        g = _gbm_growth(scenario, shift)
        z = paths.drivers[:, :t]
        f_t = np.exp(shift * z.sum(axis=1) - 0.5 * t * shift**2)
        return paths.prices[:, t] * f_t * (g - 1.0)
    if isinstance(scenario, TreeScenario):
        if isinstance(measure, ReferenceMeasure):
            measure = TreeMeasure(tuple(scenario.path_probs()))
        if not isinstance(measure, TreeMeasure):
            raise MissingEvaluatorError(f"no tree evaluator for {type(measure).__name__}")
        return _tree_tables(scenario, measure)[t][_prefix_index(scenario, paths.drivers, t)]
    raise MissingEvaluatorError(f"no conditional-expectation evaluator for kind={scenario.kind!r}")


def v_batch(scenario: MarketScenario, spec: RiskSpec, i: int, paths: PathBatch, t: int) -> np.ndarray:
    a, b = scenario.bounds(paths.drivers, t)
    return (b - a) * conditional_increment(scenario, spec.measures[i], paths, t)


def v_weight(scenario: MarketScenario, spec: RiskSpec, i: int, path: DriverPath, t: int) -> float:
    """``v_t(f_i)`` at the prefix of ``path``; ``i`` is zero-based."""
    if not 0 <= t < path.horizon:
        raise ValueError(f"period {t} outside 0..{path.horizon - 1}")
    batch = PathBatch(path.drivers[None, :], path.prices[None, :])
    return float(v_batch(scenario, spec, i, batch, t)[0])


def feature_matrix(scenario: MarketScenario, spec: RiskSpec, paths: PathBatch, t: np.ndarray) -> np.ndarray:
    """``(n, m)`` matrix with row ``k`` equal to ``(v_1, ..., v_m)`` at ``(path_k, t_k)``."""
    t = np.asarray(t, dtype=np.int64)
    out = np.zeros((len(paths), spec.m))
    for tt in np.unique(t):
        rows = np.flatnonzero(t == tt)
        sub = paths.take(rows)
        for i in range(spec.m):
            out[rows, i] = v_batch(scenario, spec, i, sub, int(tt))
    return out


# ---------------------------------------------------------------- constants


@dataclass(frozen=True)
class Provenance:
    route: str  # "closed-form" | "exact-enumeration" | "monte-carlo"
    n: int | None = None
    std_error: float | None = None

    @property
    def certified(self) -> bool:
        return self.route != "monte-carlo"

    def describe(self) -> dict:
        out = {"route": self.route}
        if self.n is not None:
            out["n"] = self.n
            out["std_error"] = self.std_error
        return out


@dataclass(frozen=True)
class TiltedWeights:
    scenario: MarketScenario
    spec: RiskSpec
    c: tuple[float, ...]
    d_plus: tuple[float, ...]
    d_minus: tuple[float, ...]
    provenance: tuple[dict, ...] = field(default=())

    @property
    def m(self) -> int:
        return self.spec.m

    @property
    def aleph(self) -> int:
        return sum(int(x > 0) for x in self.d_plus) + sum(int(x > 0) for x in self.d_minus)

    @property
    def active(self) -> tuple[int, ...]:
        """Measures whose weight process is not identically zero."""
        return tuple(i for i in range(self.m) if self.d_plus[i] > 0 or self.d_minus[i] > 0)

    def pairs(self) -> list[tuple[int, int]]:
        """Nonzero tilted measures as ``(i, sign)`` with ``sign`` in ``{+1, -1}``."""
        out = []
        for i in range(self.m):
            if self.d_plus[i] > 0:
                out.append((i, 1))
            if self.d_minus[i] > 0:
                out.append((i, -1))
        return out

    def normalizer(self, i: int, sign: int) -> float:
        return self.d_plus[i] if sign > 0 else self.d_minus[i]

    @property
    def certified(self) -> bool:
        return all(Provenance(**p).certified for p in self.provenance) if self.provenance else True

    def features(self, paths: PathBatch, t: np.ndarray) -> np.ndarray:
        return feature_matrix(self.scenario, self.spec, paths, t)


def expected_weight(scenario: GBMScenario, measure: ScenarioMeasure, t: int) -> float:
    """``E[v_t(f)]`` in closed form for constant bounds."""
    shift = _shift_of(measure)
    if shift is None or not scenario.constant_bounds:
        raise MissingEvaluatorError("closed-form mean needs a mean-shift density and constant bounds")
    g = _gbm_growth(scenario, shift)
    return (float(scenario.upper) - float(scenario.lower)) * scenario.s0 * g**t * (g - 1.0)


def _closed_form_constants(scenario: GBMScenario, spec: RiskSpec):
    c, dp, dm = [], [], []
    for q in spec.measures:
        means = [expected_weight(scenario, q, t) for t in range(scenario.horizon)]
        g = _gbm_growth(scenario, _shift_of(q))
        dp.append(float(sum(x for x in means if x > 0)))
        dm.append(float(sum(-x for x in means if x < 0)))
        c.append(0.0 + float(scenario.lower) * scenario.s0 * (g - 1.0) * sum(g**t for t in range(scenario.horizon)))
    prov = tuple(Provenance("closed-form").describe() for _ in spec.measures)
    return c, dp, dm, prov


def _tree_constants(scenario: TreeScenario, spec: RiskSpec):
    drivers = scenario.all_drivers()
    paths = scenario.batch(drivers)
    p = scenario.path_probs()
    f = spec.densities(scenario, drivers)
    c, dp, dm = [], [], []
    for i in range(spec.m):
        pos = neg = 0.0
        a_incr = np.zeros(len(paths))
        for t in range(scenario.horizon):
            v = v_batch(scenario, spec, i, paths, t)
            pos += float(p @ np.maximum(v, 0.0))
            neg += float(p @ np.maximum(-v, 0.0))
            a, _ = scenario.bounds(drivers, t)
            a_incr += a * (paths.prices[:, t + 1] - paths.prices[:, t])
        dp.append(pos)
        dm.append(neg)
        c.append(float(p @ (f[:, i] * a_incr)))
    prov = tuple(Provenance("exact-enumeration").describe() for _ in spec.measures)
    return c, dp, dm, prov


def _mc_constants(scenario: MarketScenario, spec: RiskSpec, n: int, rng: np.random.Generator):
    paths = scenario.batch(scenario.sample_drivers(rng, n))
    f = spec.densities(scenario, paths.drivers)
    c, dp, dm, prov = [], [], [], []
    for i in range(spec.m):
        pos = np.zeros(n)
        neg = np.zeros(n)
        a_incr = np.zeros(n)
        for t in range(scenario.horizon):
            v = v_batch(scenario, spec, i, paths, t)
            pos += np.maximum(v, 0.0)
            neg += np.maximum(-v, 0.0)
            a, _ = scenario.bounds(paths.drivers, t)
            a_incr += a * (paths.prices[:, t + 1] - paths.prices[:, t])
        cf = f[:, i] * a_incr
        dp.append(float(pos.mean()))
        dm.append(float(neg.mean()))
        c.append(float(cf.mean()))
        se = max(float(x.std(ddof=1) / np.sqrt(n)) for x in (pos, neg, cf))
        prov.append(Provenance("monte-carlo", n, se).describe())
    return c, dp, dm, tuple(prov)


def compute_constants(
    scenario: MarketScenario,
    spec: RiskSpec,
    budget: int | None = None,
    rng: np.random.Generator | None = None,
) -> TiltedWeights:
    """Fill ``c(f_i)``, ``d_i^+`` and ``d_i^-``.

    Closed forms and tree enumeration are preferred; a Monte-Carlo budget is a
    fallback whose results are tagged uncertified.
    """
    if isinstance(scenario, TreeScenario):
        parts = _tree_constants(scenario, spec)
    elif (
        isinstance(scenario, GBMScenario)
        and scenario.constant_bounds
        and all(_shift_of(q) is not None for q in spec.measures)
    ):
        parts = _closed_form_constants(scenario, spec)
    elif budget:
        parts = _mc_constants(scenario, spec, int(budget), rng or np.random.default_rng())
    else:
        raise ConfigurationError("no closed form or tree structure for the constants and no Monte-Carlo budget")
    c, dp, dm, prov = parts
    return TiltedWeights(scenario, spec, tuple(c), tuple(dp), tuple(dm), prov)


# ---------------------------------------------------------------- strategies


@dataclass(frozen=True)
class StrategyParams:
    s: tuple[float, ...]
    eta: Eta = NORMAL

    def __post_init__(self):
        object.__setattr__(self, "s", tuple(float(x) for x in np.ravel(self.s)))


def _check_dim(weights: TiltedWeights, params: StrategyParams):
    if len(params.s) != weights.m:
        raise ValueError(f"parameter vector has {len(params.s)} entries, risk measure has m={weights.m}")


def lambda_batch(weights: TiltedWeights, params: StrategyParams, paths: PathBatch, t: int) -> np.ndarray:
    _check_dim(weights, params)
    out = np.zeros(len(paths))
    for i, si in enumerate(params.s):
        if si != 0.0:
            out = out + si * v_batch(weights.scenario, weights.spec, i, paths, t)
    return out


def lambda_process(weights: TiltedWeights, params: StrategyParams, path: DriverPath, t: int) -> float:
    """``lambda_t(s) = sum_i s_i v_t(f_i)`` at the prefix of ``path``."""
    batch = PathBatch(path.drivers[None, :], path.prices[None, :])
    return float(lambda_batch(weights, params, batch, t)[0])


@dataclass(frozen=True)
class ParametricStrategy(Strategy):
    """``xi_t(s) = (b_t - a_t) eta(lambda_t(s)) + a_t``."""

    weights: TiltedWeights
    params: StrategyParams

    def holdings(self, paths: PathBatch) -> np.ndarray:
        T = paths.horizon
        out = np.empty((len(paths), T))
        for t in range(T):
            a, b = self.weights.scenario.bounds(paths.drivers, t)
            lam = lambda_batch(self.weights, self.params, paths, t)
            out[:, t] = np.clip((b - a) * self.params.eta.cdf(lam) + a, a, b)
        return out


def strategy_from_params(weights: TiltedWeights, params: StrategyParams, path: DriverPath) -> np.ndarray:
    batch = PathBatch(path.drivers[None, :], path.prices[None, :])
    return ParametricStrategy(weights, params).holdings(batch)[0]


def describe_strategy(weights: TiltedWeights, params: StrategyParams) -> str:
    """Human-readable closed form of the strategy for reports."""
    terms = " + ".join(f"{s:.6g}*v_t(f_{i + 1})" for i, s in enumerate(params.s) if s != 0.0) or "0"
    text = f"xi_t = (b_t - a_t) * {params.eta.name}_cdf(lambda_t) + a_t,  lambda_t = {terms}"
    sc = weights.scenario
    if isinstance(sc, GBMScenario):
        parts = []
        for i, (s, q) in enumerate(zip(params.s, weights.spec.measures)):
            shift = _shift_of(q)
            if s == 0.0 or shift is None:
                continue
            g = _gbm_growth(sc, shift)
            parts.append(
                f"{s:.6g}*{g - 1.0:.6g}*S_t*exp({shift:.6g}*sum_{{k<=t}} z_k - t*{0.5 * shift**2:.6g})"
            )
        if parts:
            text += "  [per unit holding range: lambda_t/(b_t - a_t) = " + " + ".join(parts) + "]"
    return text


def parametric_strategy(weights: TiltedWeights, s: Sequence[float], eta: Eta = NORMAL) -> ParametricStrategy:
    return ParametricStrategy(weights, StrategyParams(tuple(s), eta))
