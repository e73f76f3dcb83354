"""Convex risk measures generated by finitely many scenario measures.

``rho(X) = max_i [alpha_i - E(X f_i)]`` where ``f_i = dQ_i/dP`` is evaluated
path-wise. Exact evaluation is available on finite trees; the Monte-Carlo
cross-check works for any scenario and is deliberately the naive estimator,
so it shares no code path with the tilted estimator in :mod:`estimator`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .market import (
    GBMScenario,
    MarketScenario,
    PathBatch,
    Strategy,
    TreeScenario,
    UnsupportedKindError,
    check_holdings,
    wealth_increments,
)


class ScenarioMeasure:
    """A probability ``Q << P`` known through its density on driver paths."""

    def density(self, scenario: MarketScenario, drivers: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample_drivers(self, scenario: MarketScenario, rng: np.random.Generator, n: int) -> np.ndarray:
        """Drivers distributed under ``Q`` itself (used by the cross-check)."""
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError

    def expected_gain(self, scenario: MarketScenario) -> float:
        """``E_Q[S_T - S_0]``, the mean of the buy-and-hold control variate."""
        raise UnsupportedKindError(f"no closed-form price mean for {type(self).__name__}")


def _gbm_gain(scenario: MarketScenario, shift: float) -> float:
    if not isinstance(scenario, GBMScenario):
        raise UnsupportedKindError("closed-form price mean needs a GBM scenario")
    g = np.exp(scenario.drift + scenario.vol * shift)
    return float(scenario.s0 * (g**scenario.horizon - 1.0))


@dataclass(frozen=True)
class ReferenceMeasure(ScenarioMeasure):
    """``Q = P``, density identically one."""

    def density(self, scenario, drivers):
        return np.ones(np.atleast_2d(drivers).shape[0])

    def sample_drivers(self, scenario, rng, n):
        return scenario.sample_drivers(rng, n)

    def describe(self):
        return {"density": "reference"}

    def expected_gain(self, scenario):
        if isinstance(scenario, TreeScenario):
            prices = scenario.prices(scenario.all_drivers())
            return float(scenario.path_probs() @ (prices[:, -1] - prices[:, 0]))
        return _gbm_gain(scenario, 0.0)


@dataclass(frozen=True)
class NormalShift(ScenarioMeasure):
    """Gaussian drivers re-centred at ``shift``: under ``Q`` the ``Z_k`` are iid ``N(shift, 1)``."""

    shift: float

    def density(self, scenario, drivers):
        if not isinstance(scenario, GBMScenario):
            raise UnsupportedKindError("normal shift needs normal drivers")
        z = np.atleast_2d(drivers)
        T = z.shape[1]
        return np.exp(self.shift * z.sum(axis=1) - 0.5 * T * self.shift**2)

    def sample_drivers(self, scenario, rng, n):
        return scenario.sample_drivers(rng, n) + self.shift

    def describe(self):
        return {"density": "normal_shift", "shift": self.shift}

    def expected_gain(self, scenario):
        return _gbm_gain(scenario, self.shift)


@dataclass(frozen=True)
class TreeMeasure(ScenarioMeasure):
    """Explicit path probabilities on a finite tree, in ``all_drivers()`` order."""

    path_probs: tuple[float, ...]

    def __post_init__(self):
        q = np.asarray(self.path_probs, dtype=float)
        if np.any(q < 0) or abs(q.sum() - 1.0) > 1e-10:
            raise ValueError("tree measure probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "path_probs", tuple(float(x) for x in q))

    @classmethod
    def from_step_probs(cls, scenario: TreeScenario, step_probs: Sequence[float]) -> "TreeMeasure":
        idx = scenario.all_drivers().astype(np.int64)
        q = np.prod(np.asarray(step_probs, dtype=float)[idx], axis=1)
        return cls(tuple(q))

    def _check(self, scenario):
        if not isinstance(scenario, TreeScenario):
            raise UnsupportedKindError("tree measure needs a finite-tree scenario")
        if len(self.path_probs) != scenario.n_paths:
            raise ValueError(f"tree measure has {len(self.path_probs)} paths, scenario has {scenario.n_paths}")

    def density(self, scenario, drivers):
        self._check(scenario)
        ratio = np.asarray(self.path_probs) / scenario.path_probs()
        return ratio[scenario.path_index(drivers)]

    def sample_drivers(self, scenario, rng, n):
        self._check(scenario)
        k = rng.choice(scenario.n_paths, size=n, p=np.asarray(self.path_probs))
        return scenario.all_drivers()[k]

    def describe(self):
        return {"density": "tree", "path_probs": list(self.path_probs)}

    def expected_gain(self, scenario):
        self._check(scenario)
        prices = scenario.prices(scenario.all_drivers())
        return float(np.asarray(self.path_probs) @ (prices[:, -1] - prices[:, 0]))


@dataclass(frozen=True)
class RiskSpec:
    measures: tuple[ScenarioMeasure, ...]
    alphas: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "measures", tuple(self.measures))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if not self.measures:
            raise ValueError("need at least one scenario measure")
        if len(self.measures) != len(self.alphas):
            raise ValueError("one penalty per scenario measure")

    @property
    def m(self) -> int:
        return len(self.measures)

    def densities(self, scenario: MarketScenario, drivers: np.ndarray) -> np.ndarray:
        """``(n, m)`` matrix of ``f_i`` evaluated on each path."""
        return np.column_stack([q.density(scenario, drivers) for q in self.measures])

    def normalization_errors(self, scenario: TreeScenario) -> np.ndarray:
        if not isinstance(scenario, TreeScenario):
            raise UnsupportedKindError("normalization is only checked on finite trees")
        p = scenario.path_probs()
        f = self.densities(scenario, scenario.all_drivers())
        return np.abs(p @ f - 1.0)


def shifted_normal_spec() -> RiskSpec:
    """Up-shift, down-shift and the reference measure with penalties ``(e^4, e^-1, 0.2)``."""
    return RiskSpec(
        (NormalShift(1.0), NormalShift(-1.0), NormalShift(0.0)),
        (float(np.exp(4.0)), float(np.exp(-1.0)), 0.2),
    )


def rho_from_terms(alphas: Sequence[float], expectations: np.ndarray) -> tuple[float, int]:
    """``max_i (alpha_i - E(W f_i))`` and the first index attaining it."""
    d = np.asarray(alphas) - np.asarray(expectations)
    i = int(np.argmax(d))
    return float(d[i]), i


def exact_wf(spec: RiskSpec, scenario: MarketScenario, strategy: Strategy) -> np.ndarray:
    """``E(W(xi) f_i)`` for every ``i`` by summing over all tree paths."""
    if not isinstance(scenario, TreeScenario):
        raise UnsupportedKindError(f"exact evaluation needs a finite tree, got kind={scenario.kind!r}")
    paths = scenario.batch(scenario.all_drivers())
    xi = strategy(paths)
    check_holdings(scenario, paths, xi)
    w = wealth_increments(paths, xi)
    p = scenario.path_probs()
    return (p * w) @ spec.densities(scenario, paths.drivers)


def rho_exact(spec: RiskSpec, scenario: MarketScenario, strategy: Strategy, w0: float = 0.0) -> float:
    """``rho(w0 + W(xi))`` on a finite tree."""
    value, _ = rho_from_terms(spec.alphas, exact_wf(spec, scenario, strategy))
    return value - w0


@dataclass(frozen=True)
class CrossCheck:
    estimate: float
    std_errors: tuple[float, ...]
    terms: tuple[float, ...]  # per-i estimates of alpha_i - E((w0 + W) f_i)
    argmax: int
    n: int
    sampling: str
    control: bool = False


def rho_mc_crosscheck(
    spec: RiskSpec,
    scenario: MarketScenario,
    strategy: Strategy,
    w0: float,
    n: int,
    rng: np.random.Generator,
    sampling: str = "reference",
    chunk: int = 1 << 18,
    control: bool = False,
) -> CrossCheck:
    """Naive Monte-Carlo estimate of ``rho(w0 + W(xi))``.

    ``sampling="reference"`` averages ``W f_i`` over paths drawn from ``P``.
    ``sampling="scenario"`` averages ``W`` over paths drawn from each ``Q_i``
    directly; same target, but it avoids the heavy tails of ``W f_i`` when
    ``f_i`` is a steep likelihood ratio. ``E f_i = 1`` is used exactly, so the
    zero strategy returns ``max_i alpha_i - w0`` with zero spread.

    ``control=True`` subtracts the buy-and-hold gain ``S_T - S_0`` and adds
    back its exact scenario mean. Unbiased, and under a steep up-shift it
    removes most of the lognormal spread of ``W``.
    """
    if n < 2:
        raise ValueError("cross-check needs n >= 2")
    if sampling not in ("reference", "scenario"):
        raise ValueError(f"unknown sampling route {sampling!r}")
    m = spec.m
    sums = np.zeros(m)
    sq = np.zeros(m)
    routes = [None] if sampling == "reference" else list(range(m))
    gains = np.array([q.expected_gain(scenario) for q in spec.measures]) if control else np.zeros(m)
    for route in routes:
        done = 0
        while done < n:
            k = min(chunk, n - done)
            if route is None:
                drivers = scenario.sample_drivers(rng, k)
            else:
                drivers = spec.measures[route].sample_drivers(scenario, rng, k)
            paths = scenario.batch(drivers)
            xi = strategy(paths)
            check_holdings(scenario, paths, xi)
            w = wealth_increments(paths, xi)
            if control:
                w = w - (paths.prices[:, -1] - paths.prices[:, 0])
            if route is None:
                x = w[:, None] * spec.densities(scenario, drivers)
                sums += x.sum(axis=0)
                sq += (x * x).sum(axis=0)
            else:
                sums[route] += w.sum()
                sq[route] += (w * w).sum()
            done += k
    mean = sums / n + gains
    raw = sums / n
    var = np.maximum(sq / n - raw**2, 0.0) * n / (n - 1)
    se = np.sqrt(var / n)
    terms = np.asarray(spec.alphas) - mean
    i = int(np.argmax(terms))
    return CrossCheck(
        estimate=float(terms[i] - w0),
        std_errors=tuple(float(x) for x in se),
        terms=tuple(float(x - w0) for x in terms),
        argmax=i,
        n=n,
        sampling=sampling,
        control=control,
    )
