"""Discrete-time single-stock market scenarios.

Paths carry both the driver values ``z`` (what densities are written in) and
the prices ``S`` (what wealth is written in). Everything that touches many
paths works on a :class:`PathBatch` of shape ``(n, T)`` / ``(n, T + 1)``;
:class:`DriverPath` is the single-path view used at API boundaries.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

BoundFn = Callable[[np.ndarray, int], np.ndarray]
Bound = Union[float, BoundFn]


class ConstraintError(ValueError):
    """Holdings outside ``[a_t, b_t]``."""

    def __init__(self, t: int, message: str):
        super().__init__(f"trading constraint violated at t={t}: {message}")
        self.t = t


class UnsupportedKindError(TypeError):
    pass


@dataclass(frozen=True)
class DriverPath:
    drivers: np.ndarray
    prices: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.drivers, dtype=float)
        s = np.asarray(self.prices, dtype=float)
        if s.shape != (z.shape[0] + 1,):
            raise ValueError("need len(prices) == len(drivers) + 1")
        object.__setattr__(self, "drivers", z)
        object.__setattr__(self, "prices", s)

    @property
    def horizon(self) -> int:
        return self.drivers.shape[0]


@dataclass(frozen=True)
class PathBatch:
    """``n`` paths stacked row-wise."""

    drivers: np.ndarray  # (n, T)
    prices: np.ndarray  # (n, T + 1)

    def __len__(self) -> int:
        return self.drivers.shape[0]

    @property
    def horizon(self) -> int:
        return self.drivers.shape[1]

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.prices, axis=1)

    def path(self, k: int) -> DriverPath:
        return DriverPath(self.drivers[k], self.prices[k])

    def take(self, idx) -> "PathBatch":
        return PathBatch(self.drivers[idx], self.prices[idx])

    @classmethod
    def from_paths(cls, paths: Sequence[DriverPath]) -> "PathBatch":
        return cls(np.stack([p.drivers for p in paths]), np.stack([p.prices for p in paths]))


def _eval_bound(bound: Bound, drivers: np.ndarray, t: int) -> np.ndarray:
    if callable(bound):
        return np.broadcast_to(np.asarray(bound(drivers[:, :t], t), dtype=float), drivers.shape[:1])
    return np.full(drivers.shape[0], float(bound))


@dataclass(frozen=True)
class MarketScenario:
    """Base scenario: horizon, initial price and the trading bounds.

    ``lower``/``upper`` are either constants or functions of the driver
    prefix ``z[:, :t]`` and ``t`` returning one value per row.
    """

    horizon: int
    s0: float
    lower: Bound = 0.0
    upper: Bound = 1.0

    kind = "abstract"

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be a positive integer")
        if not self.s0 > 0:
            raise ValueError("s0 must be positive")
        if not callable(self.lower) and not callable(self.upper) and not self.upper >= self.lower:
            raise ValueError("upper bound must not be below lower bound")

    @property
    def constant_bounds(self) -> bool:
        return not callable(self.lower) and not callable(self.upper)

    def bounds(self, drivers: np.ndarray, t: int) -> tuple[np.ndarray, np.ndarray]:
        drivers = np.atleast_2d(drivers)
        return _eval_bound(self.lower, drivers, t), _eval_bound(self.upper, drivers, t)

    def prices(self, drivers: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample_drivers(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def batch(self, drivers: np.ndarray) -> PathBatch:
        drivers = np.atleast_2d(np.asarray(drivers, dtype=float))
        return PathBatch(drivers, self.prices(drivers))

    def price_fn(self, prefix: Sequence[float]) -> float:
        """Price after the driver prefix ``z_1..z_t``; the empty prefix gives ``s0``."""
        t = len(prefix)
        if t == 0:
            return float(self.s0)
        padded = np.zeros((1, self.horizon))
        padded[0, :t] = prefix
        return float(self.prices(padded)[0, t])


@dataclass(frozen=True)
class GBMScenario(MarketScenario):
    """Geometric random walk observed at ``T`` dates.

    ``S_{t+1} = S_t exp(drift - vol**2 / 2 + vol * Z_{t+1})`` with iid standard
    normal drivers under the reference measure; ``drift = 0`` makes ``S`` a
    martingale.
    """

    drift: float = 0.0
    vol: float = 1.0

    kind = "continuous"

    def log_increments(self, drivers: np.ndarray) -> np.ndarray:
        return self.drift - 0.5 * self.vol**2 + self.vol * drivers

    def prices(self, drivers: np.ndarray) -> np.ndarray:
        drivers = np.atleast_2d(drivers)
        logs = np.cumsum(self.log_increments(drivers), axis=1)
        out = np.empty((drivers.shape[0], drivers.shape[1] + 1))
        out[:, 0] = self.s0
        out[:, 1:] = self.s0 * np.exp(logs)
        return out

    def sample_drivers(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.standard_normal((n, self.horizon))


@dataclass(frozen=True)
class TreeScenario(MarketScenario):
    """Recombining-free tree with iid branches per step.

    Drivers are branch indices ``0..B-1`` (stored as floats); branch ``k``
    multiplies the price by ``factors[k]`` and has reference probability
    ``probs[k]``.
    """

    factors: tuple[float, ...] = (1.1, 0.9)
    probs: tuple[float, ...] = (0.5, 0.5)

    kind = "finite-tree"

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "factors", tuple(float(f) for f in self.factors))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if len(self.factors) != len(self.probs) or not self.factors:
            raise ValueError("factors and probs must have the same nonzero length")
        if any(f <= 0 for f in self.factors):
            raise ValueError("branch factors must be positive")
        if any(p <= 0 for p in self.probs) or abs(sum(self.probs) - 1.0) > 1e-12:
            raise ValueError("branch probabilities must be positive and sum to 1")

    @property
    def branching(self) -> int:
        return len(self.factors)

    @property
    def n_paths(self) -> int:
        return self.branching**self.horizon

    def prices(self, drivers: np.ndarray) -> np.ndarray:
        drivers = np.atleast_2d(drivers)
        idx = drivers.astype(np.int64)
        f = np.asarray(self.factors)[idx]
        out = np.empty((drivers.shape[0], drivers.shape[1] + 1))
        out[:, 0] = self.s0
        out[:, 1:] = self.s0 * np.cumprod(f, axis=1)
        return out

    def sample_drivers(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.choice(self.branching, size=(n, self.horizon), p=self.probs).astype(float)

    def path_index(self, drivers: np.ndarray) -> np.ndarray:
        """Position of each path in :meth:`all_drivers` order."""
        idx = np.atleast_2d(drivers).astype(np.int64)
        weights = self.branching ** np.arange(self.horizon - 1, -1, -1)
        return idx @ weights

    def all_drivers(self) -> np.ndarray:
        rows = itertools.product(range(self.branching), repeat=self.horizon)
        return np.array(list(rows), dtype=float).reshape(-1, self.horizon)

    def path_probs(self) -> np.ndarray:
        idx = self.all_drivers().astype(np.int64)
        return np.prod(np.asarray(self.probs)[idx], axis=1)


def sample_path(scenario: MarketScenario, rng: np.random.Generator) -> DriverPath:
    return sample_paths(scenario, rng, 1).path(0)


def sample_paths(scenario: MarketScenario, rng: np.random.Generator, n: int) -> PathBatch:
    return scenario.batch(scenario.sample_drivers(rng, n))


def check_holdings(scenario: MarketScenario, paths: PathBatch, holdings: np.ndarray, tol: float = 1e-12):
    holdings = np.atleast_2d(holdings)
    for t in range(paths.horizon):
        a, b = scenario.bounds(paths.drivers, t)
        bad = (holdings[:, t] < a - tol) | (holdings[:, t] > b + tol)
        if np.any(bad):
            k = int(np.argmax(bad))
            raise ConstraintError(t, f"xi={holdings[k, t]!r} not in [{a[k]!r}, {b[k]!r}]")


def wealth_increments(paths: PathBatch, holdings: np.ndarray) -> np.ndarray:
    """``W(xi) = sum_t xi_t (S_{t+1} - S_t)`` for every row."""
    return np.sum(np.atleast_2d(holdings) * paths.increments, axis=1)


def wealth_increment(
    path: DriverPath, holdings: Sequence[float], scenario: MarketScenario | None = None
) -> float:
    """Wealth increment along one path; bounds are checked when ``scenario`` is given."""
    xi = np.asarray(holdings, dtype=float)
    if xi.shape != (path.horizon,):
        raise ValueError(f"expected {path.horizon} holdings, got {xi.shape}")
    batch = PathBatch(path.drivers[None, :], path.prices[None, :])
    if scenario is not None:
        check_holdings(scenario, batch, xi[None, :])
    return float(wealth_increments(batch, xi[None, :])[0])


def enumerate_paths(scenario: MarketScenario) -> list[tuple[DriverPath, float]]:
    if not isinstance(scenario, TreeScenario):
        raise UnsupportedKindError(f"path enumeration needs a finite tree, got kind={scenario.kind!r}")
    batch = scenario.batch(scenario.all_drivers())
    probs = scenario.path_probs()
    return [(batch.path(k), float(probs[k])) for k in range(len(batch))]


def three_period_gbm() -> GBMScenario:
    """Three periods, ``S0 = 4``, unit volatility, holdings in ``[0, 1]``."""
    return GBMScenario(horizon=3, s0=4.0, lower=0.0, upper=1.0, drift=0.0, vol=1.0)


class Strategy:
    """Adapted holdings. Subclasses map a path batch to ``(n, T)`` holdings;
    the value for period ``t`` may only read ``drivers[:, :t]``."""

    def holdings(self, paths: PathBatch) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, paths: PathBatch) -> np.ndarray:
        return self.holdings(paths)


@dataclass(frozen=True)
class FixedHoldings(Strategy):
    """Deterministic holdings, the same on every path."""

    values: tuple[float, ...] = field(default=())

    def holdings(self, paths: PathBatch) -> np.ndarray:
        xi = np.asarray(self.values, dtype=float)
        if xi.shape != (paths.horizon,):
            raise ValueError(f"expected {paths.horizon} holdings, got {xi.shape}")
        return np.broadcast_to(xi, (len(paths), paths.horizon)).copy()


def zero_strategy(horizon: int) -> FixedHoldings:
    return FixedHoldings((0.0,) * horizon)
