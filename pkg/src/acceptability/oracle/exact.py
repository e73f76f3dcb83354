"""Exhaustive verifiers on finite trees.

Everything here is computed by literal sums over enumerated paths and is
kept free of the vectorised machinery in :mod:`..weights` so that the two
can check each other.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..market import PathBatch, Strategy, TreeScenario, UnsupportedKindError
from ..risk import RiskSpec
from ..weights import NORMAL, Eta
from .simplex import simplex

MAX_PATHS = 10_000
MAX_NODES = 500
ZERO_TOL = 1e-12  # relative to s0, below which a conditional increment counts as zero


class OracleSizeError(ValueError):
    pass


def _require_tree(scenario) -> TreeScenario:
    if not isinstance(scenario, TreeScenario):
        raise UnsupportedKindError(f"oracle needs a finite tree, got kind={scenario.kind!r}")
    return scenario


def _bounds_table(scenario: TreeScenario, drivers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    T = scenario.horizon
    lo = np.empty((len(drivers), T))
    hi = np.empty((len(drivers), T))
    for t in range(T):
        lo[:, t], hi[:, t] = scenario.bounds(drivers, t)
    return lo, hi


@dataclass
class ExactPipeline:
    scenario: TreeScenario
    spec: RiskSpec
    eta: Eta
    probs: np.ndarray  # (N,)
    drivers: np.ndarray  # (N, T)
    increments: np.ndarray  # (N, T)
    densities: np.ndarray  # (N, m)
    lower: np.ndarray  # (N, T)
    upper: np.ndarray  # (N, T)
    v: np.ndarray  # (N, T, m)
    c: np.ndarray  # (m,)
    d_plus: np.ndarray
    d_minus: np.ndarray

    @property
    def aleph(self) -> int:
        return int(np.sum(self.d_plus > 0) + np.sum(self.d_minus > 0))

    def lam(self, s: Sequence[float]) -> np.ndarray:
        return self.v @ np.asarray(s, dtype=float)

    def holdings(self, s: Sequence[float]) -> np.ndarray:
        return (self.upper - self.lower) * self.eta.cdf(self.lam(s)) + self.lower

    def expected_wf(self, s: Sequence[float]) -> np.ndarray:
        w = np.sum(self.holdings(s) * self.increments, axis=1)
        return (self.probs * w) @ self.densities

    def terms(self, s: Sequence[float], w0: float = 0.0) -> np.ndarray:
        return np.asarray(self.spec.alphas) - self.expected_wf(s) - w0

    def rho(self, s: Sequence[float], w0: float = 0.0) -> float:
        return float(np.max(self.terms(s, w0)))

    def tilted_cells(self, i: int, sign: int) -> np.ndarray:
        """``(N, T)`` law of ``(path, t)`` under the normalised tilted measure."""
        part = np.maximum(sign * self.v[:, :, i], 0.0)
        total = self.d_plus[i] if sign > 0 else self.d_minus[i]
        if total <= 0:
            raise ValueError(f"tilted measure {(i, sign)} is zero")
        return self.probs[:, None] * part / total

    def tilted_prob(self, i: int, sign: int, s: Sequence[float]) -> float:
        """``P(lambda(s) - Z > 0)`` under the tilted measure; given the cell this is ``eta(lambda)``."""
        return float(np.sum(self.tilted_cells(i, sign) * self.eta.cdf(self.lam(s))))

    def rho_via_tilted(self, s: Sequence[float]) -> float:
        """Same ``rho`` assembled from the tilted probabilities, as the estimator does."""
        out = np.asarray(self.spec.alphas) - self.c
        for i in range(self.spec.m):
            if self.d_plus[i] > 0:
                out[i] -= self.d_plus[i] * self.tilted_prob(i, 1, s)
            if self.d_minus[i] > 0:
                out[i] += self.d_minus[i] * self.tilted_prob(i, -1, s)
        return float(np.max(out))


def exact_pipeline(scenario, spec: RiskSpec, eta: Eta = NORMAL) -> ExactPipeline:
    tree = _require_tree(scenario)
    if tree.n_paths > MAX_PATHS:
        raise OracleSizeError(f"{tree.n_paths} paths exceeds the oracle limit of {MAX_PATHS}")
    drivers = tree.all_drivers()
    batch = tree.batch(drivers)
    probs = tree.path_probs()
    dens = spec.densities(tree, drivers)
    inc = batch.increments
    lo, hi = _bounds_table(tree, drivers)
    N, T = drivers.shape
    m = spec.m

    v = np.zeros((N, T, m))
    for t in range(T):
        groups: dict[tuple, list[int]] = {}
        for k in range(N):
            groups.setdefault(tuple(drivers[k, :t]), []).append(k)
        for members in groups.values():
            pm = probs[members]
            for i in range(m):
                num = sum(probs[k] * dens[k, i] * inc[k, t] for k in members)
                cond = num / pm.sum()
                if abs(cond) <= ZERO_TOL * tree.s0:
                    cond = 0.0
                for k in members:
                    v[k, t, i] = (hi[k, t] - lo[k, t]) * cond

    c = np.array([sum(probs[k] * dens[k, i] * np.dot(lo[k], inc[k]) for k in range(N)) for i in range(m)])
    d_plus = np.array([float(np.sum(probs[:, None] * np.maximum(v[:, :, i], 0.0))) for i in range(m)])
    d_minus = np.array([float(np.sum(probs[:, None] * np.maximum(-v[:, :, i], 0.0))) for i in range(m)])
    return ExactPipeline(tree, spec, eta, probs, drivers, inc, dens, lo, hi, v, c + 0.0, d_plus, d_minus)


def exact_grid_minimum(pipeline: ExactPipeline, points) -> tuple[float, tuple[float, ...]]:
    """Smallest exact ``rho`` over explicit parameter vectors."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    vals = [pipeline.rho(p) for p in pts]
    k = int(np.argmin(vals))
    return float(vals[k]), tuple(float(x) for x in pts[k])


# ---------------------------------------------------------------- LP baseline


@dataclass(frozen=True)
class NodeHoldings(Strategy):
    """Holdings given per information set: ``values[(t, prefix)]``."""

    values: dict

    def holdings(self, paths: PathBatch) -> np.ndarray:
        out = np.empty((len(paths), paths.horizon))
        for k in range(len(paths)):
            z = paths.drivers[k]
            for t in range(paths.horizon):
                out[k, t] = self.values[(t, tuple(int(x) for x in z[:t]))]
        return out


@dataclass(frozen=True)
class CapitalLP:
    w0_min: float
    xi_node_values: dict  # (t, prefix) -> holding
    binding: tuple[int, ...]
    slack: tuple[float, ...]  # w0 + E(W f_i) - alpha_i at the optimum

    @property
    def strategy(self) -> NodeHoldings:
        return NodeHoldings(self.xi_node_values)


def tree_nodes(scenario: TreeScenario) -> list[tuple[int, tuple[int, ...]]]:
    B = scenario.branching
    out = []
    for t in range(scenario.horizon):
        rows = scenario.all_drivers()[:: B ** (scenario.horizon - t), :t] if t else np.zeros((1, 0))
        out.extend((t, tuple(int(x) for x in r)) for r in rows)
    return out


def min_capital_lp(scenario, spec: RiskSpec, tol: float = 1e-9) -> CapitalLP:
    """Least ``w0`` with ``w0 + E(W(xi) f_i) >= alpha_i`` for all ``i`` over adapted bounded ``xi``.

    Variables (all nonnegative): ``w0 = p - q``, ``xi_node = a_node + y_node``,
    slacks for ``y_node <= b_node - a_node`` and surpluses for the risk rows.
    """
    tree = _require_tree(scenario)
    nodes = tree_nodes(tree)
    if len(nodes) > MAX_NODES:
        raise OracleSizeError(f"{len(nodes)} nodes exceeds the LP limit of {MAX_NODES}")
    index = {node: j for j, node in enumerate(nodes)}
    drivers = tree.all_drivers()
    probs = tree.path_probs()
    inc = tree.batch(drivers).increments
    dens = spec.densities(tree, drivers)
    lo, hi = _bounds_table(tree, drivers)
    m, n_nodes = spec.m, len(nodes)

    coef = np.zeros((m, n_nodes))
    low = np.zeros(n_nodes)
    width = np.zeros(n_nodes)
    for k in range(len(drivers)):
        for t in range(tree.horizon):
            j = index[(t, tuple(int(x) for x in drivers[k, :t]))]
            coef[:, j] += probs[k] * dens[k] * inc[k, t]
            low[j], width[j] = lo[k, t], hi[k, t] - lo[k, t]

    # columns: p, q, y (n_nodes), slack (n_nodes), surplus (m)
    n_var = 2 + 2 * n_nodes + m
    a_eq = np.zeros((m + n_nodes, n_var))
    b_eq = np.zeros(m + n_nodes)
    for i in range(m):
        a_eq[i, 0], a_eq[i, 1] = 1.0, -1.0
        a_eq[i, 2 : 2 + n_nodes] = coef[i]
        a_eq[i, 2 + 2 * n_nodes + i] = -1.0
        b_eq[i] = spec.alphas[i] - coef[i] @ low
    for j in range(n_nodes):
        a_eq[m + j, 2 + j] = 1.0
        a_eq[m + j, 2 + n_nodes + j] = 1.0
        b_eq[m + j] = width[j]
    cost = np.zeros(n_var)
    cost[0], cost[1] = 1.0, -1.0
    sol = simplex(cost, a_eq, b_eq)
    w0 = float(sol.x[0] - sol.x[1])
    xi = low + sol.x[2 : 2 + n_nodes]
    slack = w0 + coef @ xi - np.asarray(spec.alphas)
    binding = tuple(int(i) for i in np.flatnonzero(np.abs(slack) <= tol))
    return CapitalLP(
        w0,
        {node: float(xi[j]) for node, j in index.items()},
        binding,
        tuple(float(x) for x in slack),
    )
