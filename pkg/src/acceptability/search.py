"""Grid minimisation of the estimated risk over strategy parameters.

One bank serves every round: its uniform certificate covers all ``s`` at
once, so refining the grid never requires fresh draws.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .estimator import Certificate, RhoEstimate, certificate_of, rho_hat_batch
from .sampler import SampleBank
from .weights import TiltedWeights

Box = tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class GridSpec:
    active_dims: tuple[int, ...]
    box: Box
    points_per_dim: int = 21
    refine_rounds: int = 3
    shrink_factor: float = 0.5
    tol: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "active_dims", tuple(int(i) for i in self.active_dims))
        object.__setattr__(self, "box", tuple((float(lo), float(hi)) for lo, hi in self.box))
        if len(self.box) != len(self.active_dims):
            raise ValueError("one (lo, hi) interval per active dimension")
        if any(not lo < hi for lo, hi in self.box):
            raise ValueError("every interval needs lo < hi")
        if self.points_per_dim < 2:
            raise ValueError("points_per_dim must be at least 2")
        if self.refine_rounds < 1:
            raise ValueError("need at least one round")
        if not 0 < self.shrink_factor <= 1:
            raise ValueError("shrink_factor must lie in (0, 1]")


@dataclass(frozen=True)
class RoundTrace:
    round: int
    box: Box
    best_s: tuple[float, ...]
    best_rho_hat: float
    n_points: int


@dataclass(frozen=True)
class SearchResult:
    w0_star: float
    s_star: tuple[float, ...]
    argmax_i: int
    per_i: tuple[float, ...]
    trace: tuple[RoundTrace, ...]
    certificate: Certificate
    n_evaluated: int
    note: str = ""


def default_box(weights: TiltedWeights, dims: Sequence[int] | None = None) -> Box:
    """``[-B, B]`` per dimension with ``B = 10 max(1, max alpha / d)``."""
    dims = weights.active if dims is None else dims
    top = max(weights.spec.alphas)
    out = []
    for i in dims:
        d = max(weights.d_plus[i], weights.d_minus[i])
        b = 10.0 * max(1.0, top / d)
        out.append((-b, b))
    return tuple(out)


def default_grid(weights: TiltedWeights, **kw) -> GridSpec:
    return GridSpec(weights.active, default_box(weights), **kw)


def refine(box: Box, best_point: Sequence[float], shrink_factor: float, outer: Box | None = None) -> Box:
    """Box around ``best_point`` with widths scaled by ``shrink_factor``.

    The window is centred on the point, slid back inside ``outer`` when it
    pokes out, and clipped only if it is wider than ``outer``.
    """
    outer = box if outer is None else outer
    out = []
    for (lo, hi), (olo, ohi), x in zip(box, outer, best_point):
        half = 0.5 * (hi - lo) * shrink_factor
        a, b = x - half, x + half
        if a < olo:
            a, b = olo, b + (olo - a)
        if b > ohi:
            a, b = a - (b - ohi), ohi
        out.append((max(olo, a), min(ohi, b)))
    return tuple(out)


def grid_points(box: Box, points_per_dim: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, points_per_dim) if hi > lo else np.array([lo]) for lo, hi in box]
    return np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, len(box))


def _embed(points: np.ndarray, dims: Sequence[int], m: int) -> np.ndarray:
    full = np.zeros((points.shape[0], m))
    full[:, list(dims)] = points
    return full


def _best(estimates: Sequence[RhoEstimate]) -> RhoEstimate:
    """Smallest rho_hat; ties go to the lexicographically smallest ``s``."""
    return min(estimates, key=lambda e: (e.rho_hat, e.s))


def evaluate_points(weights: TiltedWeights, bank: SampleBank, points, workers: int = 1) -> SearchResult:
    """Minimise over an explicit list of full ``m``-vectors."""
    est = rho_hat_batch(weights, bank, points, workers)
    best = _best(est)
    tr = RoundTrace(0, (), best.s, best.rho_hat, len(est))
    return SearchResult(best.rho_hat, best.s, best.argmax_i, best.per_i, (tr,), best.certificate, len(est))


def degenerate_result(weights: TiltedWeights, bank: SampleBank | None = None) -> SearchResult:
    d = np.asarray(weights.spec.alphas) - np.asarray(weights.c)
    i = int(np.argmax(d))
    cert = certificate_of(bank) if bank is not None else Certificate(0.0, 0.0, 0)
    return SearchResult(
        float(d[i]),
        (0.0,) * weights.m,
        i,
        tuple(float(x) for x in d),
        (),
        cert,
        0,
        note="no active dimensions: every weight process is zero, so the strategy cannot move the risk; "
        "w0* = max_i (alpha_i - c_i) exactly",
    )


def run_search(weights: TiltedWeights, bank: SampleBank, grid: GridSpec | None = None, workers: int = 1) -> SearchResult:
    if grid is None:
        if not weights.active:
            return degenerate_result(weights, bank)
        grid = default_grid(weights)
    if not grid.active_dims:
        return degenerate_result(weights, bank)
    inactive = [i for i in grid.active_dims if i not in weights.active]
    if inactive:
        raise ValueError(f"grid searches dimensions {inactive} whose weight processes vanish")
    box = grid.box
    best: RhoEstimate | None = None
    trace = []
    total = 0
    for r in range(grid.refine_rounds):
        pts = _embed(grid_points(box, grid.points_per_dim), grid.active_dims, weights.m)
        est = rho_hat_batch(weights, bank, pts, workers)
        total += len(est)
        round_best = _best(est)
        previous = best
        best = round_best if best is None else _best([best, round_best])
        trace.append(RoundTrace(r, box, best.s, best.rho_hat, len(est)))
        if previous is not None and previous.rho_hat - best.rho_hat < grid.tol:
            break
        centre = [best.s[i] for i in grid.active_dims]
        box = refine(box, centre, grid.shrink_factor, grid.box)
    return SearchResult(best.rho_hat, best.s, best.argmax_i, best.per_i, tuple(trace), best.certificate, total)


def write_trace_csv(result: SearchResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["round", "box", "best_s", "best_rho_hat", "n_points"])
        for tr in result.trace:
            w.writerow([tr.round, repr(tr.box), repr(tr.best_s), repr(tr.best_rho_hat), tr.n_points])
