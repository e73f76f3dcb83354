"""VC machinery and certified sample sizes.

All bound arithmetic is done in log space: ``4 * n**(2V)`` overflows a double
long before ``n`` reaches the sample sizes we need.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .weights import TiltedWeights

log = logging.getLogger(__name__)

DEVROYE = "devroye"
BASIC = "basic"
VARIANTS = (DEVROYE, BASIC)


def halfspace_vc_dim(m: int) -> int:
    """Dimension bound for ``{sum_j r_j v_j + r_{m+1} Z > 0}``: the span has dimension ``m + 1``."""
    if m < 1:
        raise ValueError("m must be at least 1")
    return m + 1


def _sauer_regime(n: int, vc_dim: int) -> bool:
    return vc_dim > 2 and n > 2 * vc_dim


def sauer_bound(n: int, vc_dim: int) -> int:
    """Shatter-coefficient bound ``n**V``, or the trivial ``2**n`` outside Sauer's regime."""
    if _sauer_regime(n, vc_dim):
        return n**vc_dim
    return 2**n


def log_sauer_bound(n: int, vc_dim: int) -> float:
    if _sauer_regime(n, vc_dim):
        return vc_dim * math.log(n)
    return n * math.log(2.0)


class ShatterSizeError(ValueError):
    pass


def _strictly_separable(pos: np.ndarray, neg: np.ndarray) -> bool:
    """Is there ``r`` with ``r.x > 0`` on ``pos`` and ``r.x <= 0`` on ``neg``?"""
    if len(pos) == 0:
        return True  # r = 0
    d = pos.shape[1]
    # maximise s subject to r.x >= s (pos), r.x <= 0 (neg), |r| <= 1, s <= 1
    c = np.zeros(d + 1)
    c[-1] = -1.0
    rows = [np.hstack([-pos, np.ones((len(pos), 1))])]
    if len(neg):
        rows.append(np.hstack([neg, np.zeros((len(neg), 1))]))
    a_ub = np.vstack(rows)
    b_ub = np.zeros(a_ub.shape[0])
    bounds = [(-1.0, 1.0)] * d + [(None, 1.0)]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    return res.status == 0 and -res.fun > 1e-9


def empirical_shatter(points: Sequence[Sequence[float]], d: int | None = None, max_points: int = 20) -> int:
    """Number of distinct subsets ``{x : r.x > 0} & points`` over all ``r``.

    Depth-first over the points, deciding for each whether it is in or out;
    a branch is pruned as soon as its partial pattern has no realizing ``r``
    (realizability is monotone under restriction), so every realizable subset
    is visited exactly once.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1 if d is None else d)
    if d is not None and pts.shape[1] != d:
        raise ValueError(f"points have dimension {pts.shape[1]}, expected {d}")
    n = pts.shape[0]
    if n > max_points:
        raise ShatterSizeError(f"exhaustive shatter count limited to {max_points} points, got {n}")

    count = 0

    def walk(k: int, pos: list[int], neg: list[int]):
        nonlocal count
        if k == n:
            count += 1
            return
        for side in ("in", "out"):
            p2 = pos + [k] if side == "in" else pos
            n2 = neg + [k] if side == "out" else neg
            if _strictly_separable(pts[p2], pts[n2]):
                walk(k + 1, p2, n2)

    walk(0, [], [])
    return count


def log_deviation_bound(n: int, epsilon: float, vc_dim: int, variant: str = DEVROYE) -> float:
    """Log of the bound on ``P(sup |empirical - true| > epsilon)`` after ``n`` iid draws.

    ``devroye``: ``4 n^(2V) exp(-2 n eps^2 + 4 eps + 4 eps^2)``.
    ``basic``:   ``8 s_n exp(-n eps^2 / 32)`` with ``s_n`` from :func:`sauer_bound`.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if variant == DEVROYE:
        return math.log(4.0) + 2 * vc_dim * math.log(n) - 2 * n * epsilon**2 + 4 * epsilon + 4 * epsilon**2
    if variant == BASIC:
        return math.log(8.0) + log_sauer_bound(n, vc_dim) - n * epsilon**2 / 32.0
    raise ValueError(f"unknown bound variant {variant!r}")


def deviation_bound(n: int, epsilon: float, vc_dim: int, variant: str = DEVROYE) -> float:
    lb = log_deviation_bound(n, epsilon, vc_dim, variant)
    return math.exp(lb) if lb < 700 else math.inf


def minimal_sample_size(epsilon: float, delta: float, vc_dim: int, variant: str = DEVROYE) -> int:
    """Smallest ``n`` whose bound is ``<= delta``.

    Both bounds rise and then fall in ``n`` and start above 1, so the feasible
    set is a half-line: walk past the peak, double until feasible, bisect.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    target = math.log(delta)

    def ok(n):
        return log_deviation_bound(n, epsilon, vc_dim, variant) <= target

    if variant == DEVROYE:
        lo = max(2 * vc_dim, math.ceil(vc_dim / epsilon**2))
    else:
        lo = max(2 * vc_dim + 1, math.ceil(32 * vc_dim / epsilon**2))
        if vc_dim <= 2 and epsilon**2 / 32 <= math.log(2.0):
            raise ValueError("basic bound never falls below 1 without Sauer's regime (V <= 2)")
    if ok(lo):
        # only when the 2V floor sits past the peak (very large epsilon)
        return lo
    hi = lo
    while not ok(hi):
        lo = hi
        hi *= 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def certified_epsilon(n: int, delta: float, vc_dim: int, variant: str = DEVROYE) -> float:
    """Smallest relative precision certified at level ``delta`` by ``n`` draws."""
    target = math.log(delta)
    lo, hi = 0.0, 1.0
    while log_deviation_bound(n, hi, vc_dim, variant) > target:
        lo, hi = hi, hi * 2
        if hi > 1e6:
            return math.inf
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if log_deviation_bound(n, mid, vc_dim, variant) <= target:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class PlanEntry:
    i: int
    sign: int
    d: float
    kappa: int
    relative_epsilon: float
    bound: float

    @property
    def label(self) -> str:
        return f"{self.i + 1}{'+' if self.sign > 0 else '-'}"


@dataclass(frozen=True)
class SamplePlan:
    epsilon: float
    delta: float
    vc_dim: int
    variant: str
    entries: tuple[PlanEntry, ...]

    @property
    def aleph(self) -> int:
        return len(self.entries)

    def kappa(self, i: int, sign: int) -> int:
        for e in self.entries:
            if e.i == i and e.sign == sign:
                return e.kappa
        raise KeyError((i, sign))

    def with_kappas(self, kappas: dict[tuple[int, int], int]) -> "SamplePlan":
        """Same pairs, overridden sizes; the bound column is recomputed."""
        entries = []
        for e in self.entries:
            k = int(kappas.get((e.i, e.sign), e.kappa))
            b = deviation_bound(k, e.relative_epsilon, self.vc_dim, self.variant)
            entries.append(PlanEntry(e.i, e.sign, e.d, k, e.relative_epsilon, b))
        return SamplePlan(self.epsilon, self.delta, self.vc_dim, self.variant, tuple(entries))

    def certified_epsilon(self) -> float:
        """Uniform precision the actual sizes certify at level ``delta`` per pair."""
        if not self.entries:
            return 0.0
        return max(e.d * certified_epsilon(e.kappa, self.delta, self.vc_dim, self.variant) for e in self.entries)

    def table(self) -> list[dict]:
        return [
            {
                "pair": e.label,
                "d": e.d,
                "eps_over_d": e.relative_epsilon,
                "kappa": e.kappa,
                "bound": e.bound,
            }
            for e in self.entries
        ]

    def format_table(self) -> str:
        lines = [f"{'pair':>5} {'d':>12} {'eps/d':>12} {'kappa':>10} {'bound':>12}"]
        for r in self.table():
            lines.append(
                f"{r['pair']:>5} {r['d']:12.6g} {r['eps_over_d']:12.6g} {r['kappa']:10d} {r['bound']:12.4g}"
            )
        return "\n".join(lines)


def plan_samples(
    weights: TiltedWeights, epsilon: float, delta: float, variant: str = DEVROYE
) -> SamplePlan:
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if variant not in VARIANTS:
        raise ValueError(f"unknown bound variant {variant!r}")
    vc = halfspace_vc_dim(weights.m)
    entries = []
    for i, sign in weights.pairs():
        d = weights.normalizer(i, sign)
        rel = epsilon / d
        k = minimal_sample_size(rel, delta, vc, variant)
        entries.append(PlanEntry(i, sign, d, k, rel, deviation_bound(k, rel, vc, variant)))
    if not entries:
        log.warning("all tilted measures are zero (aleph = 0); nothing to sample")
    return SamplePlan(epsilon, delta, vc, variant, tuple(entries))


def bound_comparison(epsilons: Sequence[float], ns: Sequence[int], vc_dim: int) -> list[dict]:
    """Rows of both bounds side by side for reporting."""
    rows = []
    for eps in epsilons:
        for n in ns:
            rows.append(
                {
                    "n": n,
                    "epsilon": eps,
                    "vc_dim": vc_dim,
                    "devroye": deviation_bound(n, eps, vc_dim, DEVROYE),
                    "basic": deviation_bound(n, eps, vc_dim, BASIC),
                }
            )
    return rows
