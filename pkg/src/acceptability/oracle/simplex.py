"""Dense two-phase tableau simplex with Bland's rule.

Solves ``min c.x  s.t.  A x = b, x >= 0``. Meant for the few-hundred-variable
linear programs of the tree oracle; no attempt at sparsity or numerical
refinement beyond a pivot tolerance.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InfeasibleError(ValueError):
    pass


class UnboundedError(ValueError):
    pass


@dataclass(frozen=True)
class LPSolution:
    x: np.ndarray
    fun: float
    iterations: int


def _pivot(tab: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    for r in range(tab.shape[0]):
        if r != row and tab[r, col] != 0.0:
            tab[r] -= tab[r, col] * tab[row]


def _run(tab: np.ndarray, basis: list[int], ncols: int, tol: float, max_iter: int) -> int:
    """Iterate on ``tab`` whose last row holds reduced costs; columns ``>= ncols`` may not enter."""
    it = 0
    while True:
        costs = tab[-1, :ncols]
        entering = next((j for j in range(ncols) if costs[j] < -tol), None)
        if entering is None:
            return it
        col = tab[:-1, entering]
        rows = [r for r in range(len(basis)) if col[r] > tol]
        if not rows:
            raise UnboundedError("objective unbounded below")
        ratios = [tab[r, -1] / col[r] for r in rows]
        best = min(ratios)
        # Bland: among tied rows leave the smallest basic index
        leaving = min((r for r, q in zip(rows, ratios) if q <= best + tol), key=lambda r: basis[r])
        _pivot(tab, leaving, entering)
        basis[leaving] = entering
        it += 1
        if it > max_iter:
            raise RuntimeError("simplex iteration limit reached")


def simplex(c, a_eq, b_eq, tol: float = 1e-10, max_iter: int = 50_000) -> LPSolution:
    c = np.asarray(c, dtype=float)
    a = np.array(a_eq, dtype=float, ndmin=2)
    b = np.array(b_eq, dtype=float)
    m, n = a.shape
    neg = b < 0
    a[neg] *= -1
    b[neg] *= -1

    # phase 1: artificials in columns n..n+m-1
    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = a
    tab[:m, n : n + m] = np.eye(m)
    tab[:m, -1] = b
    tab[-1, :n] = -a.sum(axis=0)
    tab[-1, -1] = -b.sum()
    basis = list(range(n, n + m))
    it = _run(tab, basis, n + m, tol, max_iter)
    if -tab[-1, -1] > 1e-8 * max(1.0, np.abs(b).max(initial=0.0)):
        raise InfeasibleError("no feasible point")

    # drive remaining artificials out; drop rows that are redundant
    keep = []
    for r in range(m):
        if basis[r] >= n:
            j = next((j for j in range(n) if abs(tab[r, j]) > tol), None)
            if j is None:
                continue
            _pivot(tab, r, j)
            basis[r] = j
        keep.append(r)
    tab = np.vstack([tab[keep][:, list(range(n)) + [n + m]], np.zeros((1, n + 1))])
    basis = [basis[r] for r in keep]

    # phase 2
    tab[-1, :n] = c
    for r, j in enumerate(basis):
        if tab[-1, j] != 0.0:
            tab[-1] -= tab[-1, j] * tab[r]
    it += _run(tab, basis, n, tol, max_iter)
    x = np.zeros(n)
    for r, j in enumerate(basis):
        x[j] = tab[r, -1]
    return LPSolution(x, float(c @ x), it)
