"""Uniform empirical estimates of ``rho(W(xi(s)))`` from a sample bank.

For each nonzero tilted pair the estimator only needs the fraction of draws
with ``features . s > z``. Those fractions are integer counts, so chunked or
threaded evaluation reduces exactly and results do not depend on the worker
count.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .sampler import CertificationError, SampleBank, TiltedBatch, ZeroMeasureError
from .weights import TiltedWeights

CHUNK = 8192


@dataclass(frozen=True)
class Certificate:
    epsilon: float
    delta: float
    aleph: int

    @property
    def failure_probability(self) -> float:
        return min(1.0, self.aleph * self.delta)

    @property
    def confidence(self) -> float:
        return 1.0 - self.failure_probability

    def as_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "delta": self.delta,
            "aleph": self.aleph,
            "failure_probability_at_most": self.failure_probability,
            "confidence_at_least": self.confidence,
        }


@dataclass(frozen=True)
class RhoEstimate:
    s: tuple[float, ...]
    rho_hat: float
    per_i: tuple[float, ...]
    argmax_i: int
    certificate: Certificate


def _as_grid(grid, m: int) -> np.ndarray:
    g = np.atleast_2d(np.asarray(grid, dtype=float))
    if g.shape[1] != m:
        raise ValueError(f"parameter vectors must have m={m} entries, got {g.shape[1]}")
    return g


def _count_chunk(features: np.ndarray, z: np.ndarray, grid: np.ndarray, cols: list[int]) -> np.ndarray:
    if not cols:
        lam = np.zeros((features.shape[0], grid.shape[0]))
    else:
        j = cols[0]
        lam = features[:, j : j + 1] * grid[None, :, j]
        for j in cols[1:]:
            lam += features[:, j : j + 1] * grid[None, :, j]
    # strict inequality: ties count as 0
    return np.count_nonzero(lam > z[:, None], axis=0)


def batch_counts(batch: TiltedBatch, grid: np.ndarray, workers: int = 1, chunk: int = CHUNK) -> np.ndarray:
    """Number of draws with ``lambda_t(s) - z > 0`` for every row of ``grid``."""
    n = len(batch)
    if n == 0:
        raise ZeroMeasureError(f"empty sample list for pair {(batch.i, batch.sign)}")
    feats = batch.features
    cols = [j for j in range(grid.shape[1]) if np.any(grid[:, j] != 0.0) and np.any(feats[:, j] != 0.0)]
    starts = list(range(0, n, chunk))

    def run(a):
        return _count_chunk(feats[a : a + chunk], batch.z[a : a + chunk], grid, cols)

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(a) for a in starts]
    return np.sum(parts, axis=0, dtype=np.int64)


def empirical_frequency(batch: TiltedBatch, s: Sequence[float]) -> float:
    """Fraction of draws with ``features . s > z``."""
    grid = _as_grid(s, batch.features.shape[1])
    return float(batch_counts(batch, grid)[0] / len(batch))


def certificate_of(bank: SampleBank) -> Certificate:
    return Certificate(bank.epsilon, bank.delta, bank.aleph)


def _check_bank(weights: TiltedWeights, bank: SampleBank):
    for pair in weights.pairs():
        if pair not in bank.batches or len(bank.batches[pair]) == 0:
            raise CertificationError(f"bank has no draws for nonzero tilted pair {pair}")


def d_matrix(weights: TiltedWeights, bank: SampleBank, grid, workers: int = 1) -> np.ndarray:
    """``(G, m)`` matrix of ``D_i(s)`` for each grid row ``s``."""
    grid = _as_grid(grid, weights.m)
    _check_bank(weights, bank)
    alphas = np.asarray(weights.spec.alphas)
    c = np.asarray(weights.c)
    out = np.tile(alphas - c, (grid.shape[0], 1))
    for (i, sign) in weights.pairs():
        b = bank.batches[(i, sign)]
        freq = batch_counts(b, grid, workers) / len(b)
        out[:, i] += -sign * weights.normalizer(i, sign) * freq
    return out


def d_i_of_s(weights: TiltedWeights, bank: SampleBank, i: int, s: Sequence[float]) -> float:
    return float(d_matrix(weights, bank, [s])[0, i])


def rho_hat_batch(weights: TiltedWeights, bank: SampleBank, grid, workers: int = 1) -> list[RhoEstimate]:
    grid = _as_grid(grid, weights.m)
    if grid.shape[0] == 0:
        raise ValueError("empty grid")
    d = d_matrix(weights, bank, grid, workers)
    cert = certificate_of(bank)
    arg = np.argmax(d, axis=1)
    return [
        RhoEstimate(tuple(float(x) for x in grid[k]), float(d[k, arg[k]]), tuple(float(x) for x in d[k]), int(arg[k]), cert)
        for k in range(grid.shape[0])
    ]


def rho_hat(weights: TiltedWeights, bank: SampleBank, s: Sequence[float]) -> RhoEstimate:
    return rho_hat_batch(weights, bank, [s])[0]


def write_estimates_csv(estimates: Sequence[RhoEstimate], path) -> None:
    if not estimates:
        return
    m = len(estimates[0].s)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"s_{j + 1}" for j in range(m)] + [f"D_{j + 1}" for j in range(m)] + ["rho_hat"])
        for e in estimates:
            w.writerow([repr(x) for x in e.s] + [repr(x) for x in e.per_i] + [repr(e.rho_hat)])
