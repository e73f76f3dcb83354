"""Sample banks drawn from the tilted measures ``mu_i^{+/-} (x) eta``.

A tilted measure lives on (path, period) pairs with density proportional to
``v_t^{+/-}(f_i)`` against ``P (x) Uniform{0..T-1}``. Three routes:

``direct``     scenario-specific exact sampler (Gaussian walk with mean-shift
               densities: pick ``t`` by its mass, tilt the first ``t`` drivers);
``exact``      categorical draw over all (path, t) cells of a finite tree;
``rejection``  propose from ``P (x) U_T`` and accept with probability
               ``v^{+/-} / M``; an observed ratio above ``M`` aborts.

Only iid routes are offered; the uniform certificate assumes independent draws.
"""
from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .market import DriverPath, GBMScenario, PathBatch, TreeScenario
from .vcbound import SamplePlan
from .weights import NORMAL, Eta, TiltedWeights, _gbm_growth, _shift_of, get_eta, v_batch

log = logging.getLogger(__name__)

BANK_FORMAT_VERSION = 1
DEFAULT_CHUNK = 1 << 17


class CertificationError(RuntimeError):
    pass


class ZeroMeasureError(ValueError):
    pass


@dataclass(frozen=True)
class TiltedSample:
    path: DriverPath
    t: int
    z: float
    features: np.ndarray


@dataclass(frozen=True)
class TiltedBatch:
    """Draws for one ``(i, sign)`` pair, stored column-wise."""

    i: int
    sign: int
    drivers: np.ndarray  # (n, T)
    t: np.ndarray  # (n,)
    z: np.ndarray  # (n,)
    features: np.ndarray  # (n, m)

    def __len__(self) -> int:
        return self.z.shape[0]

    def sample(self, k: int, scenario) -> TiltedSample:
        d = self.drivers[k]
        return TiltedSample(DriverPath(d, scenario.prices(d[None, :])[0]), int(self.t[k]), float(self.z[k]), self.features[k])

    @classmethod
    def concat(cls, parts: list["TiltedBatch"]) -> "TiltedBatch":
        first = parts[0]
        return cls(
            first.i,
            first.sign,
            np.concatenate([p.drivers for p in parts]),
            np.concatenate([p.t for p in parts]),
            np.concatenate([p.z for p in parts]),
            np.concatenate([p.features for p in parts]),
        )


def _signed_label(i: int, sign: int) -> str:
    return f"{i + 1}{'+' if sign > 0 else '-'}"


# ---------------------------------------------------------------- routes


def _has_direct(weights: TiltedWeights, i: int) -> bool:
    sc = weights.scenario
    return isinstance(sc, GBMScenario) and sc.constant_bounds and _shift_of(weights.spec.measures[i]) is not None


def _direct_gbm(weights: TiltedWeights, i: int, sign: int, n: int, rng: np.random.Generator):
    sc: GBMScenario = weights.scenario
    shift = _shift_of(weights.spec.measures[i])
    g = _gbm_growth(sc, shift)
    T = sc.horizon
    mass = np.array([g**t for t in range(T)])
    t = rng.choice(T, size=n, p=mass / mass.sum())
    drivers = rng.standard_normal((n, T))
    drivers += (sc.vol + shift) * (np.arange(T)[None, :] < t[:, None])
    return drivers, t


def tilted_cell_probs(weights: TiltedWeights, i: int, sign: int) -> np.ndarray:
    """Exact ``(n_paths, T)`` table of the tilted law on a finite tree."""
    sc = weights.scenario
    if not isinstance(sc, TreeScenario):
        raise TypeError("exact tilted law needs a finite tree")
    paths = sc.batch(sc.all_drivers())
    p = sc.path_probs()
    cells = np.column_stack(
        [np.maximum(sign * v_batch(sc, weights.spec, i, paths, t), 0.0) * p for t in range(sc.horizon)]
    )
    total = cells.sum()
    if not total > 0:
        raise ZeroMeasureError(f"tilted measure {_signed_label(i, sign)} is zero")
    return cells / total


def _exact_tree(weights: TiltedWeights, i: int, sign: int, n: int, rng: np.random.Generator):
    sc: TreeScenario = weights.scenario
    probs = tilted_cell_probs(weights, i, sign)
    k = rng.choice(probs.size, size=n, p=probs.ravel())
    path_idx, t = np.divmod(k, sc.horizon)
    return sc.all_drivers()[path_idx], t


def tree_envelope(weights: TiltedWeights, i: int, sign: int) -> float:
    sc = weights.scenario
    paths = sc.batch(sc.all_drivers())
    return max(float(np.max(np.maximum(sign * v_batch(sc, weights.spec, i, paths, t), 0.0))) for t in range(sc.horizon))


def _rejection(weights, i, sign, n, rng, envelope: float, batch: int = 4096, max_rounds: int = 100000):
    sc = weights.scenario
    T = sc.horizon
    got_d, got_t = [], []
    have = 0
    rounds = 0
    while have < n:
        rounds += 1
        if rounds > max_rounds:
            raise CertificationError(f"rejection sampler for {_signed_label(i, sign)} made no progress")
        drivers = sc.sample_drivers(rng, batch)
        t = rng.integers(0, T, size=batch)
        paths = sc.batch(drivers)
        ratio = np.zeros(batch)
        for tt in range(T):
            rows = t == tt
            if rows.any():
                ratio[rows] = np.maximum(sign * v_batch(sc, weights.spec, i, paths.take(rows), tt), 0.0)
        if np.any(ratio > envelope * (1 + 1e-12)):
            raise CertificationError(
                f"envelope M={envelope!r} violated for {_signed_label(i, sign)}: observed {ratio.max()!r}"
            )
        accept = rng.random(batch) * envelope < ratio
        got_d.append(drivers[accept])
        got_t.append(t[accept])
        have += int(accept.sum())
    return np.concatenate(got_d)[:n], np.concatenate(got_t)[:n]


def sample_tilted(
    weights: TiltedWeights,
    i: int,
    sign: int,
    n: int,
    rng: np.random.Generator,
    eta: Eta = NORMAL,
    route: str = "auto",
    envelope: float | None = None,
) -> TiltedBatch:
    """``n`` iid draws of ``(path, t, z)`` from ``mu_i^sign (x) eta`` with features attached."""
    if weights.normalizer(i, sign) <= 0:
        raise ZeroMeasureError(f"tilted measure {_signed_label(i, sign)} has zero mass")
    sc = weights.scenario
    if route == "auto":
        if _has_direct(weights, i):
            route = "direct"
        elif isinstance(sc, TreeScenario):
            route = "exact"
        elif envelope is not None:
            route = "rejection"
        else:
            raise CertificationError("no direct sampler and no rejection envelope supplied")
    if route == "direct":
        if not _has_direct(weights, i):
            raise CertificationError("scenario provides no direct tilted sampler")
        drivers, t = _direct_gbm(weights, i, sign, n, rng)
    elif route == "exact":
        drivers, t = _exact_tree(weights, i, sign, n, rng)
    elif route == "rejection":
        if envelope is None:
            if not isinstance(sc, TreeScenario):
                raise CertificationError("rejection sampling needs an envelope constant")
            envelope = tree_envelope(weights, i, sign)
        drivers, t = _rejection(weights, i, sign, n, rng, float(envelope))
    else:
        raise ValueError(f"unknown sampling route {route!r}")
    z = eta.sample(rng, n)
    t = np.asarray(t, dtype=np.int64)
    features = weights.features(sc.batch(drivers), t)
    return TiltedBatch(i, sign, drivers, t.astype(np.int16), z, features)


# ---------------------------------------------------------------- bank


@dataclass
class SampleBank:
    plan: SamplePlan
    seed: int
    eta: Eta
    batches: dict[tuple[int, int], TiltedBatch] = field(default_factory=dict)
    key: str = ""

    @property
    def epsilon(self) -> float:
        return self.plan.certified_epsilon()

    @property
    def delta(self) -> float:
        return self.plan.delta

    @property
    def aleph(self) -> int:
        return self.plan.aleph

    def __getitem__(self, pair: tuple[int, int]) -> TiltedBatch:
        return self.batches[pair]

    def sizes(self) -> dict[str, int]:
        return {_signed_label(i, s): len(b) for (i, s), b in self.batches.items()}


def _stream(seed: int, i: int, sign: int, chunk: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(i, 0 if sign > 0 else 1, chunk))
    return np.random.default_rng(ss)


def build_bank(
    weights: TiltedWeights,
    plan: SamplePlan,
    seed: int,
    eta: Eta = NORMAL,
    workers: int = 1,
    route: str = "auto",
    envelopes: dict[tuple[int, int], float] | None = None,
    chunk_size: int = DEFAULT_CHUNK,
    key: str = "",
) -> SampleBank:
    """Draw every planned pair.

    Chunk boundaries and per-chunk streams depend only on ``(seed, i, sign,
    chunk index)``, so the bank is the same for any ``workers``.
    """
    envelopes = envelopes or {}
    jobs = []
    for e in plan.entries:
        for c, start in enumerate(range(0, e.kappa, chunk_size)):
            jobs.append((e.i, e.sign, c, min(chunk_size, e.kappa - start)))

    def run(job):
        i, sign, c, n = job
        return sample_tilted(weights, i, sign, n, _stream(seed, i, sign, c), eta, route, envelopes.get((i, sign)))

    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    grouped: dict[tuple[int, int], list[TiltedBatch]] = {}
    for job, part in zip(jobs, parts):
        grouped.setdefault((job[0], job[1]), []).append(part)
    batches = {pair: TiltedBatch.concat(chunks) for pair, chunks in grouped.items()}
    return SampleBank(plan, seed, eta, batches, key)


def config_key(payload: dict) -> str:
    """Stable hash of everything a bank's certificate depends on."""
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def save_bank(bank: SampleBank, path: str | Path) -> None:
    meta = {
        "format_version": BANK_FORMAT_VERSION,
        "key": bank.key,
        "seed": bank.seed,
        "eta": bank.eta.name,
        "plan": {
            "epsilon": bank.plan.epsilon,
            "delta": bank.plan.delta,
            "vc_dim": bank.plan.vc_dim,
            "variant": bank.plan.variant,
            "entries": [e.__dict__ for e in bank.plan.entries],
        },
    }
    arrays = {"meta": np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)}
    for (i, sign), b in bank.batches.items():
        tag = _signed_label(i, sign)
        arrays[f"{tag}__drivers"] = b.drivers
        arrays[f"{tag}__t"] = b.t
        arrays[f"{tag}__z"] = b.z
        arrays[f"{tag}__features"] = b.features
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_bank(path: str | Path, expected_key: str | None = None) -> SampleBank:
    from .vcbound import PlanEntry

    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta.get("format_version") != BANK_FORMAT_VERSION:
            raise CertificationError(f"bank format {meta.get('format_version')} is not {BANK_FORMAT_VERSION}")
        if expected_key is not None and meta["key"] != expected_key:
            raise CertificationError(
                f"bank {path} was built for key {meta['key']}, config needs {expected_key}; reuse would void the certificate"
            )
        p = meta["plan"]
        entries = tuple(PlanEntry(**e) for e in p["entries"])
        plan = SamplePlan(p["epsilon"], p["delta"], p["vc_dim"], p["variant"], entries)
        batches = {}
        for e in entries:
            tag = _signed_label(e.i, e.sign)
            batches[(e.i, e.sign)] = TiltedBatch(
                e.i, e.sign, data[f"{tag}__drivers"], data[f"{tag}__t"], data[f"{tag}__z"], data[f"{tag}__features"]
            )
    return SampleBank(plan, meta["seed"], get_eta(meta["eta"]), batches, meta["key"])


def export_csv(bank: SampleBank, path: str | Path) -> None:
    """Columns ``i, sign, t, z, v_1..v_m``; meant for inspection, not reload."""
    rows = []
    for (i, sign), b in sorted(bank.batches.items()):
        n = len(b)
        rows.append(np.column_stack([np.full(n, i + 1), np.full(n, sign), b.t, b.z, b.features]))
    m = rows[0].shape[1] - 4 if rows else 0
    header = ",".join(["i", "sign", "t", "z"] + [f"v_{j + 1}" for j in range(m)])
    data = np.vstack(rows) if rows else np.empty((0, 4))
    np.savetxt(path, data, delimiter=",", header=f"# bank format {BANK_FORMAT_VERSION}\n{header}", comments="", fmt="%.17g")
