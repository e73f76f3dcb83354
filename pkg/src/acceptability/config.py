"""Run configuration: YAML in, validated dataclasses out."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .market import GBMScenario, MarketScenario, TreeScenario
from .risk import NormalShift, ReferenceMeasure, RiskSpec, ScenarioMeasure, TreeMeasure
from .search import GridSpec
from .vcbound import VARIANTS
from .weights import get_eta


class ConfigError(ValueError):
    pass


def _section(raw: dict, name: str, required: bool = True) -> dict:
    val = raw.get(name)
    if val is None:
        if required:
            raise ConfigError(f"missing section {name!r}")
        return {}
    if not isinstance(val, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    return val


def _number(x, what: str) -> float:
    """Floats, or the strings ``exp(x)``/``e^x`` so penalties like e^4 can be written exactly."""
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return float(x)
    if isinstance(x, str):
        s = x.replace(" ", "")
        for pre, post in (("exp(", ")"), ("e^", "")):
            if s.startswith(pre) and s.endswith(post):
                return math.exp(float(s[len(pre) : len(s) - len(post)]))
    raise ConfigError(f"{what}: expected a number, got {x!r}")


def build_scenario(sec: dict) -> MarketScenario:
    kind = sec.get("kind")
    common = dict(
        horizon=int(sec.get("horizon", 0)),
        s0=_number(sec.get("s0", 0), "scenario.s0"),
        lower=_number(sec.get("lower", 0.0), "scenario.lower"),
        upper=_number(sec.get("upper", 1.0), "scenario.upper"),
    )
    try:
        if kind == "gbm":
            return GBMScenario(**common, drift=_number(sec.get("drift", 0.0), "drift"), vol=_number(sec.get("vol", 1.0), "vol"))
        if kind == "tree":
            return TreeScenario(**common, factors=tuple(sec["factors"]), probs=tuple(sec["probs"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"scenario: {exc}") from exc
    raise ConfigError(f"scenario.kind must be 'gbm' or 'tree', got {kind!r}")


def build_measure(item: dict, scenario: MarketScenario) -> ScenarioMeasure:
    density = item.get("density")
    try:
        if density == "reference":
            return ReferenceMeasure()
        if density == "normal_shift":
            return NormalShift(_number(item["shift"], "shift"))
        if density == "tree":
            if "path_probs" in item:
                return TreeMeasure(tuple(float(x) for x in item["path_probs"]))
            return TreeMeasure.from_step_probs(scenario, item["step_probs"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"risk measure {item!r}: {exc}") from exc
    raise ConfigError(f"unknown density {density!r}")


@dataclass(frozen=True)
class SamplingConfig:
    kappa: dict = field(default_factory=dict)  # "1+" -> size
    scale: float = 1.0
    route: str = "auto"
    variant: str = "devroye"


@dataclass(frozen=True)
class EvalConfig:
    s: tuple[float, ...] | None = None
    w0: float | None = None
    crosscheck_n: int = 100_000
    crosscheck_sampling: str = "reference"
    crosscheck_control: bool = False


@dataclass(frozen=True)
class RunConfig:
    raw: dict
    scenario: MarketScenario
    spec: RiskSpec
    eta_name: str
    epsilon: float
    delta: float
    seed: int
    grid: dict
    sampling: SamplingConfig
    evaluation: EvalConfig
    out_dir: str = "out"
    bank_path: str | None = None

    @property
    def eta(self):
        return get_eta(self.eta_name)

    def kappa_overrides(self) -> dict[tuple[int, int], int]:
        out = {}
        for label, k in self.sampling.kappa.items():
            i, sign = parse_pair(label)
            out[(i, sign)] = int(k)
        return out

    def grid_spec(self, default_dims, default_box) -> GridSpec:
        g = self.grid
        dims = tuple(int(d) - 1 for d in g["dims"]) if "dims" in g else tuple(default_dims)
        box = tuple(tuple(b) for b in g["box"]) if "box" in g else tuple(default_box)
        try:
            return GridSpec(
                dims,
                box,
                points_per_dim=int(g.get("points_per_dim", 21)),
                refine_rounds=int(g.get("refine_rounds", 3)),
                shrink_factor=float(g.get("shrink_factor", 0.5)),
                tol=float(g.get("tol", 0.0)),
            )
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}") from exc

    def identity(self) -> dict:
        """Everything a bank depends on; hashed into the bank key."""
        return {
            "scenario": self.raw["scenario"],
            "risk": self.raw["risk"],
            "eta": self.eta_name,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "seed": self.seed,
            "sampling": asdict(self.sampling),
        }


def parse_pair(label: str) -> tuple[int, int]:
    """``"2-"`` -> ``(1, -1)`` (zero-based measure index)."""
    label = str(label).strip()
    if len(label) < 2 or label[-1] not in "+-" or not label[:-1].isdigit() or int(label[:-1]) < 1:
        raise ConfigError(f"pair label {label!r} must look like '1+' or '2-'")
    return int(label[:-1]) - 1, 1 if label[-1] == "+" else -1


def from_dict(raw: dict, seed: int | None = None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    raw = dict(raw)
    scenario = build_scenario(_section(raw, "scenario"))
    risk = _section(raw, "risk")
    measures = risk.get("measures")
    if not measures:
        raise ConfigError("risk.measures must be a non-empty list")
    alphas = [_number(a, "risk.alphas") for a in risk.get("alphas", [])]
    try:
        spec = RiskSpec(tuple(build_measure(q, scenario) for q in measures), tuple(alphas))
    except ValueError as exc:
        raise ConfigError(f"risk: {exc}") from exc

    if seed is not None:
        raw["seed"] = seed
    if raw.get("seed") is None:
        raise ConfigError("seed is required (no clock-based default)")
    try:
        eps = float(raw.get("epsilon"))
        delta = float(raw.get("delta"))
    except (TypeError, ValueError):
        raise ConfigError("epsilon and delta must be numbers") from None
    if not eps > 0:
        raise ConfigError(f"epsilon must be > 0, got {eps}")
    if not 0 < delta < 1:
        raise ConfigError(f"delta must lie in (0, 1), got {delta}")
    eta_name = str(raw.get("eta", "normal"))
    try:
        get_eta(eta_name)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    s = _section(raw, "sampling", required=False)
    sampling = SamplingConfig(
        kappa={str(k): int(v) for k, v in (s.get("kappa") or {}).items()},
        scale=float(s.get("scale", 1.0)),
        route=str(s.get("route", "auto")),
        variant=str(s.get("variant", "devroye")),
    )
    if not sampling.scale > 0:
        raise ConfigError("sampling.scale must be positive")
    if sampling.variant not in VARIANTS:
        raise ConfigError(f"sampling.variant must be one of {VARIANTS}")
    for label in sampling.kappa:
        parse_pair(label)

    e = _section(raw, "eval", required=False)
    evaluation = EvalConfig(
        s=tuple(float(x) for x in e["s"]) if e.get("s") is not None else None,
        w0=float(e["w0"]) if e.get("w0") is not None else None,
        crosscheck_n=int(e.get("crosscheck_n", 100_000)),
        crosscheck_sampling=str(e.get("crosscheck_sampling", "reference")),
        crosscheck_control=bool(e.get("crosscheck_control", False)),
    )
    out = _section(raw, "output", required=False)
    return RunConfig(
        raw=raw,
        scenario=scenario,
        spec=spec,
        eta_name=eta_name,
        epsilon=eps,
        delta=delta,
        seed=int(raw["seed"]),
        grid=_section(raw, "grid", required=False),
        sampling=sampling,
        evaluation=evaluation,
        out_dir=str(out.get("dir", "out")),
        bank_path=raw.get("bank"),
    )


def load_config(path: str | Path, seed: int | None = None) -> RunConfig:
    try:
        raw: Any = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return from_dict(raw, seed)
