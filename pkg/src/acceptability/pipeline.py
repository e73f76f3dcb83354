"""Config-driven orchestration shared by the CLI, the scripts and the tests.

Every report is a plain dict of JSON types and contains nothing that depends
on the wall clock, the output location or the worker count.
"""
from __future__ import annotations

import json
import logging
import math
from pathlib import Path

import numpy as np

from . import oracle
from .config import RunConfig
from .estimator import d_matrix, rho_hat
from .market import TreeScenario
from .risk import rho_mc_crosscheck
from .sampler import SampleBank, build_bank, config_key, load_bank, save_bank
from .search import SearchResult, default_box, grid_points, refine, run_search, write_trace_csv
from .vcbound import SamplePlan, plan_samples
from .weights import TiltedWeights, compute_constants, describe_strategy, parametric_strategy, StrategyParams

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


def _clean(x):
    """JSON-safe copy: non-finite floats become strings, tuples become lists."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2) + "\n"


def write_report(report: dict, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(dumps(report))


def bank_key(cfg: RunConfig) -> str:
    return config_key(cfg.identity())


def prepare(cfg: RunConfig) -> tuple[TiltedWeights, SamplePlan, SamplePlan]:
    """Constants, the minimal plan, and the plan actually used (overrides and scale applied)."""
    weights = compute_constants(cfg.scenario, cfg.spec)
    minimal = plan_samples(weights, cfg.epsilon, cfg.delta, cfg.sampling.variant)
    sizes = {(e.i, e.sign): e.kappa for e in minimal.entries}
    sizes.update({k: v for k, v in cfg.kappa_overrides().items() if k in sizes})
    if cfg.sampling.scale != 1.0:
        sizes = {k: max(1, math.ceil(v * cfg.sampling.scale)) for k, v in sizes.items()}
    return weights, minimal, minimal.with_kappas(sizes)


def obtain_bank(cfg: RunConfig, weights: TiltedWeights, plan: SamplePlan, workers: int = 1, bank_path=None) -> SampleBank:
    key = bank_key(cfg)
    path = bank_path or cfg.bank_path
    if path and Path(path).exists():
        log.info("reusing bank %s", path)
        return load_bank(path, expected_key=key)
    bank = build_bank(weights, plan, cfg.seed, cfg.eta, workers=workers, route=cfg.sampling.route, key=key)
    if path:
        save_bank(bank, path)
    return bank


def certificate_block(bank: SampleBank) -> dict:
    eps, fail = bank.epsilon, min(1.0, bank.aleph * bank.delta)
    return {
        "epsilon": eps,
        "delta": bank.delta,
        "aleph": bank.aleph,
        "confidence_at_least": 1.0 - fail,
        "statement": (
            f"|rho_hat(s) - rho(W(xi(s)))| <= {eps:.6g} for all s simultaneously, so "
            f"rho(w0_star + W(xi_star)) <= {eps:.6g}, with probability >= {1.0 - fail:.6g}"
        ),
    }


def constants_block(weights: TiltedWeights) -> dict:
    return {
        "c": list(weights.c),
        "d_plus": list(weights.d_plus),
        "d_minus": list(weights.d_minus),
        "aleph": weights.aleph,
        "provenance": list(weights.provenance),
    }


def plan_block(minimal: SamplePlan, used: SamplePlan) -> dict:
    rows = []
    for a, b in zip(minimal.entries, used.entries):
        rows.append(
            {
                "pair": a.label,
                "d": a.d,
                "eps_over_d": a.relative_epsilon,
                "kappa_minimal": a.kappa,
                "bound_at_minimal": a.bound,
                "kappa_used": b.kappa,
                "bound_at_used": b.bound,
            }
        )
    return {
        "epsilon": minimal.epsilon,
        "delta": minimal.delta,
        "vc_dim": minimal.vc_dim,
        "variant": minimal.variant,
        "aleph": minimal.aleph,
        "certified_epsilon_used": used.certified_epsilon(),
        "pairs": rows,
    }


def cmd_plan(cfg: RunConfig) -> dict:
    weights, minimal, used = prepare(cfg)
    return {
        "schema_version": SCHEMA_VERSION,
        "command": "plan",
        "constants": constants_block(weights),
        "plan": plan_block(minimal, used),
        "table": used.format_table(),
    }


def cmd_sample(cfg: RunConfig, workers: int = 1, bank_path=None) -> dict:
    weights, minimal, used = prepare(cfg)
    path = bank_path or cfg.bank_path or str(Path(cfg.out_dir) / "bank.npz")
    if Path(path).exists():
        Path(path).unlink()
    bank = obtain_bank(cfg, weights, used, workers, path)
    return {
        "schema_version": SCHEMA_VERSION,
        "command": "sample",
        "bank_key": bank.key,
        "sizes": bank.sizes(),
        "certificate": certificate_block(bank),
    }


def exact_search(pipe: oracle.ExactPipeline, grid, m: int) -> tuple[float, tuple[float, ...]]:
    """Same grid-and-refine schedule as :func:`run_search`, on exact values."""
    box = grid.box
    best_val, best_s = math.inf, None
    for _ in range(grid.refine_rounds):
        pts = np.zeros((grid.points_per_dim ** len(box), m))
        pts[:, list(grid.active_dims)] = grid_points(box, grid.points_per_dim)
        val, s = oracle.exact_grid_minimum(pipe, pts)
        if best_s is None or (val, s) < (best_val, best_s):
            best_val, best_s = val, s
        box = refine(box, [best_s[i] for i in grid.active_dims], grid.shrink_factor, grid.box)
    return best_val, best_s


def oracle_block(cfg: RunConfig, result: SearchResult, grid) -> dict:
    pipe = oracle.exact_pipeline(cfg.scenario, cfg.spec, cfg.eta)
    lp = oracle.min_capital_lp(cfg.scenario, cfg.spec)
    exact_at_star = pipe.rho(result.s_star)
    family_min, family_s = exact_search(pipe, grid, cfg.spec.m)
    return {
        "lp_w0_min": lp.w0_min,
        "exact_rho_at_s_star": exact_at_star,
        "abs_error_at_s_star": abs(exact_at_star - result.w0_star),
        "within_epsilon_at_s_star": abs(exact_at_star - result.w0_star) <= result.certificate.epsilon,
        "exact_family_min": family_min,
        "exact_family_argmin": family_s,
        "family_gap_over_lp": family_min - lp.w0_min,
        "w0_star_minus_lp": result.w0_star - lp.w0_min,
    }


def search_block(result: SearchResult) -> dict:
    return {
        "w0_star": result.w0_star,
        "s_star": result.s_star,
        "binding_measure": result.argmax_i + 1,
        "D_at_s_star": result.per_i,
        "n_evaluated": result.n_evaluated,
        "rounds": [
            {"round": tr.round, "box": tr.box, "best_s": tr.best_s, "best_rho_hat": tr.best_rho_hat, "n_points": tr.n_points}
            for tr in result.trace
        ],
        "note": result.note,
    }


def cmd_run(cfg: RunConfig, workers: int = 1, bank_path=None, out_dir=None) -> dict:
    weights, minimal, used = prepare(cfg)
    bank = obtain_bank(cfg, weights, used, workers, bank_path)
    grid = cfg.grid_spec(weights.active, default_box(weights))
    result = run_search(weights, bank, grid, workers)
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(result, out / "trace.csv")
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "run",
        "bank_key": bank.key,
        "constants": constants_block(weights),
        "plan": plan_block(minimal, used),
        "search": search_block(result),
        "certificate": certificate_block(bank),
        "strategy": describe_strategy(weights, StrategyParams(result.s_star, cfg.eta)),
        "trace_csv": "trace.csv",
    }
    if isinstance(cfg.scenario, TreeScenario) and weights.active:
        report["oracle"] = oracle_block(cfg, result, grid)
    return report


def cmd_eval(cfg: RunConfig, s=None, w0=None, workers: int = 1, bank_path=None) -> dict:
    weights, minimal, used = prepare(cfg)
    s = tuple(float(x) for x in (s if s is not None else cfg.evaluation.s or (0.0,) * weights.m))
    if len(s) != weights.m:
        raise ValueError(f"s has {len(s)} entries, the risk measure has m={weights.m}")
    w0 = float(w0 if w0 is not None else (cfg.evaluation.w0 or 0.0))
    bank = obtain_bank(cfg, weights, used, workers, bank_path)
    est = rho_hat(weights, bank, s)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(1 << 20,)))
    strategy = parametric_strategy(weights, s, cfg.eta)
    cc = rho_mc_crosscheck(
        cfg.spec,
        cfg.scenario,
        strategy,
        w0,
        cfg.evaluation.crosscheck_n,
        rng,
        cfg.evaluation.crosscheck_sampling,
        control=cfg.evaluation.crosscheck_control,
    )
    diff = abs((est.rho_hat - w0) - cc.estimate)
    tol = bank.epsilon + 4.0 * cc.std_errors[cc.argmax]
    return {
        "schema_version": SCHEMA_VERSION,
        "command": "eval",
        "s": s,
        "w0": w0,
        "rho_hat": est.rho_hat,
        "rho_hat_minus_w0": est.rho_hat - w0,
        "D": est.per_i,
        "binding_measure": est.argmax_i + 1,
        "certificate": certificate_block(bank),
        "crosscheck": {
            "sampling": cc.sampling,
            "control_variate": cc.control,
            "n": cc.n,
            "estimate": cc.estimate,
            "terms": cc.terms,
            "std_errors": cc.std_errors,
            "abs_difference": diff,
            "tolerance": tol,
            "agrees": diff <= tol,
        },
    }


def cmd_oracle_check(cfg: RunConfig, workers: int = 1, bank_path=None) -> dict:
    if not isinstance(cfg.scenario, TreeScenario):
        raise ValueError("oracle-check needs a finite-tree scenario")
    weights, minimal, used = prepare(cfg)
    pipe = oracle.exact_pipeline(cfg.scenario, cfg.spec, cfg.eta)
    const_err = max(
        float(np.max(np.abs(np.asarray(weights.c) - pipe.c))),
        float(np.max(np.abs(np.asarray(weights.d_plus) - pipe.d_plus))),
        float(np.max(np.abs(np.asarray(weights.d_minus) - pipe.d_minus))),
    )
    lp = oracle.min_capital_lp(cfg.scenario, cfg.spec)
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "oracle-check",
        "constants_max_abs_error": const_err,
        "aleph_matches": pipe.aleph == weights.aleph,
        "lp_w0_min": lp.w0_min,
        "lp_binding": [i + 1 for i in lp.binding],
    }
    if weights.active:
        bank = obtain_bank(cfg, weights, used, workers, bank_path)
        grid = cfg.grid_spec(weights.active, default_box(weights))
        pts = np.zeros((grid.points_per_dim ** len(grid.box), weights.m))
        pts[:, list(grid.active_dims)] = grid_points(grid.box, grid.points_per_dim)
        hat = d_matrix(weights, bank, pts, workers).max(axis=1)
        exact = np.array([pipe.rho(p) for p in pts])
        sup = float(np.max(np.abs(hat - exact)))
        report.update(
            {
                "grid_points": len(pts),
                "sup_abs_deviation": sup,
                "certificate": certificate_block(bank),
                "within_epsilon": sup <= bank.epsilon,
            }
        )
    return report
