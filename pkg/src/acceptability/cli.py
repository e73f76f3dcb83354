"""Command-line entry point: ``acceptability {plan,sample,run,eval,oracle-check}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import pipeline
from .config import ConfigError, load_config
from .sampler import CertificationError
from .weights import ConfigurationError, MissingEvaluatorError

COMMANDS = ("plan", "sample", "run", "eval", "oracle-check")


def _vector(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="acceptability", description=__doc__)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="YAML run configuration")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--workers", type=int, default=1, help="threads for sampling and grid evaluation")
    p.add_argument("--out", help="output directory (default from config)")
    p.add_argument("--bank", help="bank file to reuse or create")
    p.add_argument("--s", type=_vector, help="eval: comma-separated parameter vector")
    p.add_argument("--w0", type=float, help="eval: initial capital")
    p.add_argument("--quiet", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(message)s")
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config, seed=args.seed)
        out = Path(args.out or cfg.out_dir)
        if args.command == "plan":
            report = pipeline.cmd_plan(cfg)
            print(report["table"])
        elif args.command == "sample":
            report = pipeline.cmd_sample(cfg, args.workers, args.bank)
        elif args.command == "run":
            report = pipeline.cmd_run(cfg, args.workers, args.bank, out)
            r = report["search"]
            print(f"w0_star = {r['w0_star']:.6g} at s = {tuple(round(x, 6) for x in r['s_star'])}")
            print(report["certificate"]["statement"])
        elif args.command == "eval":
            report = pipeline.cmd_eval(cfg, args.s, args.w0, args.workers, args.bank)
            cc = report["crosscheck"]
            print(f"rho_hat = {report['rho_hat']:.6g}, cross-check = {cc['estimate']:.6g} (agrees: {cc['agrees']})")
        else:
            report = pipeline.cmd_oracle_check(cfg, args.workers, args.bank)
        name = args.command.replace("-", "_") + ".json"
        pipeline.write_report(report, out / name)
        print(f"report: {out / name}")
    except (ConfigError, ConfigurationError, MissingEvaluatorError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CertificationError as exc:
        print(f"certification error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
