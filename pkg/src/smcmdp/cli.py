"""Command line entry point: ``smc run|ablate|coverage|figures|solve|transform``.

Exit codes: 0 converged (or success), 1 invalid input, 2 path budget exhausted.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from smcmdp import kernels
from smcmdp.intervals import CiMethod
from smcmdp.model import ModelError
from smcmdp.pipeline import (
    ABLATION_AXES,
    ConfigError,
    RunConfig,
    bundled_models,
    coverage_experiment,
    emit_figures,
    resolve_model,
    run_ablation,
    run_smc,
    solve_exact,
    transform_report,
)
from smcmdp.quotient import Transforms

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_BUDGET = 2


def _write(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _add_run_flags(p: argparse.ArgumentParser, model_required: bool = True) -> None:
    p.add_argument("model", nargs=None if model_required else "?", help="model file or bundled model name")
    p.add_argument("--epsilon", type=float, default=None, help="target width of the value interval (default: model's own, else 0.01)")
    p.add_argument("--delta", type=float, default=0.1, help="global failure probability")
    p.add_argument("--ci-method", default="cp", choices=[m.value for m in CiMethod])
    for flag in ("small-support", "independence", "equivalence", "chains", "scc-fragments"):
        p.add_argument(f"--{flag}", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--baseline", action="store_true", help="Hoeffding with every improvement off")
    p.add_argument("--batch-size", type=int, default=1000)
    p.add_argument("--max-batches", type=int, default=1000)
    p.add_argument("--fixed-paths", type=int, default=None, help="sample exactly N paths and look once")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("grey", "black"), default="grey")
    p.add_argument("--p-min", type=float, default=None, help="lower bound on positive probabilities (black mode)")
    p.add_argument("--step-cap", type=int, default=None)
    p.add_argument("--output", "-o", default=None)


def _config(args) -> RunConfig:
    eps = args.epsilon
    if eps is None:
        eps = bundled_models().get(args.model, {}).get("epsilon", 0.01)
    cfg = RunConfig(
        model=args.model,
        epsilon=eps,
        delta=args.delta,
        ci_method=args.ci_method,
        small_support=args.small_support,
        independence=args.independence,
        equivalence=args.equivalence,
        chains=args.chains,
        scc_fragments=args.scc_fragments,
        batch_size=args.batch_size,
        max_batches=args.max_batches,
        fixed_paths=args.fixed_paths,
        seed=args.seed,
        mode=args.mode,
        p_min=args.p_min,
        step_cap=args.step_cap,
        output=args.output,
    )
    return cfg.baseline() if args.baseline else cfg


def cmd_run(args) -> int:
    cfg = _config(args)
    res = run_smc(cfg, timing=args.timing)
    _write(res.dumps(), cfg.output)
    return EXIT_OK if res.converged else EXIT_BUDGET


def cmd_ablate(args) -> int:
    names = args.models or list(bundled_models())
    cfg = replace(_config(args), model=names[0])
    doc = run_ablation(cfg, names, list(range(args.seed, args.seed + args.seeds)), args.axes, args.jobs)
    _write(_dumps(doc), args.output)
    return EXIT_OK


def cmd_coverage(args) -> int:
    cfg = _config(args)
    if not args.allow_unsound and not cfg.method.sound:
        raise ConfigError(f"{cfg.method.value} is not sound; pass --allow-unsound to run it anyway")
    doc = coverage_experiment(cfg, args.trials, args.paths, args.jobs)
    _write(_dumps(doc), args.output)
    return EXIT_OK


def cmd_figures(args) -> int:
    for path in emit_figures(args.out_dir, args.points):
        print(path)
    return EXIT_OK


def cmd_solve(args) -> int:
    _write(_dumps(solve_exact(resolve_model(args.model))), args.output)
    return EXIT_OK


def cmd_transform(args) -> int:
    m = resolve_model(args.model)
    doc = transform_report(m, Transforms(args.equivalence, args.scc_fragments, args.chains), args.small_support)
    _write(_dumps(doc), args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="smc", description="Statistical model checking of MDPs with sound confidence intervals.")
    ap.add_argument("--version", action="version", version=f"%(prog)s (kernels: {kernels.BACKEND})")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one sample-estimate-solve run, JSON result")
    _add_run_flags(p)
    p.add_argument("--timing", action="store_true", help="add wall time to the result (breaks byte-identical reruns)")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("ablate", help="sample reduction per improvement over bundled models")
    _add_run_flags(p, model_required=False)
    p.add_argument("--models", nargs="*", default=None)
    p.add_argument("--seeds", type=int, default=10, help="number of seeds, starting at --seed")
    p.add_argument("--axes", nargs="*", default=list(ABLATION_AXES), choices=ABLATION_AXES)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("coverage", help="fraction of fixed-budget runs containing the exact value")
    _add_run_flags(p)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--paths", type=int, default=2000)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--allow-unsound", action="store_true", help="permit Wilson/Bennett-style intervals (demonstration)")
    p.set_defaults(fn=cmd_coverage)

    p = sub.add_parser("figures", help="write the sample-complexity and coverage CSVs")
    p.add_argument("--out-dir", default="figures")
    p.add_argument("--points", type=int, default=1001, help="p-grid size of the coverage curves")
    p.set_defaults(fn=cmd_figures)

    p = sub.add_parser("solve", help="exact maximal reachability of a known model")
    p.add_argument("model")
    p.add_argument("--output", "-o", default=None)
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("transform", help="print the structural transformation report")
    p.add_argument("model")
    for flag in ("small-support", "equivalence", "chains", "scc-fragments"):
        p.add_argument(f"--{flag}", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--output", "-o", default=None)
    p.set_defaults(fn=cmd_transform)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ModelError, FileNotFoundError, ValueError) as exc:
        print(f"smc: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
