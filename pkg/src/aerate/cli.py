"""Command line entry point: ``aerate run | bench | table | sweep``.

Exit codes: 0 on success, 2 on a configuration error, 3 when a bench cell failed.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from . import dgp
from .config import load_bench, load_grid, load_trial
from .engine import run_trial, trial_streams
from .errors import AerateError, ConfigError
from .harness import emit_report, read_report, render_table, run_bench, sensitivity_sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FAILED_CELLS = 3


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aerate", description="Adaptive experiment design simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one trial and print its trajectory")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--every", type=int, default=1, help="print every k-th round")

    bench = sub.add_parser("bench", help="replicate the configured cells and write a CSV report")
    bench.add_argument("--config", required=True)
    bench.add_argument("--out", required=True)
    bench.add_argument("--reps", type=int)
    bench.add_argument("--workers", type=int)

    table = sub.add_parser("table", help="render a CSV report as a text table")
    table.add_argument("--report", required=True)

    sweep = sub.add_parser("sweep", help="bench over a grid of gamma_rule, zeta_rule and rho")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--grid", required=True)
    sweep.add_argument("--out")
    sweep.add_argument("--reps", type=int)
    sweep.add_argument("--workers", type=int)
    return p


def _cmd_run(args) -> int:
    cfg, data = load_trial(args.config, args.seed)
    if args.every < 1:
        raise ConfigError("--every must be positive")
    streams = trial_streams(cfg.seed)
    cov = None
    if not data["dataset"].startswith("synthetic"):
        cov = dgp.load_covariates(data["covariates_path"], header=data["covariates_header"],
                                  synthetic_fallback=data["covariates_path"] is None,
                                  rng=np.random.default_rng(np.random.SeedSequence([cfg.seed, 747])))
    spec = dgp.make_dataset(data["dataset"], rng=streams.coefficients, covariates=cov,
                            standardize=data["standardize"])
    res = run_trial(cfg, spec, streams)
    est = res.primary
    print(f"# design={res.design} dataset={res.dataset} theta0={res.theta0:.6g} estimator={est}")
    print("t\ta\tpi\ty\testimate\tsigma2\tboundary")
    for i in range(0, res.rounds, args.every):
        print(f"{i + 1}\t{res.actions[i]}\t{res.pi[i]:.6g}\t{res.outcomes[i]:.6g}\t"
              f"{res.estimates[est][i]:.6g}\t{res.variances[est][i]:.6g}\t{res.boundary[i]:.6g}")
    print(f"# final {est}={res.final():.6g} lil_stop={res.lil_stop[est]} bf_stop={res.bf_stop[est]}")
    return EXIT_OK


def _finish_bench(report, out) -> int:
    if out:
        emit_report(report, out)
    sys.stdout.write(render_table(report))
    for cell, msg in report.failures.items():
        print(f"FAILED {cell}: {msg}", file=sys.stderr)
    return EXIT_FAILED_CELLS if report.failures else EXIT_OK


def _cmd_bench(args) -> int:
    cfg = load_bench(args.config, reps=args.reps, workers=args.workers)
    return _finish_bench(run_bench(cfg), args.out)


def _cmd_table(args) -> int:
    try:
        report = read_report(args.report)
    except OSError as exc:
        raise ConfigError(f"cannot read report {args.report}: {exc.strerror}") from None
    sys.stdout.write(render_table(report))
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = load_bench(args.config, reps=args.reps, workers=args.workers)
    grid = load_grid(args.grid)
    report = sensitivity_sweep(
        replace(cfg), grid.get("gamma_rule"), grid.get("zeta_rule"), grid.get("rho")
    )
    return _finish_bench(report, args.out)


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "bench": _cmd_bench, "table": _cmd_table, "sweep": _cmd_sweep}[args.command]
    try:
        return handler(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"aerate: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AerateError as exc:
        print(f"aerate: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
