"""Command-line interface: pool, pool-all, dpm, simulate, partitions."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .baselines import DpmConfig, dpm_gibbs, pool_all
from .errors import UncpoolError
from .grid import build_grid, evaluate_joint, sample_mu, summarize
from .io import (RunConfig, ReportDocument, input_echo, parse_input,
                 parse_scenario, render_report, sim_report_csv, sim_report_json)
from .partitions import enumerate_partitions
from .simulation import run_scenario


def _child_seed(seed: int, key: int) -> int:
    """Derive an independent integer seed for a sub-stream."""
    return int(np.random.SeedSequence(seed, spawn_key=(key,)).generate_state(1, np.uint64)[0])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uncpool",
        description="Combine point estimates from several sources by "
                    "partition-averaged Bayesian pooling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_input=True):
        if with_input:
            p.add_argument("--input", required=True, help="CSV input file")
        p.add_argument("--r", type=int, default=2000, help="delta2 grid size")
        p.add_argument("--b", type=int, default=5000, help="posterior draw count")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--format", choices=("json", "csv", "md"), default="json")
        p.add_argument("--output", help="output file (default: stdout)")

    p = sub.add_parser("pool", help="full uncertain-pooling analysis")
    add_common(p)
    p.add_argument("--threshold", type=float, default=0.001,
                   help="display threshold for partition probabilities")

    p = sub.add_parser("pool-all", help="complete-pooling baseline only")
    add_common(p)

    p = sub.add_parser("dpm", help="Dirichlet-process-mixture baseline")
    add_common(p)
    p.add_argument("--m", type=float, default=3.0, help="DP concentration")
    p.add_argument("--iterations", type=int, default=12000)
    p.add_argument("--burn-in", type=int, default=2000, dest="burn_in")
    p.add_argument("--thin", type=int, default=1)

    p = sub.add_parser("simulate", help="run a replicated sampling study")
    p.add_argument("--scenario", required=True, help="key = value scenario file")
    p.add_argument("--output", default="sim_report",
                   help="output base path; writes <base>.json and <base>.csv")
    p.add_argument("--n-jobs", type=int, default=1, dest="n_jobs")

    p = sub.add_parser("partitions", help="list set partitions")
    p.add_argument("--l", type=int, required=True, help="number of sources")
    p.add_argument("--input", help="optional CSV input; attaches posterior masses")
    p.add_argument("--r", type=int, default=2000)
    p.add_argument("--output", help="output file (default: stdout)")
    return parser


def _write(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _config_dict(args, extra: dict | None = None) -> dict:
    d = {"r": args.r, "b": args.b, "seed": args.seed, "format": args.format}
    if extra:
        d.update(extra)
    return d


def _cmd_pool(args) -> int:
    data = parse_input(args.input)
    cfg = RunConfig(r=args.r, b=args.b, seed=args.seed, format=args.format,
                    threshold=args.threshold)
    space = enumerate_partitions(data.l)
    grid = build_grid(cfg.r)
    jp = evaluate_joint(data, space, grid)
    pa = pool_all(data, grid, b=cfg.b, seed=_child_seed(cfg.seed, 1), jp=jp) if data.l >= 2 else None
    draws = sample_mu(data, jp, cfg.b, _child_seed(cfg.seed, 0))
    table = summarize(data, jp, draws, pool_all=pa, threshold=cfg.threshold)
    doc = ReportDocument(
        kind="pool",
        input=input_echo(data),
        config=_config_dict(args, {"threshold": cfg.threshold}),
        results={"summary": table.to_dict()},
    )
    _write(render_report(doc, cfg.format), args.output)
    return 0


def _cmd_pool_all(args) -> int:
    data = parse_input(args.input)
    cfg = RunConfig(r=args.r, b=args.b, seed=args.seed, format=args.format)
    grid = build_grid(cfg.r)
    pa = pool_all(data, grid, b=cfg.b, seed=_child_seed(cfg.seed, 1))
    doc = ReportDocument(
        kind="pool-all",
        input=input_echo(data),
        config=_config_dict(args),
        results={"pool_all": {"mean": pa.mean, "sd": pa.sd,
                              "ci_lower": pa.interval[0], "ci_upper": pa.interval[1]}},
    )
    _write(render_report(doc, cfg.format), args.output)
    return 0


def _cmd_dpm(args) -> int:
    data = parse_input(args.input)
    dpm_cfg = DpmConfig(m=args.m, iterations=args.iterations, burn_in=args.burn_in,
                        thin=args.thin, seed=args.seed)
    draws = dpm_gibbs(data, dpm_cfg)
    rows = [
        {"label": data.labels[i], "observed": float(data.y_hat[i]),
         "post_mean": draws.post_mean[i], "observed_se": float(np.sqrt(data.v[i])),
         "post_sd": draws.post_sd[i], "ci_lower": draws.ci_lower[i],
         "ci_upper": draws.ci_upper[i]}
        for i in range(data.l)
    ]
    doc = ReportDocument(
        kind="dpm",
        input=input_echo(data),
        config=_config_dict(args, {"m": args.m, "iterations": args.iterations,
                                   "burn_in": args.burn_in, "thin": args.thin,
                                   "hyperparameters": draws.resolved}),
        results={"dpm": {"rows": rows}},
    )
    _write(render_report(doc, args.format), args.output)
    return 0


def _cmd_simulate(args) -> int:
    scenario = parse_scenario(args.scenario)
    report = run_scenario(scenario, n_jobs=args.n_jobs)
    Path(args.output + ".json").write_text(sim_report_json(report), encoding="utf-8")
    Path(args.output + ".csv").write_text(sim_report_csv(report), encoding="utf-8")
    sys.stdout.write(f"wrote {args.output}.json and {args.output}.csv\n")
    return 0


def _cmd_partitions(args) -> int:
    space = enumerate_partitions(args.l)
    if args.input:
        data = parse_input(args.input)
        jp = evaluate_joint(data, space, build_grid(args.r))
        masses = np.exp(jp.log_mass).sum(axis=1)
        lines = [f"{p.notation()}\t{m:.6f}" for p, m in zip(space.partitions, masses)]
    else:
        lines = [p.notation() for p in space.partitions]
    _write("\n".join(lines) + "\n", args.output)
    return 0


_DISPATCH = {
    "pool": _cmd_pool,
    "pool-all": _cmd_pool_all,
    "dpm": _cmd_dpm,
    "simulate": _cmd_simulate,
    "partitions": _cmd_partitions,
}


def run_command(argv: list[str]) -> int:
    """Parse and execute one CLI invocation; returns the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _DISPATCH[args.command](args)
    except UncpoolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
