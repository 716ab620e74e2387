"""Command-line interface: run one scenario, sweep a parameter, run the
security analysis, or plot emitted CSVs."""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .config import KEY_MAP, apply_config, load_config
from .plots import emit_plots
from .scenario import SCENARIO_KINDS, ScenarioConfig, run_scenario
from .sweeps import (SECURITY_HEADER, SWEEP_HEADER, SWEEP_PARAMETERS,
                     run_security_sweep, run_sweep, write_challenges_csv,
                     write_csv, write_traces_csv)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value configuration file")
    parser.add_argument("--seed", type=int, help="master RNG seed")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--set", action="append", default=[],
                        metavar="KEY=VALUE",
                        help=f"override any config key ({', '.join(sorted(KEY_MAP))})")


def _build_config(args) -> ScenarioConfig:
    cfg = ScenarioConfig()
    if args.config:
        cfg = load_config(args.config, cfg)
    overrides = {}
    for item in args.set:
        key, _, value = item.partition("=")
        if not _:
            raise SystemExit(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip().lower()] = value.strip()
    if overrides:
        cfg = apply_config(overrides, cfg)
    if getattr(args, "kind", None):
        cfg = replace(cfg, kind=args.kind)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _grid(text: str):
    values = [v for v in text.replace(",", " ").split() if v]
    return [float(v) for v in values]


def cmd_run(args) -> int:
    cfg = _build_config(args)
    result = run_scenario(cfg)
    os.makedirs(args.out, exist_ok=True)
    write_traces_csv(os.path.join(args.out, "traces.csv"), result)
    write_challenges_csv(os.path.join(args.out, "challenges.csv"), result)
    print(f"kind={cfg.kind} seed={cfg.seed}")
    print(f"verdict: {result.verdict}"
          + (f" ({result.verdict_reason})" if result.verdict_reason else ""))
    if result.candidate_outcome:
        line = f"candidate: {result.candidate_outcome}"
        if result.candidate_reason:
            line += f" ({result.candidate_reason})"
        print(line)
    if result.verification_time is not None:
        print(f"verification time: {result.verification_time:.1f} s")
    if result.required_times:
        needed = ", ".join(f"{t:.1f}" for t in result.required_times)
        print(f"per-leg settled arrival vs actual profile: {needed} s")
    print(f"wrote {args.out}/traces.csv and {args.out}/challenges.csv")
    return 0


def cmd_sweep(args) -> int:
    cfg = _build_config(args)
    grid = _grid(args.grid)
    result = run_sweep(cfg, args.parameter, grid, seeds=args.seeds)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "sweep.csv")
    write_csv(path, SWEEP_HEADER, result.csv_rows())
    for row in result.rows:
        print(f"{args.parameter}={row[0]:g}: mean={row[2]:.1f}s "
              f"std={row[3]:.1f}s pass_rate={row[4]:.2f}")
    print(f"wrote {path}")
    return 0


def cmd_security(args) -> int:
    cfg = _build_config(args)
    k_grid = [int(v) for v in _grid(args.k_grid)]
    result = run_security_sweep(cfg, k_grid, trials=args.trials)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "security.csv")
    write_csv(path, SECURITY_HEADER, result.rows)
    for row in result.rows:
        print(f"k={row[0]}: empirical={row[2]:.5f} (se {row[3]:.5f}) "
              f"exact={row[5]:.3g} bound={row[6]:.3g}")
    print(f"wrote {path}")
    return 0


def cmd_plot(args) -> int:
    written = emit_plots(args.out, traces=args.traces or (),
                         sweep=args.sweep, security=args.security,
                         trace_labels=args.label or None)
    if not written:
        print("nothing to plot; pass --traces/--sweep/--security")
        return 1
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pofsim",
        description="Proof-of-following platoon admission simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario")
    p_run.add_argument("--kind", choices=SCENARIO_KINDS, default=None)
    _add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="sweep a parameter over seeds")
    p_sweep.add_argument("--parameter", choices=SWEEP_PARAMETERS, required=True)
    p_sweep.add_argument("--grid", required=True,
                         help="comma- or space-separated values")
    p_sweep.add_argument("--seeds", type=int, default=30)
    _add_common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_sec = sub.add_parser("security",
                           help="random-walk follower pass rates")
    p_sec.add_argument("--k-grid", default="1,2,3,4,5")
    p_sec.add_argument("--trials", type=int, default=2000)
    _add_common(p_sec)
    p_sec.set_defaults(func=cmd_security)

    p_plot = sub.add_parser("plot", help="charts from emitted CSVs")
    p_plot.add_argument("--traces", action="append",
                        help="traces.csv (repeatable, curves overlay)")
    p_plot.add_argument("--label", action="append",
                        help="legend label per --traces file")
    p_plot.add_argument("--sweep", help="sweep.csv")
    p_plot.add_argument("--security", help="security.csv")
    p_plot.add_argument("--out", default=".", help="output directory")
    p_plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
