"""Command-line entry point.

Subcommands:
  run     integrate a configured or preset experiment, writing the
          diagnostics series (CSV) and optional binary snapshots
  oracle  compare the integral-equation fixed point against the stepper
  check   seeded inequality sweeps, written as CSV reports
  preset  list built-in experiment presets

Exit codes: 0 success, 1 usage error, 2 numerical abort (non-finite
fields, divergent oracle, under-resolved run, failed inequality), 3 I/O
error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import mild
from .config import (ConfigError, RunConfig, build_initial_state, load_config,
                     presets, PRESET_DESCRIPTIONS)
from .evolve import NumericsError, run
from .functionals import lp_norm
from .inequalities import SUITES, sweep, sweep_csv
from .series import SeriesWriter
from .snapshots import write_snapshot

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICS = 2
EXIT_IO = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we want code 1
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="pksns", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command")

    p_run = sub.add_parser("run", help="integrate and emit series + snapshots")
    p_run.add_argument("--config", help="flat key=value config file")
    p_run.add_argument("--preset", help="start from a named preset")

    p_oracle = sub.add_parser("oracle", help="fixed-point oracle vs stepper")
    p_oracle.add_argument("--config", help="flat key=value config file")
    p_oracle.add_argument("--preset", help="start from a named preset")
    p_oracle.add_argument("--T", type=float, required=True, dest="horizon")
    p_oracle.add_argument("--iters", type=int, default=8)

    p_check = sub.add_parser("check", help="inequality sweeps")
    p_check.add_argument("--suite", required=True,
                         choices=list(SUITES) + ["all"])
    p_check.add_argument("--count", type=int, default=100)
    p_check.add_argument("--seed", type=int, default=0)
    p_check.add_argument("--out", default=None,
                         help="report path (default <suite>_report.csv)")

    p_preset = sub.add_parser("preset", help="preset utilities")
    p_preset.add_argument("action", choices=["list"])
    return parser


def _resolve_config(args) -> RunConfig:
    cfg: RunConfig | None = None
    if getattr(args, "preset", None):
        table = presets()
        if args.preset not in table:
            raise UsageError(f"unknown preset {args.preset!r}; "
                             f"available: {', '.join(sorted(table))}")
        cfg = table[args.preset]
    if getattr(args, "config", None):
        cfg = load_config(args.config, base=cfg)
    if cfg is None:
        raise UsageError("provide --config and/or --preset")
    return cfg


def _cmd_run(args) -> int:
    cfg = _resolve_config(args)
    state = build_initial_state(cfg)
    snapdir = cfg.snapshot_dir
    if cfg.snapshot_every:
        os.makedirs(snapdir, exist_ok=True)
    counter = {"snap": 0}

    def on_snapshot(st):
        path = os.path.join(snapdir, f"snap_{counter['snap']:06d}.pkns")
        write_snapshot(path, st)
        counter["snap"] += 1

    with SeriesWriter(cfg.series_path) as writer:
        result = run(state, cfg.t_end, cfg.stepper(),
                     sample_dt=cfg.cadence,
                     on_sample=lambda st, row: writer.write(row),
                     snapshot_every=cfg.snapshot_every,
                     on_snapshot=on_snapshot if cfg.snapshot_every else None)
    last = result.series.rows[-1] if result.series.rows else None
    print(f"status={result.status} steps={result.steps} "
          f"t={result.state.t:.6g} samples={len(result.series)}")
    if last is not None:
        print(f"mass={last.mass:.17g} free_energy={last.free_energy:.17g} "
              f"min_n={result.min_density:.3e}")
    if result.clipped_mass:
        print(f"clipped_mass={result.clipped_mass:.3e}")
    print(f"series written to {cfg.series_path}")
    return EXIT_OK if result.status == "ok" else EXIT_NUMERICS


def _cmd_oracle(args) -> int:
    cfg = _resolve_config(args)
    state = build_initial_state(cfg)
    grid = state.grid
    horizon = args.horizon
    result = mild.picard_iterate(grid, state.n.values, state.u.u1, state.u.u2,
                                 horizon, iterations=args.iters)
    print("sweep gaps in the weighted trajectory norm:")
    for j, d in enumerate(result.distances, start=1):
        ratio = "" if j == 1 else f"  ratio={d / result.distances[j - 2]:.3f}"
        print(f"  iterate {j}: {d:.6e}{ratio}")
    print(f"fixed-point residual: {result.fixed_point_residual:.3e}")

    from .evolve import StepperConfig, run as run_evolve
    stepper = StepperConfig(dt=horizon / 256.0, poisson=state.variant,
                            dt_max=horizon)
    stepped = run_evolve(state, horizon, stepper, sample_dt=horizon)
    n_o = result.trajectory.n[-1]
    u1_o = result.trajectory.u1[-1]
    u2_o = result.trajectory.u2[-1]
    st = stepped.state
    dn = lp_norm(grid, st.n.values - n_o, 2) / max(lp_norm(grid, n_o, 2), 1e-300)
    du_num = np.sqrt(lp_norm(grid, st.u.u1 - u1_o, 2) ** 2
                     + lp_norm(grid, st.u.u2 - u2_o, 2) ** 2)
    du_den = max(np.sqrt(lp_norm(grid, u1_o, 2) ** 2
                         + lp_norm(grid, u2_o, 2) ** 2), 1e-300)
    print(f"stepper vs oracle at t={horizon:g}: "
          f"rel L2 density {dn:.3e}, rel L2 velocity {du_num / du_den:.3e}")
    return EXIT_OK


def _cmd_check(args) -> int:
    suites = list(SUITES) if args.suite == "all" else [args.suite]
    all_pass = True
    for suite in suites:
        reports = sweep(suite, args.count, args.seed)
        out = args.out if args.out and len(suites) == 1 \
            else f"{suite}_report.csv"
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(sweep_csv(reports, args.seed))
        failed = [r for r in reports if not r.passed]
        all_pass &= not failed
        worst = min(r.margin / (1.0 + abs(r.rhs)) for r in reports)
        print(f"{suite}: {len(reports) - len(failed)}/{len(reports)} pass, "
              f"worst relative margin {worst:.3e}, report {out}")
    return EXIT_OK if all_pass else EXIT_NUMERICS


def _cmd_preset(args) -> int:
    table = presets()
    width = max(len(name) for name in table)
    for name in sorted(table):
        print(f"{name:<{width}}  {PRESET_DESCRIPTIONS.get(name, '')}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand (run, oracle, check, preset)")
        handler = {
            "run": _cmd_run,
            "oracle": _cmd_oracle,
            "check": _cmd_check,
            "preset": _cmd_preset,
        }[args.command]
        return handler(args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except NumericsError as err:
        print(f"numerical abort: {err}", file=sys.stderr)
        return EXIT_NUMERICS
    except mild.PicardDivergenceError as err:
        print(f"oracle diverged: {err}", file=sys.stderr)
        return EXIT_NUMERICS
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
