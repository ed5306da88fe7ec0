"""Command-line surface: simulate, twin, analyze, check, norms.

Every subcommand exits nonzero when any check it ran failed (or a run
aborted) and zero otherwise.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import checks
from .config import ConfigError, RunConfig, build_initial_state, parse_config
from .dyadic import DyadicPartition, NormSpec
from .qtensor import ModelParams
from .snapshots import emit_series, read_series, read_snapshot, write_snapshot
from .spectral import Grid
from .timestepping import BlowUpError, Perturbation, Trajectory, run, twin_run

#: Parameter set used by the stateless `check` ensembles that need one.
CHECK_PARAMS = ModelParams(a=-0.3, b=1.0, c=1.0, gamma=1.0, nu=1.0, L=1.0)


def _load_config(path: str) -> RunConfig:
    try:
        return parse_config(Path(path).read_text())
    except (OSError, ConfigError) as err:
        raise SystemExit(f"error: {err}")


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    grid = Grid(cfg.n, cfg.length)
    init = build_initial_state(cfg, grid)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.cfg").write_text(Path(args.config).read_text())

    try:
        traj = run(grid, init, cfg.params, cfg.time,
                   hs_probes=cfg.hs_probes, state_stride=cfg.snapshot_stride)
    except BlowUpError as err:
        print(f"ABORT {err}", file=sys.stderr)
        if err.partial is not None and len(err.partial[0]) > 0:
            emit_series(out / "series.csv", *err.partial)
            print(f"flushed partial series to {out / 'series.csv'}", file=sys.stderr)
        return 1
    emit_series(out / "series.csv", traj.times, traj.series)
    for state in traj.states[:-1]:
        write_snapshot(out / f"snap_t{state.t:012.6f}.qtns", grid, cfg.params, state)
    write_snapshot(out / "final.qtns", grid, cfg.params, traj.states[-1])
    print(f"simulate: {len(traj.times) - 1} steps to t={traj.times[-1]:g}, "
          f"energy {traj.series['energy'][0]:.6g} -> {traj.series['energy'][-1]:.6g}")
    print(f"wrote {out / 'series.csv'}")
    return 0


def cmd_twin(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    grid = Grid(cfg.n, cfg.length)
    init = build_initial_state(cfg, grid)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    diff = twin_run(grid, init, Perturbation(args.eps, seed=args.seed), cfg.params, cfg.time)
    emit_series(out / f"twin_eps{args.eps:g}_seed{args.seed}.csv", diff.times, diff.series)
    reports = [checks.uniqueness_check(diff), checks.difference_regularity_check(diff)]
    for rep in reports:
        print(rep)
    return 0 if all(r.passed for r in reports) else 1


def _trajectory_from_rundir(rundir: Path) -> Trajectory:
    cfg = parse_config((rundir / "config.cfg").read_text())
    times, series = read_series(rundir / "series.csv")
    return Trajectory(Grid(cfg.n, cfg.length), cfg.params, times, series)


def cmd_analyze(args: argparse.Namespace) -> int:
    rundir = Path(args.rundir)
    try:
        traj = _trajectory_from_rundir(rundir)
    except (OSError, ConfigError, ValueError) as err:
        raise SystemExit(f"error: {err}")

    wanted = args.check
    reports = []
    if wanted in ("energy", "all"):
        reports.append(checks.energy_balance_check([traj]))
    if wanted in ("lp_bound", "all"):
        reports += [checks.lp_bound_check(traj, p) for p in (1, 2, 3)]
    if wanted in ("osgood", "all"):
        try:
            reports.append(checks.osgood_check(traj, args.s).report)
        except KeyError as err:
            if wanted == "osgood":
                raise SystemExit(f"error: {err}")
            print(f"skipping osgood: {err}")
    if not reports:
        raise SystemExit(f"error: unknown check {wanted!r} "
                         "(choose energy, lp_bound, osgood or all)")
    for rep in reports:
        print(rep)
    _write_reports(rundir / "reports.csv", reports)
    return 0 if all(r.passed for r in reports) else 1


def _write_reports(path: Path, reports) -> None:
    rows = [r.row() for r in reports]
    keys: list[str] = []
    for row in rows:
        keys += [k for k in row if k not in keys]
    with open(path, "w") as fh:
        fh.write(",".join(keys) + "\n")
        for row in rows:
            fh.write(",".join(str(row.get(k, "")) for k in keys) + "\n")


def cmd_check(args: argparse.Namespace) -> int:
    grid = Grid(args.n)
    trials, seed = args.trials, args.seed
    registry = {
        "partition": lambda: checks.partition_unity_check(grid),
        "bony": lambda: checks.bony_check(grid, trials, seed),
        "sym_decomp": lambda: checks.sym_decomp_check(grid, min(trials, 25), seed),
        "cancellation": lambda: checks.cancellation_ensemble(grid, trials, seed),
        "transport": lambda: checks.transport_cancellation_check(grid, trials, seed),
        "commutator": lambda: checks.commutator_estimate_check(grid, trials, seed),
        "neg_index": lambda: checks.neg_index_check(grid, -0.5, trials, seed),
        "product_law": lambda: checks.product_law_check(
            grid, 0.5, 0.5, trials, seeds=(seed, seed + 1, seed + 2)),
        "linf_interp": lambda: checks.linf_interp_check(grid, 0.5, range(1, 11), trials, seed),
        "force_estimate": lambda: checks.force_estimate_check(
            grid, CHECK_PARAMS, 0.5, trials, seed),
    }
    names = list(registry) if args.name == "all" else [args.name]
    unknown = [nm for nm in names if nm not in registry]
    if unknown:
        raise SystemExit(f"error: unknown check(s) {unknown}; choose from {list(registry)}")
    reports = [registry[nm]() for nm in names]
    for rep in reports:
        print(rep)
    if args.csv:
        _write_reports(Path(args.csv), reports)
    return 0 if all(r.passed for r in reports) else 1


def cmd_norms(args: argparse.Namespace) -> int:
    try:
        grid, _, state = read_snapshot(args.snapshot)
    except OSError as err:
        raise SystemExit(f"error: {err}")
    try:
        s_str, p_str, r_str = args.spec.split(",")
        spec = NormSpec(float(s_str), float(p_str), float("inf") if r_str == "inf" else float(r_str))
    except ValueError:
        raise SystemExit(f"error: --spec must be 's,p,r', got {args.spec!r}")
    part = DyadicPartition(grid)
    print(f"t={state.t:.17g}")
    print(f"besov_u={part.besov_norm(state.u, spec):.17g}")
    print(f"besov_q={part.besov_norm(state.q, spec):.17g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qflow",
                                 description="Pseudo-spectral Q-tensor flow solver and "
                                             "verification harness")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="advance a configured run and store diagnostics")
    p.add_argument("config")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("twin", help="run a state and its perturbed twin")
    p.add_argument("config")
    p.add_argument("--eps", type=float, required=True, help="perturbation amplitude")
    p.add_argument("--seed", type=int, default=0, help="perturbation seed")
    p.set_defaults(func=cmd_twin)

    p = sub.add_parser("analyze", help="run trajectory-level checks on a stored run")
    p.add_argument("rundir")
    p.add_argument("--check", default="all",
                   help="energy, lp_bound, osgood or all (default)")
    p.add_argument("--s", type=float, default=0.5, help="regularity index for osgood")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("check", help="stateless identity/estimate ensembles")
    p.add_argument("name", help="check name or 'all'")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=64, help="grid points per axis")
    p.add_argument("--csv", default=None, help="write reports to this CSV path")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("norms", help="Besov norms of a stored snapshot")
    p.add_argument("snapshot")
    p.add_argument("--spec", default="0.5,2,2", help="s,p,r (r may be 'inf')")
    p.set_defaults(func=cmd_norms)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
