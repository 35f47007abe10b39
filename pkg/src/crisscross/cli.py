"""Command-line entry point.

Subcommands: solve-fb, simulate-bcp, simulate-network, select-params,
experiment, compare.  Exit codes: 0 success, 2 configuration error, 3 stage
failure.  All outputs are deterministic for a fixed --seed; wall-clock
metadata is kept out of the CSVs.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import boundary as bnd
from .errors import ConfigError, CrisscrossError, StageError
from .experiment import (ExperimentPlan, compare_policies, run_experiment)
from .ldp import select_thresholds, selection_to_text
from .netsim import (PolicyThresholds, PrimitiveDistributions, results_to_csv,
                     run_network, run_replications)
from .params import brownian_data, load_params
from .rbm import McConfig, estimate_jstar


def _parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="crisscross",
                                  description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="network parameter file")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", required=True, help="output file or directory")
    common.add_argument("--threads", type=int, default=None,
                        help="worker processes for replication sweeps")
    sub = top.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve-fb", parents=[common],
                       help="solve the workload control problem and extract the boundary")
    s.add_argument("--h", type=float, default=None, help="grid spacing")
    s.add_argument("--wmax", type=float, default=None, help="domain extent")

    s = sub.add_parser("simulate-bcp", parents=[common],
                       help="Monte Carlo estimate of the limiting optimal cost")
    s.add_argument("--fb", required=True, help="boundary file from solve-fb")
    s.add_argument("--paths", type=int, default=100_000)
    s.add_argument("--dt", type=float, default=0.01)
    s.add_argument("--horizon", type=float, default=None)

    s = sub.add_parser("simulate-network", parents=[common],
                       help="replicated discrete-event runs of the n-th network")
    s.add_argument("--fb", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--reps", type=int, default=200)
    s.add_argument("--horizon", type=float, default=None, help="scaled horizon")
    s.add_argument("--c", type=float, default=None)
    s.add_argument("--l0", type=float, default=None)
    s.add_argument("--g0", type=float, default=1.0)
    s.add_argument("--d", type=float, default=1.0)
    s.add_argument("--primitives", default="exponential")
    s.add_argument("--event-log", action="store_true",
                   help="dump the event log of replication 0")

    s = sub.add_parser("select-params", parents=[common],
                       help="evaluate the threshold-parameter formulas")
    s.add_argument("--n-schedule", default="100,400,1600,6400")
    s.add_argument("--primitives", default="exponential")

    for name in ("experiment", "compare"):
        s = sub.add_parser(name, parents=[common])
        s.add_argument("--n-schedule", default="100,400,1600,6400")
        s.add_argument("--reps", type=int, default=200)
        s.add_argument("--h", type=float, default=None)
        s.add_argument("--wmax", type=float, default=None)
        s.add_argument("--paths", type=int, default=100_000)
        s.add_argument("--dt", type=float, default=0.01)
        s.add_argument("--horizon", type=float, default=None)
        s.add_argument("--c", type=float, default=None,
                       help="threshold growth constant; omit for auto selection")
        s.add_argument("--l0", type=float, default=None)
        s.add_argument("--g0", type=float, default=1.0)
        s.add_argument("--d", type=float, default=1.0)
        s.add_argument("--primitives", default="exponential")
        s.add_argument("--no-solve", action="store_true",
                       help="fail unless a cached boundary exists")
        if name == "compare":
            s.add_argument("--variants",
                           default="threshold,psi-zero,priority1,priority2")
    return top


def _thresholds_from_args(args) -> PolicyThresholds | str:
    if args.c is None and args.l0 is None:
        return "auto"
    if args.c is None or args.l0 is None:
        raise ConfigError("give both --c and --l0 or neither (auto)")
    return PolicyThresholds(c=args.c, l0=args.l0, g0=args.g0, d=args.d)


def _plan_from_args(args) -> ExperimentPlan:
    p = load_params(args.config)
    schedule = tuple(int(x) for x in args.n_schedule.split(","))
    return ExperimentPlan(
        params=p, out_dir=Path(args.out),
        mc=McConfig(n_paths=args.paths, dt=args.dt, horizon=args.horizon,
                    seed=args.seed),
        grid_h=args.h, wmax=args.wmax, n_schedule=schedule, reps=args.reps,
        thresholds=_thresholds_from_args(args),
        primitives=PrimitiveDistributions.parse(args.primitives),
        seed=args.seed, workers=args.threads, solve=not args.no_solve)


def _cmd_solve_fb(args) -> int:
    p = load_params(args.config)
    bd = brownian_data(p)
    wmax = args.wmax if args.wmax is not None else bnd.default_wmax(bd, p.gamma)
    h = args.h if args.h is not None else wmax / 200
    vg = bnd.solve_value(p, bd, bnd.GridSpec(h=h, wmax=wmax))
    fb = bnd.extract_boundary(vg, p)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bnd.save_value_grid(vg, out / "value_grid.csv")
    bnd.save_boundary(fb, out / "boundary.csv")
    resid = bnd.hjb_residual(vg, p, bd)
    print(f"solved {vg.n1+1}x{vg.n2+1} grid in {vg.sweeps} sweeps, "
          f"HJB residual {resid:.3e}, J(0,0)={vg.values[0,0]:.6f}")
    print(f"wrote {out/'boundary.csv'} and {out/'value_grid.csv'}")
    return 0


def _cmd_simulate_bcp(args) -> int:
    p = load_params(args.config)
    fb = bnd.load_boundary(args.fb)
    cfg = McConfig(n_paths=args.paths, dt=args.dt, horizon=args.horizon,
                   seed=args.seed)
    est = estimate_jstar(p, fb, brownian_data(p), cfg)
    out = Path(args.out)
    if out.is_dir():
        out = out / "jstar.csv"
    with open(out, "w") as fh:
        fh.write("quantity,value\n")
        fh.write(f"jstar_mean,{est.mean!r}\n")
        fh.write(f"jstar_se,{est.std_error!r}\n")
        fh.write(f"n_samples,{est.n_samples}\n")
        fh.write(f"horizon,{est.horizon!r}\n")
        fh.write(f"tail_bound,{est.tail_bound!r}\n")
        fh.write(f"dt,{est.dt!r}\n")
    print(f"J*(0) = {est.mean:.6f} +- {est.std_error:.6f} "
          f"(tail bound {est.tail_bound:.2e})")
    return 0


def _cmd_simulate_network(args) -> int:
    p = load_params(args.config)
    fb = bnd.load_boundary(args.fb)
    prim = PrimitiveDistributions.parse(args.primitives)
    th = _thresholds_from_args(args)
    if th == "auto":
        sel = select_thresholds(p, prim)
        th = PolicyThresholds(c=sel.c, l0=sel.lbar, g0=args.g0, d=sel.d)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = run_replications(p, th, fb, prim, args.n, args.reps,
                               horizon=args.horizon, seed=args.seed,
                               workers=args.threads)
    results_to_csv(results, out / f"replications_n{args.n}.csv")
    if args.event_log:
        ss = np.random.SeedSequence(args.seed).spawn(1)[0]
        _, log = run_network(p, th, fb, prim, args.n, horizon=args.horizon,
                             seed=ss, log_capacity=2_000_000)
        with open(out / f"event_log_n{args.n}.csv", "w") as fh:
            fh.write("time,event,q1,q2,q3,action,branch\n")
            for i in range(len(log["time"])):
                q = log["queues"][i]
                fh.write(f"{log['time'][i]!r},{log['event'][i]},{q[0]},{q[1]},"
                         f"{q[2]},{log['action'][i]},{log['branch'][i]}\n")
    j = np.array([r.jhat for r in results])
    print(f"n={args.n}: mean jhat {j.mean():.6f} "
          f"+- {j.std(ddof=1)/np.sqrt(len(j)):.6f} over {args.reps} reps")
    return 0


def _cmd_select_params(args) -> int:
    p = load_params(args.config)
    prim = PrimitiveDistributions.parse(args.primitives)
    schedule = tuple(int(x) for x in args.n_schedule.split(","))
    sel = select_thresholds(p, prim, n_schedule=schedule)
    out = Path(args.out)
    if out.is_dir():
        out = out / "selected_params.txt"
    out.write_text(selection_to_text(sel))
    print(f"theta4={sel.theta4:.6g} c={sel.c:.6g} gamma4={sel.gamma4:.6g} "
          f"lbar={sel.lbar:.6g}; wrote {out}")
    return 0


def _cmd_experiment(args) -> int:
    plan = _plan_from_args(args)
    report = run_experiment(plan)
    print(f"J*(0) = {report.jstar.mean:.5f} +- {report.jstar.std_error:.5f}")
    for row in report.rows:
        print(f"n={row['n']:>6}: mean {row['jhat_mean']:.5f} "
              f"+- {row['jhat_se']:.5f}  rel gap {row['rel_gap']*100:+.1f}%")
    print(f"report: {report.report_file}")
    return 0


def _cmd_compare(args) -> int:
    plan = _plan_from_args(args)
    variants = tuple(v for v in args.variants.split(",") if v)
    table = compare_policies(plan, variants)
    for row in table:
        print(f"{row['variant']:>10} n={row['n']:>6}: "
              f"{row['jhat_mean']:.5f} +- {row['jhat_se']:.5f}")
    return 0


_COMMANDS = {
    "solve-fb": _cmd_solve_fb,
    "simulate-bcp": _cmd_simulate_bcp,
    "simulate-network": _cmd_simulate_network,
    "select-params": _cmd_select_params,
    "experiment": _cmd_experiment,
    "compare": _cmd_compare,
}


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except StageError as e:
        print(f"error in stage {e.args[0] if e.args else '?'}: {e}",
              file=sys.stderr)
        return 3
    except (ConfigError, FileNotFoundError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    except CrisscrossError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
