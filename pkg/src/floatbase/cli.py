"""Command-line entry points for the benchmark harness.

Exit code is 0 iff every requested solve completed (error-free), regardless
of how the runs were classified.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import bench
from . import charts as ch


def _parse_charts(text):
    return tuple(ch.ChartKind.from_name(n) for n in text.split(","))


def _options(args):
    opts = bench.DEFAULT_OPTIONS
    if getattr(args, "max_iter", None) is not None:
        opts = replace(opts, max_iterations=args.max_iter)
    if getattr(args, "tol", None) is not None:
        opts = replace(opts, constraint_tol=args.tol)
    return opts


def _cmd_run_task(args):
    chart = ch.ChartKind.from_name(args.chart)
    rep = bench.run_task(args.model, args.task, chart, _options(args),
                         export_path=args.export_traj)
    s = rep.stats
    print(f"task={rep.task} chart={rep.chart} status={s.status} "
          f"success={rep.success} iterations={s.iterations} "
          f"objective={s.final_objective:.6e} violation={s.final_violation:.3e} "
          f"net_rotation={rep.net_rotation:.4f} "
          f"position_error={rep.position_error:.4f}")
    return 0


def _cmd_run_matrix(args):
    reports, failed = bench.run_matrix(args.suite, args.out, _options(args))
    for rep in reports:
        print(f"{rep.task:14s} {rep.chart:12s} {rep.stats.status:14s} "
              f"{rep.success}")
    if failed:
        print(f"{failed} cell(s) failed", file=sys.stderr)
    return 1 if failed else 0


def _cmd_run_noise(args):
    charts = _parse_charts(args.charts)
    sigmas = [float(s) for s in args.sigmas.split(",")]
    reports, failed = bench.run_noise_study(
        args.model, args.task, charts, sigmas, args.replicates, args.seed,
        out_dir=args.out, opts=_options(args))
    for r in reports:
        for sigma, cnt, q in zip(r.sigmas, r.solved_counts,
                                 r.iteration_quartiles):
            qtxt = "-" if q is None else f"{q[0]:g}/{q[1]:g}/{q[2]:g}"
            print(f"{r.task} {r.chart} sigma={sigma:g} "
                  f"solved={cnt}/{r.replicates} iter_q25/50/75={qtxt}")
    if failed:
        print(f"{failed} solve(s) failed", file=sys.stderr)
    return 1 if failed else 0


def build_parser():
    p = argparse.ArgumentParser(prog="floatbase")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("run-task", help="solve one (model, task, chart) cell")
    t.add_argument("--model", required=True)
    t.add_argument("--task", required=True)
    t.add_argument("--chart", required=True,
                   choices=[c.value for c in ch.ALL_CHARTS])
    t.add_argument("--max-iter", type=int)
    t.add_argument("--tol", type=float)
    t.add_argument("--export-traj")
    t.set_defaults(fn=_cmd_run_task)

    m = sub.add_parser("run-matrix", help="run a suite under every chart")
    m.add_argument("--suite", required=True)
    m.add_argument("--out", required=True)
    m.add_argument("--max-iter", type=int)
    m.add_argument("--tol", type=float)
    m.set_defaults(fn=_cmd_run_matrix)

    n = sub.add_parser("run-noise", help="warm-start-noise robustness sweep")
    n.add_argument("--model", required=True)
    n.add_argument("--task", required=True)
    n.add_argument("--charts", required=True,
                   help="comma-separated chart names")
    n.add_argument("--sigmas", required=True,
                   help="comma-separated noise levels")
    n.add_argument("--replicates", type=int, required=True)
    n.add_argument("--seed", type=int, required=True)
    n.add_argument("--out", required=True)
    n.add_argument("--max-iter", type=int)
    n.add_argument("--tol", type=float)
    n.set_defaults(fn=_cmd_run_noise)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except Exception as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
