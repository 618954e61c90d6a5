"""Command-line harness: run, eval, hyperplanes, verify-theory, report.

Exit codes: 0 success, 2 validation error, 3 divergence, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import metrics
from .cpwl import CpwlParams, verify_lemma_bound
from .estimator import protocol_defaults
from .functional import FdRule, LossKernel, build_mesh
from .hyperplanes import first_layer_lines, second_layer_polylines
from .network import Architecture, forward_batch, param_count
from .optim import DivergenceError, TrainConfig, train
from .persistence import (Checkpoint, CheckpointError, append_csv_row, load_checkpoint,
                          read_csv_rows, save_checkpoint, write_csv)
from .problems import make_benchmark

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DIVERGENCE = 3
EXIT_IO = 4

METRICS_HEADER = ["problem", "arch", "mesh_h", "rel_l2", "rel_graph", "ls_ratio", "params"]
HISTORY_HEADER = ["iter", "lr", "interior_term", "boundary_term", "total"]
POLYLINES_HEADER = ["layer", "unit", "x", "y"]


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    return int(os.environ.get("LSNN_THREADS", "1"))


def _net_fn(net):
    return lambda x: forward_batch(net.arch, net.params, np.atleast_2d(x))[0]


def _metrics_row(spec, arch, net, mesh, rule):
    fn = _net_fn(net)
    try:
        ratio = metrics.ls_ratio(fn, spec, mesh, rule)
    except ZeroDivisionError:
        ratio = float("nan")  # v == 0: the homogeneous functional vanishes
    rep = metrics.ErrorReport(spec.problem_id, arch,
                              metrics.relative_l2(fn, spec, mesh),
                              metrics.relative_graph_norm(fn, spec, mesh, rule),
                              ratio)
    return [spec.problem_id, str(arch), f"{mesh.h:.17g}", f"{rep.rel_l2:.17g}",
            f"{rep.rel_graph:.17g}", f"{rep.ls_ratio:.17g}", rep.params], rep


def cmd_run(args) -> int:
    try:
        spec = make_benchmark(args.problem)
        d = protocol_defaults(args.problem)
        arch = Architecture.parse(args.arch or d.arch)
        rho_div = args.rho_divisor if args.rho_divisor is not None else d.rho_divisor
        iters = args.iters if args.iters is not None else d.iters
        halve = args.halve_every if args.halve_every is not None else d.halve_every
        mesh = build_mesh(spec, args.h)
        rule = FdRule(args.h / rho_div)
        cfg = TrainConfig(iters=iters, lr0=args.lr0, halve_every=halve,
                          pretrain_restarts=args.pretrain_restarts,
                          pretrain_iters=args.pretrain_iters, seed=args.seed,
                          log_every=args.log_every, threads=_threads(args))
    except (ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION

    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        print(f"error: cannot create {out}: {e}", file=sys.stderr)
        return EXIT_IO

    try:
        net, history, _ = train(arch, spec, mesh, rule, cfg)
    except DivergenceError as e:
        print(f"error: training diverged: {e}", file=sys.stderr)
        if e.last_good is not None:
            kern = LossKernel(spec, mesh, rule, threads=cfg.threads)
            bd = kern.loss(e.last_good)
            kern.close()
            ck = Checkpoint(arch, args.seed, -1, e.last_good.params,
                            np.zeros_like(e.last_good.params),
                            np.zeros_like(e.last_good.params), bd)
            save_checkpoint(ck, out / "checkpoint.lsnn")
            print(f"last good checkpoint written to {out / 'checkpoint.lsnn'}", file=sys.stderr)
        return EXIT_DIVERGENCE

    try:
        kern = LossKernel(spec, mesh, rule, threads=cfg.threads)
        bd = kern.loss(net)
        kern.close()
        ck = Checkpoint(arch, args.seed, cfg.iters, net.params,
                        np.zeros_like(net.params), np.zeros_like(net.params), bd)
        save_checkpoint(ck, out / "checkpoint.lsnn")
        write_csv(out / "history.csv", HISTORY_HEADER,
                  [[it, f"{lr:.17g}", f"{a:.17g}", f"{b:.17g}", f"{t:.17g}"]
                   for it, lr, a, b, t in history])
        row, rep = _metrics_row(spec, arch, net, mesh, rule)
        write_csv(out / "metrics.csv", METRICS_HEADER, [row])
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    print(f"problem {spec.problem_id}  {arch}  rel_l2={rep.rel_l2:.6f}  "
          f"rel_graph={rep.rel_graph:.6f}  ls_ratio={rep.ls_ratio:.6f}  params={rep.params}")
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        ck = load_checkpoint(args.checkpoint)
    except (OSError, CheckpointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO if isinstance(e, OSError) else EXIT_VALIDATION
    try:
        spec = make_benchmark(args.problem)
        d = protocol_defaults(args.problem)
        rho_div = args.rho_divisor if args.rho_divisor is not None else d.rho_divisor
        h = args.eval_h
        mesh = build_mesh(spec, h)
        rule = FdRule(h / rho_div)
    except (ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    net = ck.network
    row, rep = _metrics_row(spec, net.arch, net, mesh, rule)
    print(f"problem {spec.problem_id}  {net.arch}  h={h}  rel_l2={rep.rel_l2:.6f}  "
          f"rel_graph={rep.rel_graph:.6f}  ls_ratio={rep.ls_ratio:.6f}  params={rep.params}")
    if args.metrics_csv:
        try:
            append_csv_row(args.metrics_csv, METRICS_HEADER, row)
        except OSError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_IO
    return EXIT_OK


def cmd_hyperplanes(args) -> int:
    try:
        ck = load_checkpoint(args.checkpoint)
    except (OSError, CheckpointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO if isinstance(e, OSError) else EXIT_VALIDATION
    net = ck.network
    slice_z = args.slice
    if net.arch.input_dim == 3 and slice_z is None:
        print("error: 3-D network requires --slice (plane z = const)", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        lines = first_layer_lines(net, slice_z=slice_z)
        polys = second_layer_polylines(net, grid_n=args.grid_n, slice_z=slice_z)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    rows = []
    for pl in lines + polys:
        for vx, vy in pl.vertices:
            rows.append([pl.layer, pl.unit_index, f"{vx:.17g}", f"{vy:.17g}"])
    try:
        write_csv(args.out, POLYLINES_HEADER, rows)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {len(lines)} first-layer lines and {len(polys)} second-layer chains to {args.out}")
    return EXIT_OK


def cmd_verify_theory(args) -> int:
    try:
        eps1s = [float(t) for t in args.eps1.split(",")]
        eps2s = [float(t) for t in args.eps2.split(",")]
        ds = [float(t) for t in args.d.split(",")]
        sweep = [CpwlParams(args.x0, e1, e2, dd, args.B)
                 for e1 in eps1s for e2 in eps2s for dd in ds]
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    rows = []
    any_fail = False
    print(f"{'eps1':>8} {'eps2':>8} {'d':>8} {'B':>6} {'lhs':>12} {'rhs':>12}  holds")
    for p in sweep:
        lhs, rhs, holds = verify_lemma_bound(p, quad_n=args.quad_n)
        any_fail |= not holds
        print(f"{p.eps1:8.4f} {p.eps2:8.4f} {p.d:8.4f} {p.B:6.2f} {lhs:12.6g} {rhs:12.6g}  {holds}")
        rows.append([p.eps1, p.eps2, p.d, p.B, f"{lhs:.17g}", f"{rhs:.17g}", holds])
    if args.out:
        try:
            write_csv(args.out, ["eps1", "eps2", "d", "B", "lhs", "rhs", "holds"], rows)
        except OSError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_IO
    return EXIT_OK if not any_fail else 1


def cmd_report(args) -> int:
    files = sorted(Path(args.dir).rglob("metrics.csv"))
    if not files:
        print(f"error: no metrics.csv files under {args.dir}", file=sys.stderr)
        return EXIT_VALIDATION
    rows = []
    for f in files:
        for r in read_csv_rows(f):
            missing = [c for c in METRICS_HEADER if c not in r]
            if missing:
                print(f"error: {f}: missing columns {missing}", file=sys.stderr)
                return EXIT_VALIDATION
            rows.append(r)
    # keep the latest row per (problem, arch); later files win
    latest = {}
    for r in rows:
        k = (r["problem"], r["arch"])
        if k in latest:
            print(f"warning: duplicate rows for problem {k[0]} arch {k[1]}; keeping latest",
                  file=sys.stderr)
        latest[k] = r
    by_problem = {}
    for (pid, _), r in latest.items():
        by_problem.setdefault(int(pid), []).append(r)
    for pid in sorted(by_problem):
        print(f"\nProblem {pid}")
        print(f"{'Network structure':<18} {'rel L2':>10} {'rel graph':>10} {'LS ratio':>10} {'Parameters':>10}")
        for r in by_problem[pid]:
            print(f"{r['arch']:<18} {float(r['rel_l2']):>10.6f} {float(r['rel_graph']):>10.6f} "
                  f"{float(r['ls_ratio']):>10.6f} {r['params']:>10}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lsnn", description=__doc__)
    ap.add_argument("--threads", type=int, default=None,
                    help="worker threads (default: LSNN_THREADS env var or 1)")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train one benchmark and write checkpoint + CSVs")
    run.add_argument("--problem", type=int, required=True, choices=range(1, 7))
    run.add_argument("--arch", default=None, help="e.g. 2-20-20-1 (default: per-problem)")
    run.add_argument("--h", type=float, default=0.01)
    run.add_argument("--rho-divisor", dest="rho_divisor", type=float, default=None)
    run.add_argument("--iters", type=int, default=None)
    run.add_argument("--halve-every", dest="halve_every", type=int, default=None)
    run.add_argument("--lr0", type=float, default=0.004)
    run.add_argument("--pretrain-restarts", type=int, default=10)
    run.add_argument("--pretrain-iters", type=int, default=5000)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--log-every", type=int, default=1000)
    run.add_argument("--out-dir", dest="out_dir", default="out")
    run.set_defaults(fn=cmd_run)

    ev = sub.add_parser("eval", help="recompute metrics for a checkpoint on a chosen mesh")
    ev.add_argument("checkpoint")
    ev.add_argument("--problem", type=int, required=True, choices=range(1, 7))
    ev.add_argument("--eval-h", dest="eval_h", type=float, default=0.01)
    ev.add_argument("--rho-divisor", dest="rho_divisor", type=float, default=None)
    ev.add_argument("--metrics-csv", default=None, help="append the row to this CSV")
    ev.set_defaults(fn=cmd_eval)

    hp = sub.add_parser("hyperplanes", help="extract breaking hyperplanes to CSV")
    hp.add_argument("checkpoint")
    hp.add_argument("--grid-n", dest="grid_n", type=int, default=256)
    hp.add_argument("--slice", type=float, default=None, help="z-plane for 3-D nets (e.g. 0.505)")
    hp.add_argument("--out", default="polylines.csv")
    hp.set_defaults(fn=cmd_hyperplanes)

    vt = sub.add_parser("verify-theory", help="check the strip-approximation norm bound on a sweep")
    vt.add_argument("--x0", type=float, default=0.5)
    vt.add_argument("--eps1", default="1.0,0.5,0.25")
    vt.add_argument("--eps2", default="0.1,0.05,0.025")
    vt.add_argument("--d", default="0.5,1.0,2.0")
    vt.add_argument("--B", type=float, default=1.0)
    vt.add_argument("--quad-n", dest="quad_n", type=int, default=512)
    vt.add_argument("--out", default=None)
    vt.set_defaults(fn=cmd_verify_theory)

    rp = sub.add_parser("report", help="merge metrics.csv files into per-problem tables")
    rp.add_argument("dir")
    rp.set_defaults(fn=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
