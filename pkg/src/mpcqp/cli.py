"""Command-line entry points: condense, solve, bench."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .fast_gradient import dfg_run, dual_value, until_gap
from .hybrid import floored_start, hybrid_solve
from .interior_point import PdipConfig, pdip_run
from .qp_core import QpInstance, dual_constants, eval_objective
from .report import SolveReport, write_dfg_trace, write_pdip_trace
from .serialize import load_model, load_qp, load_state, save_qp


def _cmd_condense(args) -> int:
    from .mpc_condense import condense_full

    model, cfg = load_model(args.model)
    condensed = condense_full(model, cfg)
    x_t = load_state(args.state) if args.state else np.zeros(model.n_x)
    violated = condensed.check_state(x_t)
    if violated:
        print(f"error: initial state violates {len(violated)} state-only bounds", file=sys.stderr)
        for row in violated:
            print(f"  {row.signal}[{row.component}] stage {row.stage} ({row.side})", file=sys.stderr)
        return 1
    save_qp(args.out, condensed.qp, x_t)
    qp = condensed.qp
    print(f"condensed QP: n={qp.n} decision vars, m={qp.m} constraints, n_x={qp.n_x}")
    print(f"controllability rank: {model.controllability_rank()} of {model.n_x}")
    if condensed.state_rows:
        print(f"state-only bounds checked at build time: {len(condensed.state_rows)}")
    return 0


def _solve_dispatch(args, inst: QpInstance):
    m = inst.problem.m
    if args.solver == "pdip":
        cfg = PdipConfig(epsilon=args.eps, max_iters=args.max_iters)
        init = floored_start(inst, inst.z_least_squares, np.ones(m))
        pt, rep = pdip_run(inst, init, cfg, pure_newton=False)
        return pt.z, rep
    consts = dual_constants(inst.problem, args.ldh)
    if args.eta_d is not None:
        from dataclasses import replace

        consts = replace(consts, eta_d=args.eta_d)
    if args.solver == "hybrid":
        cfg = PdipConfig(epsilon=args.eps, max_iters=args.max_iters)
        z, rep, _cert = hybrid_solve(inst, consts, cfg, dfg_max_iters=args.dfg_cap)
        return z, rep
    res = dfg_run(inst, consts, np.zeros(m), until_gap(args.eps), max_iters=args.dfg_cap)
    gap = eval_objective(inst, res.z) - dual_value(inst, res.lam)
    rep = SolveReport(
        phase1_iters=res.iterations,
        phase2_iters=0,
        phase1_trace=res.trace,
        termination="converged" if res.status == "converged" else "cap",
        final_obj=eval_objective(inst, res.z),
        final_gap=gap,
        infeasibility=res.violation,
    )
    return res.z, rep


def _cmd_solve(args) -> int:
    inst = load_qp(args.qp)
    z, rep = _solve_dispatch(args, inst)
    print(
        f"{args.solver}: {rep.termination}, "
        f"phase1={rep.phase1_iters} phase2={rep.phase2_iters}, "
        f"obj={rep.final_obj:.9g}, gap={rep.final_gap:.3e}, "
        f"infeasibility={rep.infeasibility:.3e}"
    )
    if args.trace:
        trace_path = Path(args.trace)
        if rep.phase2_trace:
            write_pdip_trace(trace_path, rep.phase2_trace)
        if rep.phase1_trace:
            dfg_path = (
                trace_path.with_suffix(".dfg.csv") if rep.phase2_trace else trace_path
            )
            write_dfg_trace(dfg_path, rep.phase1_trace)
    if args.report:
        rep.to_json(args.report)
    if args.solution:
        with open(args.solution, "w") as fh:
            json.dump({"z": z.tolist()}, fh)
    return 0 if rep.termination == "converged" else 1


def _cmd_bench(args) -> int:
    suite = bench_mod.planar_benchmark() if args.suite == "planar" else bench_mod.cessna_benchmark()
    scenarios = tuple(int(s) for s in args.scenarios.split(","))
    result = bench_mod.run_scenarios(
        suite,
        scenarios=scenarios,
        eps=args.eps,
        repetitions=args.reps,
        timing_strict=args.timing_strict,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result.write(out)
    for row in result.table1_rows():
        print(
            f"scenario {row['scenario']}: {row['converged']}/{row['cells']} converged, "
            f"mean iters dfg={row['dfg_iters_mean']:.1f} "
            f"damped={row['damped_iters_mean']:.1f} pure={row['pure_iters_mean']:.1f}"
        )
    for row in result.table2_rows():
        print(
            f"scenario {row['scenario']}: best={row['best_s']:.4g}s "
            f"worst={row['worst_s']:.4g}s average={row['average_s']:.4g}s "
            f"deviation={row['average_deviation_s']:.2g}s"
        )
    if result.assertion_failures:
        print(f"{len(result.assertion_failures)} structural assertion(s) failed:", file=sys.stderr)
        for msg in result.assertion_failures:
            print(f"  {msg}", file=sys.stderr)
        return 1
    print(f"all structural assertions passed; outputs in {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mpcqp", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    pc = sub.add_parser("condense", help="condense a model file into a QP file")
    pc.add_argument("--model", required=True)
    pc.add_argument("--state", help="JSON file with the current state (default: origin)")
    pc.add_argument("--out", required=True)
    pc.set_defaults(func=_cmd_condense)

    ps = sub.add_parser("solve", help="solve a QP file")
    ps.add_argument("--qp", required=True)
    ps.add_argument("--solver", choices=("dfg", "pdip", "hybrid"), default="hybrid")
    ps.add_argument("--eps", type=float, default=1e-6)
    ps.add_argument("--eta-d", dest="eta_d", type=float, default=None,
                    help="override the switch threshold (default: m_d^2 / ldh)")
    ps.add_argument("--ldh", type=float, default=1.0,
                    help="dual-Hessian Lipschitz constant (sets the switch threshold)")
    ps.add_argument("--max-iters", type=int, default=200)
    ps.add_argument("--dfg-cap", type=int, default=50_000)
    ps.add_argument("--trace", help="CSV trace output (hybrid also writes <name>.dfg.csv)")
    ps.add_argument("--report", help="JSON report output")
    ps.add_argument("--solution", help="JSON file for the minimizer z")
    ps.set_defaults(func=_cmd_solve)

    pb = sub.add_parser("bench", help="run a benchmark suite")
    pb.add_argument("--suite", choices=("planar", "cessna"), required=True)
    pb.add_argument("--scenarios", default="1,2,3,4")
    pb.add_argument("--eps", type=float, default=1e-6)
    pb.add_argument("--reps", type=int, default=None)
    pb.add_argument("--out-dir", required=True)
    pb.add_argument("--timing-strict", action="store_true",
                    help="pin timing cells to sequential execution (the default behaviour)")
    pb.set_defaults(func=_cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
