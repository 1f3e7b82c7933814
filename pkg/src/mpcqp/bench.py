"""Benchmark harness: two plant suites, four solver scenarios, closed-loop
simulation and timing/iteration tables.

Scenarios:

    1  interior point warm-started at the least-squares solution, lam0 = 1
    2  same warm start with lam0 = 1e-6 (near the unconstrained multiplier)
    3  hybrid solver (fast-gradient phase, dual switch, pure Newton phase)
    4  standalone dual fast gradient to the gap tolerance

Every (initial state x scenario) cell is solved once with tracing for the
iteration statistics, then `repetitions` more times without tracing for
the wall-clock medians; the reported time covers instance binding (the
h x and E x refresh) plus the solve, never the condensation, which is
reusable across time steps.  Cells run sequentially so timings are not
polluted by contention.

The plant matrices are fixed, versioned stand-ins with the published
dimensions, instability and constraint structure; iteration figures
reported for the original plants are kept in ``reference_notes`` as
qualitative targets only and never asserted.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.signal import cont2discrete

from .fast_gradient import dfg_run, dual_value, until_gap
from .hybrid import floored_start, hybrid_solve
from .interior_point import PdipConfig, pdip_run
from .mpc_condense import CondensedMpc, LtiModel, MpcConfig, condense_full
from .oracle import reference_oracle
from .qp_core import DualConstants, QpInstance, dual_constants, eval_objective
from .report import SolveReport, write_dfg_trace, write_pdip_trace

_SCENARIO_RULES = {
    1: ("pdip", "ls_warm_lambda_one"),
    2: ("pdip", "ls_warm_lambda_small"),
    3: ("hybrid", "hybrid_default"),
    4: ("dfg", "dfg_only"),
}


@dataclass(frozen=True)
class Scenario:
    """One of the four benchmark configurations (solver + initialization)."""

    id: int
    solver: str
    init_rule: str

    def __post_init__(self):
        if self.id not in _SCENARIO_RULES:
            raise ValueError(f"scenario id must be 1..4, got {self.id}")
        solver, rule = _SCENARIO_RULES[self.id]
        if (self.solver, self.init_rule) != (solver, rule):
            raise ValueError(
                f"scenario {self.id} must use solver={solver!r}, init_rule={rule!r}"
            )


def scenario(sid: int) -> Scenario:
    solver, rule = _SCENARIO_RULES[sid]
    return Scenario(id=sid, solver=solver, init_rule=rule)


@dataclass
class BenchmarkSuite:
    """A plant, its MPC setup, initial states and the timing protocol."""

    name: str
    model: LtiModel
    config: MpcConfig
    initial_states: list
    l_dh: float
    eta_d: float | None = None  # override; default is m_d^2 / l_dh
    repetitions: int = 11
    dfg_cap: int = 50_000
    reference_notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.repetitions < 1 or self.repetitions % 2 == 0:
            raise ValueError("repetitions must be odd so the median is well defined")
        self.initial_states = [np.asarray(x, dtype=float) for x in self.initial_states]


def planar_benchmark() -> BenchmarkSuite:
    """Two-state unstable plant with box bounds on input and output.

    Stand-in matrices: upper-triangular A with spectral radius 1.2, single
    input driving the second state, full-state output.  Reference figures
    for the originally published plant (different matrices) are attached
    as qualitative metadata only.
    """
    model = LtiModel(
        A=[[1.2, 0.5], [0.0, 1.1]],
        B=[[0.0], [1.0]],
        C=np.eye(2),
        D=np.zeros((2, 1)),
    )
    config = MpcConfig(
        N=10,
        Q=np.eye(2),
        R=[[1.0]],
        u_min=[-1.0],
        u_max=[1.0],
        y_min=[-1.0, -1.0],
        y_max=[1.0, 1.0],
    )
    # grid of feasible states whose optima have active constraints
    states = [
        [0.0, 0.9],
        [0.1, 0.85],
        [-0.1, -0.85],
        [0.3, 0.7],
        [0.45, 0.65],
        [-0.5, -0.55],
    ]
    return BenchmarkSuite(
        name="planar",
        model=model,
        config=config,
        initial_states=states,
        l_dh=200.0,
        reference_notes={
            "original_m_d": 1.4529,
            "original_eta_d": 0.0106,
            "original_l_dh": 200.0,
            "original_iterations": {
                "scenario1": {"damped": 6, "pure": 20},
                "scenario2": {"damped": 16, "pure": 8},
                "scenario3": {"pure": 6, "dfg": 65},
                "scenario4": {"dfg": 591},
            },
        },
    )


def cessna_benchmark(n_states: int = 30) -> BenchmarkSuite:
    """Four-state longitudinal aircraft stand-in, sampled at T = 0.25 s.

    Elevator angle bounded at +-15 deg, elevator rate at +-30 deg/s
    (encoded as first-difference rows on consecutive inputs, 30 deg/s * T
    per step), pitch angle at +-30 deg; altitude is unconstrained.  The 30
    initial states vary the altitude coordinate uniformly over the
    feasible region with the other states at trim.  The published
    operating point ("altitude of 5000 km") is physically implausible and
    kept in the metadata verbatim; the stand-in uses a generic trim.
    """
    a_cont = np.array(
        [
            [-1.30, 0.0, 0.98, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [-5.40, 0.0, -1.90, 0.0],
            [-130.0, 130.0, 0.0, 0.0],
        ]
    )
    b_cont = np.array([[-0.30], [0.0], [-16.0], [0.0]])
    c = np.array([[0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0]])  # pitch, altitude
    d = np.zeros((2, 1))
    a_d, b_d, c_d, d_d, _ = cont2discrete((a_cont, b_cont, c, d), dt=0.25, method="zoh")
    model = LtiModel(A=a_d, B=b_d, C=c_d, D=d_d)

    deg = np.pi / 180.0
    config = MpcConfig(
        N=10,
        Q=np.eye(4),
        R=[[10.0]],
        u_min=[-15 * deg],
        u_max=[15 * deg],
        du_min=[-30 * deg * 0.25],
        du_max=[30 * deg * 0.25],
        y_min=[-30 * deg, -np.inf],
        y_max=[30 * deg, np.inf],
    )
    rng = np.random.default_rng(2024)
    altitudes = rng.uniform(0.0, 15.0, size=n_states)
    states = [np.array([0.0, 0.0, 0.0, h]) for h in altitudes]
    # l_dh sized so the switch threshold m_d^2 / l_dh sits near 1e-3 for
    # this plant, keeping hand-offs accurate enough for clean unit steps
    return BenchmarkSuite(
        name="cessna",
        model=model,
        config=config,
        initial_states=states,
        l_dh=9.03e-5,
        repetitions=11,
        dfg_cap=20_000,
        reference_notes={
            "original_m_d": 1.1394e-4,
            "original_eta_d": 2.6e-2,
            "original_l_dh": 5e-7,
            "original_altitude": "5000 km",
            "original_times_s": {
                "dfg": {"best": 0.0063},
                "pdip": {"best": 0.0141, "worst": 0.0398, "average": 0.0264},
                "hybrid": {"best": 0.0024, "worst": 0.0214, "average": 0.0120},
            },
        },
    )


@dataclass
class PreparedSuite:
    """Condensed problem and dual constants, built once per suite."""

    suite: BenchmarkSuite
    condensed: CondensedMpc
    consts: DualConstants


def prepare(suite: BenchmarkSuite) -> PreparedSuite:
    condensed = condense_full(suite.model, suite.config)
    consts = dual_constants(condensed.qp, suite.l_dh)
    if suite.eta_d is not None:
        consts = replace(consts, eta_d=suite.eta_d)
    return PreparedSuite(suite=suite, condensed=condensed, consts=consts)


def _solve_once(prep: PreparedSuite, x_t, scen: Scenario, eps: float, collect_trace: bool):
    """Bind the state and run one scenario; returns (z, SolveReport, cert|None)."""
    inst = QpInstance(prep.condensed.qp, x_t)
    m = inst.problem.m
    if scen.solver == "pdip":
        lam0 = np.ones(m) if scen.init_rule == "ls_warm_lambda_one" else 1e-6 * np.ones(m)
        init = floored_start(inst, inst.z_least_squares, lam0)
        cfg = PdipConfig(epsilon=eps)
        pt, rep = pdip_run(inst, init, cfg, pure_newton=False, collect_trace=collect_trace)
        return pt.z, rep, None
    if scen.solver == "hybrid":
        cfg = PdipConfig(epsilon=eps)
        return hybrid_solve(
            inst, prep.consts, cfg, dfg_max_iters=prep.suite.dfg_cap, collect_trace=collect_trace
        )
    res = dfg_run(
        inst,
        prep.consts,
        np.zeros(m),
        until_gap(eps),
        max_iters=prep.suite.dfg_cap,
        collect_trace=collect_trace,
    )
    gap = eval_objective(inst, res.z) - dual_value(inst, res.lam)
    rep = SolveReport(
        phase1_iters=res.iterations,
        phase2_iters=0,
        phase1_trace=res.trace,
        phase2_trace=[],
        termination="converged" if res.status == "converged" else "cap",
        final_obj=eval_objective(inst, res.z),
        final_gap=gap,
        suboptimality_bound=res.violation**2 / (2.0 * prep.consts.m_d),
        infeasibility=res.violation,
    )
    return res.z, rep, None


@dataclass
class CellResult:
    """One (initial state, scenario) outcome with timing and counters."""

    state_index: int
    scenario_id: int
    termination: str
    dfg_iters: int
    damped_iters: int
    pure_iters: int
    obj: float
    obj_err_rel: float
    infeasibility: float
    median_s: float
    std_s: float
    times_s: list
    report: SolveReport


@dataclass
class BenchResult:
    suite_name: str
    eps: float
    repetitions: int
    timing_strict: bool
    cells: list
    oracle_objs: dict
    assertion_failures: list
    metadata: dict

    @property
    def ok(self) -> bool:
        return not self.assertion_failures

    def table1_rows(self):
        """Phase-count summary: mean/max damped, pure and fast-gradient
        iterations per scenario."""
        rows = []
        for sid in sorted({c.scenario_id for c in self.cells}):
            cells = [c for c in self.cells if c.scenario_id == sid]
            rows.append(
                {
                    "scenario": sid,
                    "cells": len(cells),
                    "converged": sum(c.termination == "converged" for c in cells),
                    "dfg_iters_mean": float(np.mean([c.dfg_iters for c in cells])),
                    "damped_iters_mean": float(np.mean([c.damped_iters for c in cells])),
                    "pure_iters_mean": float(np.mean([c.pure_iters for c in cells])),
                    "dfg_iters_max": max(c.dfg_iters for c in cells),
                    "damped_iters_max": max(c.damped_iters for c in cells),
                    "pure_iters_max": max(c.pure_iters for c in cells),
                }
            )
        return rows

    def table2_rows(self):
        """Timing summary over converged cells: best/worst/average of the
        per-state medians plus the mean per-state deviation."""
        rows = []
        for sid in sorted({c.scenario_id for c in self.cells}):
            cells = [c for c in self.cells if c.scenario_id == sid]
            timed = [c for c in cells if c.termination == "converged"]
            if timed:
                medians = [c.median_s for c in timed]
                row = {
                    "scenario": sid,
                    "timed_cells": len(timed),
                    "best_s": float(np.min(medians)),
                    "worst_s": float(np.max(medians)),
                    "average_s": float(np.mean(medians)),
                    "average_deviation_s": float(np.mean([c.std_s for c in timed])),
                }
            else:
                row = {
                    "scenario": sid,
                    "timed_cells": 0,
                    "best_s": float("nan"),
                    "worst_s": float("nan"),
                    "average_s": float("nan"),
                    "average_deviation_s": float("nan"),
                }
            rows.append(row)
        return rows

    def write(self, out_dir) -> None:
        """Emit summary_table1.csv, summary_table2.csv, traces/*.csv, report.json."""
        import csv
        import json

        out = Path(out_dir)
        (out / "traces").mkdir(parents=True, exist_ok=True)
        for fname, rows in (
            ("summary_table1.csv", self.table1_rows()),
            ("summary_table2.csv", self.table2_rows()),
        ):
            with open(out / fname, "w", newline="") as fh:
                writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
                writer.writeheader()
                writer.writerows(rows)
        for c in self.cells:
            stem = f"state{c.state_index:02d}_scenario{c.scenario_id}"
            if c.report.phase1_trace:
                write_dfg_trace(out / "traces" / f"{stem}_dfg.csv", c.report.phase1_trace)
            if c.report.phase2_trace:
                write_pdip_trace(out / "traces" / f"{stem}_pdip.csv", c.report.phase2_trace)
        doc = {
            "suite": self.suite_name,
            "eps": self.eps,
            "repetitions": self.repetitions,
            "timing_strict": self.timing_strict,
            "assertion_failures": self.assertion_failures,
            "oracle_objs": {str(k): v for k, v in self.oracle_objs.items()},
            "metadata": self.metadata,
            "table1": self.table1_rows(),
            "table2": self.table2_rows(),
            "cells": [
                {
                    "state_index": c.state_index,
                    "scenario": c.scenario_id,
                    "termination": c.termination,
                    "dfg_iters": c.dfg_iters,
                    "damped_iters": c.damped_iters,
                    "pure_iters": c.pure_iters,
                    "obj": c.obj,
                    "obj_err_rel": c.obj_err_rel,
                    "infeasibility": c.infeasibility,
                    "median_s": c.median_s,
                    "std_s": c.std_s,
                    "times_s": c.times_s,
                }
                for c in self.cells
            ],
        }
        with open(out / "report.json", "w") as fh:
            json.dump(doc, fh, indent=2)


def _phase_counts(rep: SolveReport):
    damped = sum(1 for r in rep.phase2_trace if r.phase == "damped")
    pure = sum(1 for r in rep.phase2_trace if r.phase == "pure")
    return rep.phase1_iters, damped, pure


def _check_traces(cell: CellResult, failures: list) -> None:
    # mu is nonincreasing in the path-following regime (scenarios 1 and 3);
    # scenario 2 starts with near-zero multipliers, below the central path,
    # and must rebuild duality-gap mass while restoring feasibility
    if cell.scenario_id in (1, 3):
        mus = [r.mu for r in cell.report.phase2_trace] + (
            [cell.report.final_gap] if cell.report.phase2_trace else []
        )
        for a, b in zip(mus, mus[1:]):
            if b > a * (1 + 1e-9) + 1e-300:
                failures.append(
                    f"state {cell.state_index} scenario {cell.scenario_id}: mu increased {a} -> {b}"
                )
                break
    # best-so-far dual value along the fast-gradient trace is nondecreasing
    best = -np.inf
    prev_best = -np.inf
    for r in cell.report.phase1_trace:
        best = max(best, r.d_lambda_hat)
        if best < prev_best - 1e-12 * max(1.0, abs(prev_best)):
            failures.append(
                f"state {cell.state_index} scenario {cell.scenario_id}: "
                "best-so-far dual value decreased along the fast-gradient trace"
            )
            break
        prev_best = best


def run_scenarios(
    suite: BenchmarkSuite,
    scenarios=(1, 2, 3, 4),
    eps: float = 1e-6,
    repetitions: int | None = None,
    timing_strict: bool = False,
) -> BenchResult:
    """Solve every (initial state x scenario) cell and aggregate tables.

    Per-cell solver failures are recorded in the cell, never aborting the
    sweep.  Structural assertions (scenario 3 takes no damped steps,
    monotone traces, oracle agreement for converged cells) are collected
    into ``assertion_failures``.
    """
    reps = suite.repetitions if repetitions is None else repetitions
    if reps < 1 or reps % 2 == 0:
        raise ValueError("repetitions must be odd")
    prep = prepare(suite)
    scens = [scenario(s) for s in scenarios]
    failures: list[str] = []
    cells: list[CellResult] = []
    oracle_objs: dict[int, float] = {}

    for si, x0 in enumerate(suite.initial_states):
        ref = reference_oracle(QpInstance(prep.condensed.qp, x0), l_d=prep.consts.l_d)
        oracle_objs[si] = ref.obj
        for scen in scens:
            try:
                z, rep, _cert = _solve_once(prep, x0, scen, eps, collect_trace=True)
            except Exception as exc:  # record, keep sweeping
                cells.append(
                    CellResult(
                        state_index=si,
                        scenario_id=scen.id,
                        termination=f"error: {exc}",
                        dfg_iters=0,
                        damped_iters=0,
                        pure_iters=0,
                        obj=float("nan"),
                        obj_err_rel=float("nan"),
                        infeasibility=float("nan"),
                        median_s=float("nan"),
                        std_s=float("nan"),
                        times_s=[],
                        report=SolveReport(phase1_iters=0, phase2_iters=0, termination="cap"),
                    )
                )
                continue
            dfg_iters, damped, pure = _phase_counts(rep)
            obj_err = abs(rep.final_obj - ref.obj) / (1.0 + abs(ref.obj))
            n_reps = reps if rep.termination == "converged" else 1
            times = []
            for _ in range(n_reps):
                t0 = time.perf_counter_ns()
                _solve_once(prep, x0, scen, eps, collect_trace=False)
                times.append((time.perf_counter_ns() - t0) * 1e-9)
            cell = CellResult(
                state_index=si,
                scenario_id=scen.id,
                termination=rep.termination,
                dfg_iters=dfg_iters,
                damped_iters=damped,
                pure_iters=pure,
                obj=rep.final_obj,
                obj_err_rel=obj_err,
                infeasibility=rep.infeasibility,
                median_s=float(np.median(times)),
                std_s=float(np.std(times)),
                times_s=times,
                report=rep,
            )
            cells.append(cell)
            if scen.id == 3 and rep.termination != "cap" and damped > 0:
                failures.append(
                    f"state {si}: hybrid run took {damped} damped Newton steps"
                )
            if rep.termination == "converged":
                if obj_err > 1e-5:
                    failures.append(
                        f"state {si} scenario {scen.id}: objective error {obj_err:.2e} vs oracle"
                    )
                if rep.infeasibility > 1e-6:
                    failures.append(
                        f"state {si} scenario {scen.id}: infeasibility {rep.infeasibility:.2e}"
                    )
            _check_traces(cell, failures)

    metadata = {
        "l_d": prep.consts.l_d,
        "m_d": prep.consts.m_d,
        "M_d": prep.consts.M_d,
        "l_dh": prep.consts.l_dh,
        "eta_d": prep.consts.eta_d,
        "reference_notes": suite.reference_notes,
    }
    return BenchResult(
        suite_name=suite.name,
        eps=eps,
        repetitions=reps,
        timing_strict=timing_strict,
        cells=cells,
        oracle_objs=oracle_objs,
        assertion_failures=failures,
        metadata=metadata,
    )


@dataclass
class TrajectoryLog:
    """Closed-loop record: visited states, applied inputs, per-step stats."""

    states: list
    inputs: list
    stats: list
    status: str


def closed_loop(
    suite: BenchmarkSuite,
    scen: Scenario | int,
    steps: int = 50,
    x0=None,
    eps: float = 1e-6,
) -> TrajectoryLog:
    """Simulate x+ = A x + B u0*(x), applying the first optimal input.

    Each applied input is checked against the input bounds (tolerance
    1e-9).  State-only constraint violations or a failed solve halt the
    loop with a status instead of raising.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if isinstance(scen, int):
        scen = scenario(scen)
    prep = prepare(suite)
    n_u = suite.model.n_u
    x = np.asarray(suite.initial_states[0] if x0 is None else x0, dtype=float)
    states, inputs, stats = [x.copy()], [], []
    status = "completed"
    for _t in range(steps):
        violated = prep.condensed.check_state(x, tol=1e-9)
        if violated:
            status = f"state_infeasible at step {_t}"
            break
        try:
            z, rep, _ = _solve_once(prep, x, scen, eps, collect_trace=False)
        except Exception as exc:
            status = f"solver_error at step {_t}: {exc}"
            break
        if rep.termination != "converged":
            status = f"solver_{rep.termination} at step {_t}"
            break
        u0 = z[:n_u]
        if suite.config.u_max is not None and np.any(u0 > suite.config.u_max + 1e-9):
            raise AssertionError(f"applied input {u0} exceeds upper bound")
        if suite.config.u_min is not None and np.any(u0 < suite.config.u_min - 1e-9):
            raise AssertionError(f"applied input {u0} exceeds lower bound")
        inputs.append(u0.copy())
        stats.append(
            {
                "dfg_iters": rep.phase1_iters,
                "newton_iters": rep.phase2_iters,
                "obj": rep.final_obj,
                "termination": rep.termination,
            }
        )
        x = suite.model.A @ x + suite.model.B @ u0
        states.append(x.copy())
    return TrajectoryLog(states=states, inputs=inputs, stats=stats, status=status)
