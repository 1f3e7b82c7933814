"""Dense QP solvers for condensed linear MPC.

Three solvers share one problem form: a dual fast-gradient method, an
infeasible-start primal-dual interior-point method, and a hybrid that
runs the fast gradient to a dual switch condition and finishes with pure
Newton steps, skipping the damped phase entirely.
"""
from .bench import (
    BenchmarkSuite,
    Scenario,
    cessna_benchmark,
    closed_loop,
    planar_benchmark,
    run_scenarios,
    scenario,
)
from .fast_gradient import (
    DfgResult,
    DfgState,
    dfg_run,
    dfg_step,
    dual_gradient,
    dual_value,
    inner_minimize,
    until_gap,
    until_violation,
)
from .hybrid import SwitchCertificate, floored_start, handoff, hybrid_solve, switch_condition
from .interior_point import (
    FactorizationError,
    KktResidual,
    LineSearchError,
    PdipConfig,
    backtrack,
    max_step_to_boundary,
    newton_direction,
    pdip_run,
    residual,
)
from .mpc_condense import (
    CondensedMpc,
    ConstraintRow,
    LtiModel,
    MpcConfig,
    PredictionMatrices,
    build_prediction,
    condense,
    condense_full,
)
from .oracle import InfeasibleProblemError, OracleError, OracleSolution, reference_oracle
from .qp_core import (
    CondensedQp,
    DualConstants,
    PowerIterationError,
    PrimalDualPoint,
    QpInstance,
    QpValidationError,
    dual_constants,
    eval_constraints,
    eval_objective,
    project_nonneg,
    validate,
)
from .report import DfgTraceRow, PdipTraceRow, SolveReport, write_dfg_trace, write_pdip_trace
from .serialize import load_model, load_qp, load_state, save_model, save_qp

__version__ = "0.1.0"
