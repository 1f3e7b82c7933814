"""Two-phase solver: dual fast gradient until the switch test fires, then
pure-Newton interior point from a hand-off point built out of the dual
solution.

The switch test lives in the dual space: once the positive part of the
constraint values satisfies ||[g(z)]_+||_2 <= eta_d, the fast-gradient
iterate is close enough to the central path for unit Newton steps to be
accepted, so the damped phase of the interior-point method is skipped
entirely.  The hand-off keeps the duality-gap information computed so
far: s_0 = |g(z)| componentwise (the sum of the reflected negative part
and the positive part), lam_0 is the ascent-projected multiplier, both
floored away from zero since exactly-active constraints yield s = 0 and
projected multipliers commonly carry exact zeros.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .fast_gradient import dfg_run, inner_minimize, until_violation
from .interior_point import PdipConfig, pdip_run
from .qp_core import (
    DualConstants,
    PrimalDualPoint,
    QpInstance,
    eval_constraints,
    eval_objective,
    project_nonneg,
)
from .report import SolveReport

# positivity floors applied at hand-off, relative to the iterate's own scale
FLOOR_SCALE = 1e-8


@dataclass(frozen=True)
class SwitchCertificate:
    """Record of the dual switch event.

    k_switch counts fast-gradient iterations used.  The floor-binding
    counts say on how many components the positivity repair engaged (zero
    bindings means s'lam carries the dual gap exactly); lam_lifted counts
    the components additionally raised by the centering balance.
    """

    k_switch: int
    violation_at_switch: float
    eta_d: float
    handoff: PrimalDualPoint
    mu_at_handoff: float
    s_floor_bindings: int = 0
    lam_floor_bindings: int = 0
    lam_lifted: int = 0


def switch_condition(inst: QpInstance, z: np.ndarray, eta_d: float) -> bool:
    """True once ||[g(z)]_+||_2 <= eta_d (inclusive at the boundary)."""
    viol = np.linalg.norm(project_nonneg(eval_constraints(inst, z)))
    return bool(viol <= eta_d)


def floored_start(inst: QpInstance, z: np.ndarray, lam: np.ndarray) -> PrimalDualPoint:
    """Interior starting point with s = |g(z)|, both vectors floored away
    from zero at 1e-8 relative to their own sup-norm.  The same rule also
    warm-starts the plain interior-point scenarios."""
    gval = eval_constraints(inst, z)
    s_floor = FLOOR_SCALE * max(1.0, float(np.abs(gval).max(initial=0.0)))
    lam_floor = FLOOR_SCALE * max(1.0, float(np.abs(lam).max(initial=0.0)))
    return PrimalDualPoint(
        z=np.array(z, dtype=float),
        lam=np.maximum(lam, lam_floor),
        s=np.maximum(np.abs(gval), s_floor),
    )


def handoff(inst: QpInstance, z_dfg: np.ndarray, lam_dfg: np.ndarray) -> PrimalDualPoint:
    """Build the interior-point start (z, lam, s) from the dual solution.

    s_0 = |g(z_dfg)| equals -[g]_- + [g]_+ componentwise, which preserves
    the duality gap computed by the first phase; the positivity floors
    only engage on exactly-active constraints and exactly-zero
    multipliers.

    On top of the floors, multipliers are lifted so every product s_i
    lam_i reaches the largest product already present.  The projected
    dual iterate carries exact zeros on inactive components, and without
    the lift those products dilute the average gap by a factor of m: the
    first Newton target tau = sigma * mu then sits orders of magnitude
    below the dominant active product, and no sigma in (0,1) lets a unit
    step close that spread without crossing the positivity boundary.

    The lift is capped at (max product) / (median slack): small-slack
    rows would otherwise receive large multipliers whose one-shot removal
    by the first Newton step overshoots the hyperbola s*lam = tau and
    leaves the cone.
    """
    gval = eval_constraints(inst, z_dfg)
    s_floor = FLOOR_SCALE * max(1.0, float(np.abs(gval).max(initial=0.0)))
    lam_floor = FLOOR_SCALE * max(1.0, float(np.abs(lam_dfg).max(initial=0.0)))
    s0 = np.maximum(np.abs(gval), s_floor)
    lam_pos = np.maximum(lam_dfg, lam_floor)
    p_max = float(np.max(s0 * lam_pos))
    lift_cap = p_max / max(float(np.quantile(s0, 0.5)), s_floor)
    lam0 = np.maximum(lam_pos, np.minimum(p_max / s0, lift_cap))
    return PrimalDualPoint(z=np.array(z_dfg, dtype=float), lam=lam0, s=s0)


def hybrid_solve(
    inst: QpInstance,
    consts: DualConstants,
    cfg: PdipConfig,
    dfg_max_iters: int = 50_000,
    collect_trace: bool = True,
) -> tuple[np.ndarray, SolveReport, Optional[SwitchCertificate]]:
    """Run phase 1 to the switch, hand off, run phase 2 to mu <= epsilon.

    Requires epsilon < eta_d: the Newton phase must be asked for more
    accuracy than the switch threshold certifies.  If the fast-gradient
    cap is hit before the switch the report carries status "cap" and no
    certificate is produced.
    """
    if cfg.epsilon >= consts.eta_d:
        raise ValueError(
            f"epsilon ({cfg.epsilon}) must lie below the switch threshold eta_d ({consts.eta_d})"
        )
    m = inst.problem.m
    phase1 = dfg_run(
        inst,
        consts,
        np.zeros(m),
        until_violation(consts.eta_d),
        max_iters=dfg_max_iters,
        collect_trace=collect_trace,
    )
    if phase1.status != "converged":
        infeas = float(np.linalg.norm(project_nonneg(eval_constraints(inst, phase1.z))))
        report = SolveReport(
            phase1_iters=phase1.iterations,
            phase2_iters=0,
            phase1_trace=phase1.trace,
            phase2_trace=[],
            termination="cap",
            final_obj=eval_objective(inst, phase1.z),
            final_gap=float("nan"),
            suboptimality_bound=infeas**2 / (2.0 * consts.m_d),
            infeasibility=infeas,
        )
        return phase1.z, report, None

    # hand off the consistent primal-dual pair: one more inner solve at the
    # returned multiplier zeroes the dual residual exactly
    z_dfg = inner_minimize(inst, phase1.lam)
    gval = eval_constraints(inst, z_dfg)
    s_floor = FLOOR_SCALE * max(1.0, float(np.abs(gval).max(initial=0.0)))
    lam_floor = FLOOR_SCALE * max(1.0, float(np.abs(phase1.lam).max(initial=0.0)))
    pt0 = handoff(inst, z_dfg, phase1.lam)
    cert = SwitchCertificate(
        k_switch=phase1.iterations,
        violation_at_switch=phase1.violation,
        eta_d=consts.eta_d,
        handoff=pt0,
        mu_at_handoff=pt0.mu(),
        s_floor_bindings=int(np.count_nonzero(np.abs(gval) < s_floor)),
        lam_floor_bindings=int(np.count_nonzero(phase1.lam < lam_floor)),
        lam_lifted=int(np.count_nonzero(pt0.lam > np.maximum(phase1.lam, lam_floor))),
    )

    final_pt, phase2 = pdip_run(inst, pt0, cfg, pure_newton=True, collect_trace=collect_trace)
    infeas = float(np.linalg.norm(project_nonneg(eval_constraints(inst, final_pt.z))))
    report = SolveReport(
        phase1_iters=phase1.iterations,
        phase2_iters=phase2.phase2_iters,
        phase1_trace=phase1.trace,
        phase2_trace=phase2.phase2_trace,
        termination=phase2.termination,
        final_obj=eval_objective(inst, final_pt.z),
        final_gap=phase2.final_gap,
        suboptimality_bound=infeas**2 / (2.0 * consts.m_d),
        infeasibility=infeas,
        premature_switch=phase2.premature_switch,
    )
    return final_pt.z, report, cert
