"""Independent reference solutions for verifying the iterative solvers.

Small problems (m <= 24) are solved exactly by active-set enumeration:
for every candidate subset of constraints treated as equalities, solve
the equality-constrained KKT system and accept the first subset whose
multipliers are nonnegative and whose solution is primal feasible.  For
a strictly convex QP any KKT point is the unique global optimum, so the
first hit certifies.  If no subset works the instance is infeasible.

Larger problems fall back to a long interior-point run (gap 1e-12)
cross-checked by a projected-gradient ascent on the dual, warm-started at
the interior-point multiplier: the ascent is monotone in the dual value,
so it produces an independent lower bound that must close the primal-dual
gap to 1e-10 before the answer is accepted.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .fast_gradient import dual_value, inner_minimize
from .hybrid import floored_start
from .interior_point import PdipConfig, pdip_run
from .qp_core import (
    QpInstance,
    dual_constants,
    eval_constraints,
    eval_objective,
    project_nonneg,
)

ENUMERATION_LIMIT = 24


class InfeasibleProblemError(RuntimeError):
    """No active set admits a KKT point: the constraint system is empty."""


class OracleError(RuntimeError):
    """The fallback route could not certify a solution to the target gap."""


@dataclass(frozen=True)
class OracleSolution:
    z: np.ndarray
    lam: np.ndarray
    active: tuple[int, ...]
    obj: float


def _enumerate_active_sets(inst: QpInstance) -> OracleSolution:
    H = inst.problem.H
    G = inst.problem.G
    q = inst.linear_cost
    e = inst.constraint_shift
    n, m = inst.problem.n, inst.problem.m
    scale = 1.0 + float(np.abs(e).max(initial=0.0))
    feas_tol = 1e-9 * scale
    dual_tol = 1e-9
    for size in range(0, min(n, m) + 1):
        for subset in combinations(range(m), size):
            idx = list(subset)
            G_a = G[idx]
            kkt = np.zeros((n + size, n + size))
            kkt[:n, :n] = H
            kkt[:n, n:] = G_a.T
            kkt[n:, :n] = G_a
            rhs = np.concatenate([-q, -e[idx]])
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                continue
            # reject near-singular systems that solved to garbage
            if not np.all(np.isfinite(sol)):
                continue
            if np.linalg.norm(kkt @ sol - rhs) > 1e-8 * (1.0 + np.linalg.norm(rhs)):
                continue
            z, lam_a = sol[:n], sol[n:]
            if size and (lam_a < -dual_tol).any():
                continue
            if (G @ z + e > feas_tol).any():
                continue
            lam = np.zeros(m)
            lam[idx] = np.maximum(lam_a, 0.0)
            return OracleSolution(
                z=z, lam=lam, active=tuple(subset), obj=eval_objective(inst, z)
            )
    raise InfeasibleProblemError("no active set yields a KKT point; instance infeasible")


def _pdip_with_crosscheck(inst: QpInstance, l_d: float | None = None) -> OracleSolution:
    cfg = PdipConfig(epsilon=1e-12, max_iters=400)
    init = floored_start(inst, inst.z_least_squares, np.ones(inst.problem.m))
    pt, rep = pdip_run(inst, init, cfg, pure_newton=False, collect_trace=False)
    if rep.termination != "converged":
        raise OracleError(f"interior-point reference run ended with {rep.termination}")
    obj = eval_objective(inst, pt.z)
    gap_target = 1e-10 * (1.0 + abs(obj))

    if l_d is None:
        l_d = dual_constants(inst.problem, 1.0).l_d
    lam = project_nonneg(pt.lam)
    best = -np.inf
    certified = False
    for _ in range(200):
        best = max(best, dual_value(inst, lam))
        if obj - best <= gap_target:
            certified = True
            break
        z_lam = inner_minimize(inst, lam)
        lam = project_nonneg(lam + eval_constraints(inst, z_lam) / l_d)
    if not certified:
        raise OracleError(
            f"projected-gradient cross-check left a gap of {obj - best:.3e}"
        )
    gval = eval_constraints(inst, pt.z)
    active = tuple(int(i) for i in np.flatnonzero(gval >= -1e-7 * (1.0 + np.abs(gval).max())))
    return OracleSolution(z=pt.z, lam=pt.lam, active=active, obj=obj)


def reference_oracle(inst: QpInstance, l_d: float | None = None) -> OracleSolution:
    """Exact reference solution (z*, lam*, active set) for a feasible instance.

    ``l_d`` optionally supplies the dual Lipschitz constant for the
    cross-check route so repeated calls on the same problem skip the
    power iteration.
    """
    if inst.problem.m <= ENUMERATION_LIMIT:
        return _enumerate_active_sets(inst)
    return _pdip_with_crosscheck(inst, l_d)
