"""Fast gradient method on the dual of the condensed QP.

Operating on the dual keeps the per-iteration projection trivial (clip to
the nonnegative orthant) because the coupling constraints G z + E x + g <= 0
are dualized.  Each iteration solves the inner Lagrangian minimization in
closed form (H is SPD, so z(lam) = -H^-1 (h x + G'lam)), takes a projected
ascent step with the optimal step size 1/l_d, and applies a momentum
update that mixes the ascent point with the projected running sum of
weighted gradients:

    z_k       = argmin_z L(z, lam_k)
    lhat_k    = [lam_k + grad_k / l_d]_+
    lam_{k+1} = (k+1)/(k+3) * lhat_k
                + 2/(l_d (k+3)) * [sum_{j<=k} (j+1)/2 * grad_j]_+

where grad_k = g(z_k) is the dual gradient.  The projection wraps the
whole accumulated sum, not the individual summands.  The ascent point
lhat is the iterate carrying the certified dual value, so runs return it
rather than lam.  There is no randomization anywhere: traces replay
bit-identically for a given platform.

A run is single-threaded and owns its state; distinct runs on distinct
instances may execute in parallel, and state objects can move between
threads between steps.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np

from .qp_core import (
    DualConstants,
    QpInstance,
    eval_constraints,
    eval_objective,
    project_nonneg,
)
from .report import DfgTraceRow


@dataclass(frozen=True)
class DfgState:
    """One dual iterate: lam and its ascent projection lhat stay in the
    nonnegative orthant exactly; grad_accum carries sum (j+1)/2 * grad_j."""

    lam: np.ndarray
    lam_hat: np.ndarray
    grad_accum: np.ndarray
    k: int
    z: Optional[np.ndarray] = None


@dataclass
class DfgResult:
    """Final primal/dual pair, status ("converged" or "cap") and trace."""

    z: np.ndarray
    lam: np.ndarray
    iterations: int
    status: str
    trace: list[DfgTraceRow]
    violation: float


def initial_state(lambda0: np.ndarray) -> DfgState:
    lambda0 = np.asarray(lambda0, dtype=float)
    if (lambda0 < 0).any():
        raise ValueError("initial multiplier must be nonnegative")
    return DfgState(
        lam=lambda0.copy(),
        lam_hat=lambda0.copy(),
        grad_accum=np.zeros_like(lambda0),
        k=0,
    )


def inner_minimize(inst: QpInstance, lam: np.ndarray) -> np.ndarray:
    """Unique Lagrangian minimizer z(lam) = -H^-1 (h x_t + G'lam)."""
    return inst.z_least_squares - inst.hinv_gt @ lam


def dual_gradient(inst: QpInstance, z: np.ndarray) -> np.ndarray:
    """Gradient of the dual function at the multiplier that produced z."""
    return eval_constraints(inst, z)


def dual_value(inst: QpInstance, lam: np.ndarray) -> float:
    """Exact dual value d(lam) = min_z L(z, lam), via the closed-form minimizer."""
    z = inner_minimize(inst, lam)
    return eval_objective(inst, z) + float(lam @ eval_constraints(inst, z))


def dfg_step(state: DfgState, inst: QpInstance, consts: DualConstants) -> DfgState:
    """Advance one full iteration; the returned state holds z_k (the inner
    minimizer for the *incoming* lam) alongside lam_{k+1}."""
    z = inner_minimize(inst, state.lam)
    grad = eval_constraints(inst, z)
    lam_hat = project_nonneg(state.lam + grad / consts.l_d)
    accum = state.grad_accum + (0.5 * (state.k + 1)) * grad
    frac = (state.k + 1) / (state.k + 3)
    lam_next = frac * lam_hat + (2.0 / (consts.l_d * (state.k + 3))) * project_nonneg(accum)
    return DfgState(lam=lam_next, lam_hat=lam_hat, grad_accum=accum, k=state.k + 1, z=z)


@dataclass(frozen=True)
class ViolationStop:
    """Stop once the positive constraint violation drops to eta_d (inclusive)."""

    eta_d: float


@dataclass(frozen=True)
class GapStop:
    """Standalone stopping rule: primal-dual gap <= eps and violation <= eps.

    The gap f0(z_k) - d(lhat_k) is the observable surrogate for the cost
    error, which would need the unknown optimum.
    """

    eps: float


def until_violation(eta_d: float) -> ViolationStop:
    return ViolationStop(eta_d=eta_d)


def until_gap(eps: float) -> GapStop:
    return GapStop(eps=eps)


@numba.njit(cache=True)
def _dual_quad(W, c0, d0, lam):
    # d(lam) = d(0) + g(z_ls)'lam - 0.5 lam'W lam for the quadratic dual
    return d0 + np.dot(c0, lam) - 0.5 * np.dot(lam, W @ lam)


@numba.njit(cache=True)
def _dfg_kernel(W, c0, d0, inv_l, gap_mode, thresh, max_iters, record):
    """Momentum recursion in multiplier space; returns the final pair and
    per-iteration (dual value, primal objective, violation) rows."""
    m = c0.shape[0]
    lam = np.zeros(m)
    lam_prev = np.zeros(m)
    lam_hat = np.zeros(m)
    accum = np.zeros(m)
    rows = np.zeros((max_iters if record else 0, 3))
    status = 0
    violation = np.inf
    k = 0
    for k0 in range(max_iters):
        grad = c0 - W @ lam
        for i in range(m):
            lam_prev[i] = lam[i]
            x = lam[i] + inv_l * grad[i]
            lam_hat[i] = x if x > 0.0 else 0.0
        w = 0.5 * (k0 + 1)
        frac = (k0 + 1) / (k0 + 3)
        comb = 2.0 * inv_l / (k0 + 3)
        v2 = 0.0
        for i in range(m):
            accum[i] += w * grad[i]
            a = accum[i]
            lam[i] = frac * lam_hat[i] + comb * (a if a > 0.0 else 0.0)
            gp = grad[i]
            if gp > 0.0:
                v2 += gp * gp
        violation = np.sqrt(v2)
        k = k0 + 1
        if record:
            rows[k0, 0] = _dual_quad(W, c0, d0, lam_hat)
            rows[k0, 1] = _dual_quad(W, c0, d0, lam_prev) - np.dot(lam_prev, grad)
            rows[k0, 2] = violation
        if gap_mode:
            if violation <= thresh:
                obj = _dual_quad(W, c0, d0, lam_prev) - np.dot(lam_prev, grad)
                if obj - _dual_quad(W, c0, d0, lam_hat) <= thresh:
                    status = 1
                    break
        elif violation <= thresh:
            status = 1
            break
    return k, status, lam_prev, lam_hat, violation, rows


def dfg_run(
    inst: QpInstance,
    consts: DualConstants,
    lambda0: np.ndarray,
    stop,
    max_iters: int = 50_000,
    collect_trace: bool = True,
) -> DfgResult:
    """Iterate until the stopping rule fires or the cap is hit.

    The rule is evaluated on the current inner minimizer z_k after each
    full iteration, so the returned z is the one paired with the lam that
    satisfied the test.  On cap the best (last) iterate is returned with
    status "cap".

    The loop runs entirely in multiplier space through a compiled kernel:
    since the dual is the quadratic d(lam) = d(0) + g(z_ls)'lam
    - 0.5 lam'W lam with W = GH^-1G', the gradient recursion
    grad = g(z_ls) - W lam needs one m x m matvec per iteration and the
    primal iterate is only materialized for the final result.  Supplying
    a custom callable as the stopping rule falls back to a plain loop
    over :func:`dfg_step`.
    """
    lam0 = np.ascontiguousarray(lambda0, dtype=float)
    if (lam0 < 0).any():
        raise ValueError("initial multiplier must be nonnegative")
    if lam0.any():
        # the kernel starts from zero; nonzero warm starts take the plain path
        return _dfg_run_plain(inst, consts, lam0, stop, max_iters, collect_trace)
    if isinstance(stop, ViolationStop):
        gap_mode, thresh = False, stop.eta_d
    elif isinstance(stop, GapStop):
        gap_mode, thresh = True, stop.eps
    else:
        return _dfg_run_plain(inst, consts, lam0, stop, max_iters, collect_trace)

    k, status, lam_prev, lam_hat, violation, rows = _dfg_kernel(
        inst.problem.dual_hessian,
        inst.ls_constraints,
        inst.ls_objective,
        1.0 / consts.l_d,
        gap_mode,
        thresh,
        max_iters,
        collect_trace,
    )
    trace = [
        DfgTraceRow(
            k=k0,
            d_lambda_hat=rows[k0, 0],
            primal_obj=rows[k0, 1],
            pos_violation_norm=rows[k0, 2],
            wall_ns=time.perf_counter_ns(),
        )
        for k0 in range(k if collect_trace else 0)
    ]
    return DfgResult(
        z=inner_minimize(inst, lam_prev),
        lam=lam_hat.copy(),
        iterations=k,
        status="converged" if status == 1 else "cap",
        trace=trace,
        violation=float(violation),
    )


def _dfg_run_plain(inst, consts, lambda0, stop, max_iters, collect_trace) -> DfgResult:
    """Step-by-step loop used for warm starts and custom stopping rules."""
    state = initial_state(lambda0)
    trace: list[DfgTraceRow] = []
    status = "cap"
    violation = np.inf
    for _ in range(max_iters):
        state = dfg_step(state, inst, consts)
        violation = float(np.linalg.norm(project_nonneg(eval_constraints(inst, state.z))))
        if collect_trace:
            trace.append(
                DfgTraceRow(
                    k=state.k - 1,
                    d_lambda_hat=dual_value(inst, state.lam_hat),
                    primal_obj=eval_objective(inst, state.z),
                    pos_violation_norm=violation,
                    wall_ns=time.perf_counter_ns(),
                )
            )
        if isinstance(stop, ViolationStop):
            done = violation <= stop.eta_d
        elif isinstance(stop, GapStop):
            done = violation <= stop.eps and (
                eval_objective(inst, state.z) - dual_value(inst, state.lam_hat) <= stop.eps
            )
        else:
            done = stop(inst, state, violation)
        if done:
            status = "converged"
            break
    return DfgResult(
        z=state.z,
        lam=state.lam_hat,
        iterations=state.k,
        status=status,
        trace=trace,
        violation=violation,
    )
