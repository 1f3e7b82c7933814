"""Infeasible-start primal-dual interior-point method for the condensed QP.

The method follows the relaxed KKT system

    H z + h x + G'lam = 0          (dual residual)
    g(z) + s          = 0          (primal residual)
    S lam             = tau * 1    (centering),  s > 0, lam > 0

and drives tau -> 0 along a geometric schedule tau = kappa * mu with
mu = s'lam / m.  Search directions come from one Newton linearization,
solved by block elimination down to the SPD system

    (H + G' S^-1 Lam G) dz = -(r_dual + G' S^-1 (Lam r_pri - r_cent))

followed by back-substitution for dlam and ds.  Since the constraints are
linear, the constraint curvature term vanishes and the dual/primal
residual blocks are linear in the iterate: a single unit step zeroes them
to rounding.

Line search: the textbook Armijo test on the objective alone cannot
certify progress from an infeasible start (the cost at an infeasible
point may sit below the optimum), so the default merit is the residual
norm test ||r_tau(zeta + rho d)|| <= (1 - alpha rho) ||r_tau(zeta)||.
The plain objective test remains available via PdipConfig.merit =
"objective" for fidelity runs.  A fraction-to-boundary cap keeps (s, lam)
strictly positive under every accepted step.

In pure-Newton mode (entered from a hand-off point close to the central
path) no line search runs at all: steps are unit length, clipped only by
the boundary cap, and the centering factor shrinks with mu so the
residual contracts quadratically instead of settling on the linear
kappa-rate of the damped schedule.  If a unit step for the current
centering target would leave the positive orthant, the target is raised
and the direction re-solved against the same factorization before any
step is shortened: Newton linearizes the product hyperbola s*lam = tau,
so over-ambitious targets, not bad directions, are what push collapsing
pairs across zero.

Each run is single-threaded and owns its buffers; independent runs may
execute concurrently.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .qp_core import PrimalDualPoint, QpInstance, eval_constraints, eval_objective
from .report import PdipTraceRow, SolveReport

RHO_UNDERFLOW = 1e-12
# Pure-Newton centering gain: tau = min(kappa, PURE_CENTERING_GAIN * mu) * mu.
# The quadratic schedule must keep the centering target above the bilinear
# linearization error of collapsing (s, lam) pairs, otherwise exact unit
# steps graze the positivity boundary; a gain of ~30 leaves that margin
# while preserving the quadratic decay of mu.
PURE_CENTERING_GAIN = 30.0


class FactorizationError(RuntimeError):
    """Reduced Newton matrix lost positive definiteness (iterate too close
    to the boundary for the current tau)."""


class LineSearchError(RuntimeError):
    """Backtracking shrank the step below the underflow floor."""


@dataclass(frozen=True)
class PdipConfig:
    """Centering, line search and termination knobs.

    kappa in (0,1) scales the centering target; alpha in (0,0.5) and beta
    in (0,1) are the Armijo constants; fraction_to_boundary in (0,1) caps
    steps short of the positivity boundary.  merit selects the line-search
    test ("residual" default, "objective" for the plain cost test).
    """

    kappa: float = 0.1
    alpha: float = 1.0 / 3.0
    beta: float = 0.5
    epsilon: float = 1e-6
    max_iters: int = 200
    fraction_to_boundary: float = 0.99
    merit: str = "residual"

    def __post_init__(self):
        if not 0 < self.kappa < 1:
            raise ValueError(f"kappa must lie in (0,1), got {self.kappa}")
        if not 0 < self.alpha < 0.5:
            raise ValueError(f"alpha must lie in (0,0.5), got {self.alpha}")
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0,1), got {self.beta}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 < self.fraction_to_boundary < 1:
            raise ValueError(
                f"fraction_to_boundary must lie in (0,1), got {self.fraction_to_boundary}"
            )
        if self.merit not in ("residual", "objective"):
            raise ValueError(f"merit must be 'residual' or 'objective', got {self.merit!r}")


@dataclass(frozen=True)
class KktResidual:
    """Residual blocks of the relaxed KKT system at one iterate."""

    r_dual: np.ndarray
    r_pri: np.ndarray
    r_cent: np.ndarray
    tau: float
    mu: float

    def norm(self) -> float:
        return float(
            np.sqrt(
                np.dot(self.r_dual, self.r_dual)
                + np.dot(self.r_pri, self.r_pri)
                + np.dot(self.r_cent, self.r_cent)
            )
        )


def residual(inst: QpInstance, pt: PrimalDualPoint, tau: float) -> KktResidual:
    """Evaluate (r_dual, r_pri, r_cent) and the average gap mu = s'lam/m."""
    r_dual = inst.problem.H @ pt.z + inst.linear_cost + inst.problem.G.T @ pt.lam
    r_pri = eval_constraints(inst, pt.z) + pt.s
    r_cent = pt.s * pt.lam - tau
    mu = float(pt.s @ pt.lam) / inst.problem.m
    return KktResidual(r_dual=r_dual, r_pri=r_pri, r_cent=r_cent, tau=tau, mu=mu)


def _reduced_factor(inst: QpInstance, pt: PrimalDualPoint):
    """Cholesky factor of H + G' S^-1 Lam G (independent of tau)."""
    G = inst.problem.G
    M = inst.problem.H + (G.T * (pt.lam / pt.s)) @ G
    try:
        return cho_factor(M, lower=True)
    except (LinAlgError, np.linalg.LinAlgError) as exc:
        raise FactorizationError(
            "reduced Newton matrix not positive definite; iterate too close to boundary"
        ) from exc


def _direction_from_factor(factor, inst: QpInstance, pt: PrimalDualPoint, res: KktResidual):
    G = inst.problem.G
    rhs = -(res.r_dual + G.T @ ((pt.lam * res.r_pri - res.r_cent) / pt.s))
    dz = cho_solve(factor, rhs)
    dlam = (pt.lam * (res.r_pri + G @ dz) - res.r_cent) / pt.s
    ds = -res.r_pri - G @ dz
    return dz, dlam, ds


def newton_direction(inst: QpInstance, pt: PrimalDualPoint, res: KktResidual):
    """Solve the Newton system by block elimination; returns (dz, dlam, ds).

    Requires s, lam > 0 so the diagonal blocks are invertible.  The
    reduced matrix H + G' S^-1 Lam G is SPD; a Cholesky failure signals an
    iterate pressed against the boundary and surfaces as
    FactorizationError.
    """
    return _direction_from_factor(_reduced_factor(inst, pt), inst, pt, res)


def max_step_to_boundary(pt: PrimalDualPoint, dlam: np.ndarray, ds: np.ndarray) -> float:
    """Largest step keeping s + rho ds and lam + rho dlam positive (inf if any)."""
    cap = np.inf
    neg = ds < 0
    if neg.any():
        cap = min(cap, float(np.min(-pt.s[neg] / ds[neg])))
    neg = dlam < 0
    if neg.any():
        cap = min(cap, float(np.min(-pt.lam[neg] / dlam[neg])))
    return cap


def backtrack(
    inst: QpInstance,
    pt: PrimalDualPoint,
    direction,
    cfg: PdipConfig,
    res: KktResidual,
) -> float:
    """Backtracking line search from the boundary-capped maximal step.

    Returns the largest rho = rho_max * beta^i passing both the chosen
    merit test and strict positivity.  Raises LineSearchError if rho
    underflows below 1e-12.
    """
    dz, dlam, ds = direction
    rho = min(1.0, cfg.fraction_to_boundary * max_step_to_boundary(pt, dlam, ds))
    r0 = res.norm()
    if cfg.merit == "objective":
        f0 = eval_objective(inst, pt.z)
        slope = float((inst.problem.H @ pt.z + inst.linear_cost) @ dz)
    while rho >= RHO_UNDERFLOW:
        lam_new = pt.lam + rho * dlam
        s_new = pt.s + rho * ds
        if (lam_new > 0).all() and (s_new > 0).all():
            z_new = pt.z + rho * dz
            if cfg.merit == "residual":
                cand = PrimalDualPoint(z=z_new, lam=lam_new, s=s_new)
                if residual(inst, cand, res.tau).norm() <= (1 - cfg.alpha * rho) * r0:
                    return rho
            else:
                if eval_objective(inst, z_new) <= f0 + cfg.alpha * rho * slope:
                    return rho
        rho *= cfg.beta
    raise LineSearchError(f"step size underflowed below {RHO_UNDERFLOW}")


def pdip_run(
    inst: QpInstance,
    init: PrimalDualPoint,
    cfg: PdipConfig,
    pure_newton: bool = False,
    collect_trace: bool = True,
    callback: Optional[Callable] = None,
) -> tuple[PrimalDualPoint, SolveReport]:
    """Path-following loop: tau = sigma * mu, Newton step, update, repeat.

    Damped mode (pure_newton=False) uses sigma = kappa and the
    backtracking search.  Pure mode takes unit steps capped only by the
    positivity rule, shrinking sigma with mu and escalating it whenever
    the unit step would leave the cone; if the cap still squeezes rho
    below 0.5 on three consecutive iterations the run is flagged as a
    premature switch instead of silently degrading.

    Convergence means mu <= epsilon with both linear residual blocks at
    most epsilon as well.  Failures (cap, line search, factorization) are
    carried in the report together with the best iterate.
    """
    if not init.is_interior:
        raise ValueError("initial point must have s > 0 and lam > 0")
    pt = init
    trace: list[PdipTraceRow] = []
    status = "cap"
    capped_streak = 0
    premature = False
    steps = 0
    # linear residual blocks bottom out at rounding level for the problem's
    # scale; don't demand less than that when epsilon is extreme
    res_tol = max(
        cfg.epsilon,
        5e-13 * (1.0 + float(np.abs(inst.linear_cost).max(initial=0.0))),
    )
    for k in range(cfg.max_iters):
        mu = pt.mu()
        if pure_newton:
            # first step re-centers at the damped rate; afterwards the
            # target shrinks quadratically with mu, floored just below the
            # tolerance so the last step cannot dive orders of magnitude
            # past epsilon and blow up the slack weights
            sigma = cfg.kappa if k == 0 else min(cfg.kappa, PURE_CENTERING_GAIN * mu)
            tau = max(sigma * mu, min(0.05 * cfg.epsilon, mu))
        else:
            tau = cfg.kappa * mu
        res = residual(inst, pt, tau)
        if (
            mu <= cfg.epsilon
            and np.linalg.norm(res.r_pri) <= res_tol
            and np.linalg.norm(res.r_dual) <= res_tol
        ):
            status = "converged"
            break
        if callback is not None:
            callback(k, pt)
        if pure_newton:
            try:
                factor = _reduced_factor(inst, pt)
            except FactorizationError:
                status = "factorization_fail"
                break
            dz, dlam, ds = _direction_from_factor(factor, inst, pt, res)
            bound = max_step_to_boundary(pt, dlam, ds)
            # if the unit step would leave the cone, raise the centering
            # target and re-solve (the factor does not depend on tau)
            sigma = res.tau / mu if mu > 0 else 0.0
            while bound <= 1.0 and sigma < 0.97:
                sigma = min(0.97, 2.5 * sigma) if sigma > 0 else cfg.kappa
                res = residual(inst, pt, sigma * mu)
                dz, dlam, ds = _direction_from_factor(factor, inst, pt, res)
                bound = max_step_to_boundary(pt, dlam, ds)
            # unit step unless even heavy centering would leave the orthant
            rho = 1.0 if bound > 1.0 else cfg.fraction_to_boundary * bound
            capped_streak = capped_streak + 1 if rho < 0.5 else 0
            if capped_streak >= 3:
                premature = True
        else:
            try:
                direction = newton_direction(inst, pt, res)
            except FactorizationError:
                status = "factorization_fail"
                break
            dz, dlam, ds = direction
            try:
                rho = backtrack(inst, pt, direction, cfg, res)
            except LineSearchError:
                status = "linesearch_fail"
                break
        if collect_trace:
            trace.append(
                PdipTraceRow(
                    k=k,
                    phase="pure" if rho == 1.0 else "damped",
                    rho=rho,
                    mu=mu,
                    tau=res.tau,
                    r_dual_norm=float(np.linalg.norm(res.r_dual)),
                    r_pri_norm=float(np.linalg.norm(res.r_pri)),
                    r_cent_norm=float(np.linalg.norm(res.r_cent)),
                    obj=eval_objective(inst, pt.z),
                    wall_ns=time.perf_counter_ns(),
                )
            )
        pt = PrimalDualPoint(z=pt.z + rho * dz, lam=pt.lam + rho * dlam, s=pt.s + rho * ds)
        steps += 1
        if not pt.is_interior:
            # the boundary cap makes this unreachable; fail loudly if not
            raise AssertionError("iterate left the positive orthant")

    final_mu = pt.mu()
    if status == "cap" and premature:
        status = "switch_premature"
    report = SolveReport(
        phase1_iters=0,
        phase2_iters=steps,
        phase1_trace=[],
        phase2_trace=trace,
        termination=status,
        final_obj=eval_objective(inst, pt.z),
        final_gap=final_mu,
        suboptimality_bound=None,
        infeasibility=float(
            np.linalg.norm(np.maximum(eval_constraints(inst, pt.z), 0.0))
        ),
        premature_switch=premature,
    )
    return pt, report
