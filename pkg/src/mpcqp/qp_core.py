"""Dense QP problem data and the small linear-algebra kernel every solver shares.

The standard form handled throughout the package is

    minimize    0.5 z'Hz + (h x)'z
    subject to  G z + E x + g <= 0

with H symmetric positive definite and x a fixed parameter vector (the
measured plant state in MPC use).  Everything is stored dense: problems of
this shape come out of condensing a linear MPC program, where the decision
dimension stays small and the matrices are dense by construction.

All types are immutable after construction and safe to share across
threads; the operations here are pure functions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import cho_solve

# Elementwise relative tolerance for the H = H' check.
SYMMETRY_TOL = 1e-12
# Power-iteration settings for the dual-Hessian norm ||G H^-1 G'||_2.
POWER_TOL = 1e-10
POWER_CAP = 10_000


class QpValidationError(ValueError):
    """Problem data breaks a structural invariant.

    ``kind`` distinguishes the failure: ``asymmetric``,
    ``not_positive_definite``, ``dimension_mismatch`` or ``bad_value``.
    """

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


class PowerIterationError(RuntimeError):
    """Spectral-norm power iteration did not converge (zero or degenerate G)."""


def _matrix(a, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.ndim != 2:
        raise QpValidationError(
            "dimension_mismatch", f"{name} must be 2-dimensional, got ndim={arr.ndim}"
        )
    arr.setflags(write=False)
    return arr


def _vector(a, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CondensedQp:
    """Standard-form problem data (H, h, G, E, g) with derived dimensions.

    ``n`` is the decision dimension, ``m`` the constraint count and ``n_x``
    the parameter (state) dimension.  Construction only coerces shapes;
    call :func:`validate` to check symmetry and positive definiteness.
    """

    H: np.ndarray
    h: np.ndarray
    G: np.ndarray
    E: np.ndarray
    g: np.ndarray
    n: int = field(init=False)
    m: int = field(init=False)
    n_x: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "H", _matrix(self.H, "H"))
        object.__setattr__(self, "h", _matrix(self.h, "h"))
        object.__setattr__(self, "G", _matrix(self.G, "G"))
        object.__setattr__(self, "E", _matrix(self.E, "E"))
        object.__setattr__(self, "g", _vector(self.g, "g"))
        object.__setattr__(self, "n", self.H.shape[0])
        object.__setattr__(self, "m", self.G.shape[0])
        object.__setattr__(self, "n_x", self.h.shape[1])

    @cached_property
    def chol(self) -> np.ndarray:
        """Lower Cholesky factor of H (raises if H is not SPD)."""
        try:
            return np.linalg.cholesky(self.H)
        except np.linalg.LinAlgError as exc:
            raise QpValidationError(
                "not_positive_definite", "H is not positive definite"
            ) from exc

    def solve_h(self, b: np.ndarray) -> np.ndarray:
        """Solve H y = b through the cached Cholesky factor."""
        return cho_solve((self.chol, True), b)

    @cached_property
    def hinv_gt(self) -> np.ndarray:
        """H^-1 G', solved once through the cached factor and reused by the
        Lagrangian inner solve (independent of the parameter x_t)."""
        return self.solve_h(self.G.T)

    @cached_property
    def dual_hessian(self) -> np.ndarray:
        """G H^-1 G', the negated Hessian of the dual function (m x m)."""
        return self.G @ self.hinv_gt


def validate(problem: CondensedQp) -> None:
    """Check all structural invariants; raise on the first violated one.

    Raised errors carry a ``kind`` so callers can tell asymmetry,
    indefiniteness and shape mismatches apart.
    """
    H, h, G, E, g = problem.H, problem.h, problem.G, problem.E, problem.g
    n, m, n_x = problem.n, problem.m, problem.n_x
    if H.shape != (n, n):
        raise QpValidationError("dimension_mismatch", f"H must be square, got {H.shape}")
    if n < 1 or m < 1:
        raise QpValidationError("dimension_mismatch", f"need n >= 1 and m >= 1, got n={n}, m={m}")
    if h.shape != (n, n_x):
        raise QpValidationError("dimension_mismatch", f"h must be {n}x{n_x}, got {h.shape}")
    if G.shape != (m, n):
        raise QpValidationError("dimension_mismatch", f"G must be {m}x{n}, got {G.shape}")
    if E.shape != (m, n_x):
        raise QpValidationError("dimension_mismatch", f"E must be {m}x{n_x}, got {E.shape}")
    if g.shape != (m,):
        raise QpValidationError("dimension_mismatch", f"g must have length {m}, got {g.shape}")
    scale = np.abs(H).max()
    if not np.allclose(H, H.T, rtol=SYMMETRY_TOL, atol=SYMMETRY_TOL * max(scale, 1.0)):
        raise QpValidationError("asymmetric", "H is not symmetric")
    problem.chol  # fails with kind="not_positive_definite" if H is indefinite


@dataclass(frozen=True)
class QpInstance:
    """A condensed QP bound to a concrete parameter vector x_t.

    Caches the per-state quantities every solver touches: the linear cost
    h x_t, the constraint shift E x_t + g, the unconstrained minimizer and
    the pre-solved map H^-1 G' used by the Lagrangian inner solve.
    """

    problem: CondensedQp
    x_t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x_t", _vector(self.x_t, "x_t"))
        if self.x_t.shape != (self.problem.n_x,):
            raise QpValidationError(
                "dimension_mismatch",
                f"x_t must have length {self.problem.n_x}, got {self.x_t.shape[0]}",
            )

    @cached_property
    def linear_cost(self) -> np.ndarray:
        return self.problem.h @ self.x_t

    @cached_property
    def constraint_shift(self) -> np.ndarray:
        return self.problem.E @ self.x_t + self.problem.g

    @cached_property
    def z_least_squares(self) -> np.ndarray:
        """Minimizer of the unconstrained cost, -H^-1 (h x_t)."""
        return -self.problem.solve_h(self.linear_cost)

    @cached_property
    def ls_constraints(self) -> np.ndarray:
        """Constraint values at the least-squares point (the dual gradient at 0)."""
        return self.problem.G @ self.z_least_squares + self.constraint_shift

    @cached_property
    def ls_objective(self) -> float:
        """Cost at the least-squares point (the dual value at 0)."""
        return 0.5 * float(self.z_least_squares @ (self.problem.H @ self.z_least_squares)) + float(
            self.linear_cost @ self.z_least_squares
        )

    @property
    def hinv_gt(self) -> np.ndarray:
        return self.problem.hinv_gt


@dataclass(frozen=True)
class DualConstants:
    """Curvature constants of the dual function for a fixed problem.

    l_d is the dual gradient Lipschitz constant ||G H^-1 G'||_2 (also the
    inverse step size of the fast gradient phase); m_d and M_d sandwich it
    from the spectrum of H; l_dh is the user-chosen Lipschitz constant of
    the dual Hessian and eta_d = m_d^2 / l_dh is the largest switch
    threshold for which unit Newton steps are certified.
    """

    l_d: float
    m_d: float
    M_d: float
    l_dh: float
    eta_d: float

    def __post_init__(self):
        rel = 1e-8
        if not (self.m_d > 0 and self.M_d > 0 and self.l_d > 0):
            raise QpValidationError("bad_value", "dual constants must be positive")
        if self.m_d > self.M_d * (1 + rel):
            raise QpValidationError("bad_value", f"m_d={self.m_d} exceeds M_d={self.M_d}")
        if self.l_d > self.M_d * (1 + rel):
            raise QpValidationError("bad_value", f"l_d={self.l_d} exceeds M_d={self.M_d}")
        if self.l_dh <= 0:
            raise QpValidationError("bad_value", "l_dh must be positive")
        if not (0 < self.eta_d <= self.m_d**2 / self.l_dh * (1 + rel)):
            raise QpValidationError(
                "bad_value", f"eta_d={self.eta_d} outside (0, m_d^2/l_dh]"
            )


@dataclass(frozen=True)
class PrimalDualPoint:
    """Iterate (z, lambda, s); lambda and s must stay elementwise positive
    whenever the point is used as an interior-point iterate."""

    z: np.ndarray
    lam: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "z", _vector(self.z, "z"))
        object.__setattr__(self, "lam", _vector(self.lam, "lam"))
        object.__setattr__(self, "s", _vector(self.s, "s"))

    @property
    def is_interior(self) -> bool:
        return bool((self.lam > 0).all() and (self.s > 0).all())

    def mu(self) -> float:
        """Average duality gap s'lam / m."""
        return float(self.s @ self.lam) / self.s.shape[0]


def project_nonneg(v: np.ndarray) -> np.ndarray:
    """Projection onto the nonnegative orthant, max(v, 0) elementwise."""
    return np.maximum(v, 0.0)


def eval_constraints(inst: QpInstance, z: np.ndarray) -> np.ndarray:
    """Constraint values G z + E x_t + g (feasible iff all <= 0)."""
    return inst.problem.G @ z + inst.constraint_shift


def eval_objective(inst: QpInstance, z: np.ndarray) -> float:
    """Quadratic cost 0.5 z'Hz + (h x_t)'z."""
    return 0.5 * float(z @ (inst.problem.H @ z)) + float(inst.linear_cost @ z)


def _spectral_norm_sym(apply, dim: int, tol: float = POWER_TOL, cap: int = POWER_CAP) -> float:
    """Largest eigenvalue of a symmetric PSD operator given as a matvec.

    Convergence is certified through the eigenvalue residual bound
    |lambda_max - est| <= ||A v - est v||, so the returned estimate is
    within tol * est of the true norm.  The probe vector is drawn from a
    fixed-seed generator so independent runs agree bit for bit.
    """
    rng = np.random.default_rng(0x5EED)
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    for _ in range(cap):
        w = apply(v)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            raise PowerIterationError("operator annihilated the probe vector (G == 0?)")
        est = float(v @ w)
        if np.linalg.norm(w - est * v) <= tol * max(est, 1e-300):
            return est
        v = w / norm_w
    raise PowerIterationError(f"no convergence within {cap} iterations")


def dual_constants(problem: CondensedQp, l_dh: float) -> DualConstants:
    """Compute the dual curvature constants for a validated problem.

    l_d = ||G H^-1 G'||_2 comes from power iteration with the product
    applied implicitly (two triangular solves per matvec), so the m x m
    matrix is never formed.  m_d and M_d use the eigenvalue range of H,
    which is cheap at condensed-MPC sizes.
    """
    if l_dh <= 0:
        raise QpValidationError("bad_value", f"l_dh must be positive, got {l_dh}")
    eigs = np.linalg.eigvalsh(problem.H)
    sigma_min, sigma_max = float(eigs[0]), float(eigs[-1])
    if sigma_min <= 0:
        raise QpValidationError("not_positive_definite", "H is not positive definite")
    gnorm_sq = float(np.linalg.norm(problem.G, 2)) ** 2
    chol = problem.chol
    G = problem.G

    def apply(v):
        return G @ cho_solve((chol, True), G.T @ v)

    l_d = _spectral_norm_sym(apply, problem.m)
    m_d = gnorm_sq / sigma_max
    return DualConstants(
        l_d=l_d,
        m_d=m_d,
        M_d=gnorm_sq / sigma_min,
        l_dh=l_dh,
        eta_d=m_d**2 / l_dh,
    )
