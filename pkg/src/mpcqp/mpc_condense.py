"""Build a dense condensed QP from a discrete LTI plant and an MPC setup.

The predicted states are eliminated through the plant recursion
x_{k+1} = A x_k + B u_k, leaving the stacked input sequence
z = (u_0, ..., u_{N-1}) as the only decision variable:

    x_stack = A_N x0 + B_N z        y_stack = C_N x0 + D_N z

A_N and B_N are block Toeplitz: block (i, j) of B_N is A^(i-j-1) B for
i > j and zero otherwise, so the first block row of B_N is zero.  The
cost 0.5 sum(x'Qx + u'Ru) with terminal weight Q then condenses to
H = B_N' Qbar B_N + Rbar and h = B_N' Qbar A_N, with the x0-only term
0.5 x0' (A_N' Qbar A_N) x0 tracked separately.

Box bounds on u, x, y (and optionally on input increments u_{k+1}-u_k)
are stacked into one-sided rows [v - ub; -v + lb] <= 0.  Rows whose
decision part is identically zero (stage-0 state/output bounds) would
make the dual degenerate; they are removed from G and kept aside as
checks on the current state.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag

from .qp_core import CondensedQp, QpInstance, QpValidationError, validate


def _opt_bound(v, size: int, name: str):
    """Coerce an optional bound vector; scalars broadcast, None means absent."""
    if v is None:
        return None
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.size == 1 and size > 1:
        arr = np.full(size, arr[0])
    if arr.shape != (size,):
        raise QpValidationError("dimension_mismatch", f"{name} must have length {size}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LtiModel:
    """Discrete plant x+ = Ax + Bu, y = Cx + Du (all dense, constant)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    n_x: int = field(init=False)
    n_u: int = field(init=False)
    n_y: int = field(init=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        B = np.array(self.B, dtype=float)
        C = np.array(self.C, dtype=float)
        D = np.array(self.D, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise QpValidationError("dimension_mismatch", f"A must be square, got {A.shape}")
        n_x = A.shape[0]
        if B.ndim != 2 or B.shape[0] != n_x:
            raise QpValidationError("dimension_mismatch", f"B must have {n_x} rows, got {B.shape}")
        n_u = B.shape[1]
        if C.ndim != 2 or C.shape[1] != n_x:
            raise QpValidationError("dimension_mismatch", f"C must have {n_x} cols, got {C.shape}")
        n_y = C.shape[0]
        if D.shape != (n_y, n_u):
            raise QpValidationError("dimension_mismatch", f"D must be {n_y}x{n_u}, got {D.shape}")
        for name, arr in (("A", A), ("B", B), ("C", C), ("D", D)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "n_x", n_x)
        object.__setattr__(self, "n_u", n_u)
        object.__setattr__(self, "n_y", n_y)

    def controllability_rank(self) -> int:
        """Rank of [B, AB, ..., A^(n_x-1)B]; diagnostic only, never enforced."""
        blocks = []
        P = self.B
        for _ in range(self.n_x):
            blocks.append(P)
            P = self.A @ P
        return int(np.linalg.matrix_rank(np.hstack(blocks)))


@dataclass(frozen=True)
class MpcConfig:
    """Horizon, weights and box bounds of the MPC program.

    Bounds are optional per signal; entries may be +-inf to leave single
    components unconstrained.  du_min/du_max bound the input increment
    u_{k+1} - u_k between consecutive stages.  Where a bound is finite the
    origin must be strictly inside (lower < 0 < upper).
    """

    N: int
    Q: np.ndarray
    R: np.ndarray
    u_min: np.ndarray | None = None
    u_max: np.ndarray | None = None
    x_min: np.ndarray | None = None
    x_max: np.ndarray | None = None
    y_min: np.ndarray | None = None
    y_max: np.ndarray | None = None
    du_min: np.ndarray | None = None
    du_max: np.ndarray | None = None

    def __post_init__(self):
        if self.N < 1:
            raise QpValidationError("bad_value", f"horizon must be >= 1, got {self.N}")
        Q = np.array(self.Q, dtype=float)
        R = np.array(self.R, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise QpValidationError("dimension_mismatch", f"Q must be square, got {Q.shape}")
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise QpValidationError("dimension_mismatch", f"R must be square, got {R.shape}")
        scale_q = max(np.abs(Q).max(), 1.0)
        if not np.allclose(Q, Q.T, atol=1e-12 * scale_q):
            raise QpValidationError("asymmetric", "Q must be symmetric")
        if np.linalg.eigvalsh(Q)[0] < -1e-10 * scale_q:
            raise QpValidationError("not_positive_definite", "Q must be positive semidefinite")
        scale_r = max(np.abs(R).max(), 1.0)
        if not np.allclose(R, R.T, atol=1e-12 * scale_r):
            raise QpValidationError("asymmetric", "R must be symmetric")
        try:
            np.linalg.cholesky(R)
        except np.linalg.LinAlgError as exc:
            raise QpValidationError("not_positive_definite", "R must be positive definite") from exc
        Q.setflags(write=False)
        R.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)

    def validate_bounds(self, model: LtiModel) -> None:
        sizes = {"u": model.n_u, "x": model.n_x, "y": model.n_y, "du": model.n_u}
        for sig in ("u", "x", "y", "du"):
            lo = _opt_bound(getattr(self, f"{sig}_min"), sizes[sig], f"{sig}_min")
            hi = _opt_bound(getattr(self, f"{sig}_max"), sizes[sig], f"{sig}_max")
            object.__setattr__(self, f"{sig}_min", lo)
            object.__setattr__(self, f"{sig}_max", hi)
            if lo is not None and np.any(lo[np.isfinite(lo)] >= 0):
                raise QpValidationError("bad_value", f"{sig}_min must be < 0 where finite")
            if hi is not None and np.any(hi[np.isfinite(hi)] <= 0):
                raise QpValidationError("bad_value", f"{sig}_max must be > 0 where finite")


@dataclass(frozen=True)
class PredictionMatrices:
    """Stacked prediction maps over stages 0..N (states/outputs) and 0..N-1 (inputs)."""

    A_N: np.ndarray
    B_N: np.ndarray
    C_N: np.ndarray
    D_N: np.ndarray
    N: int


def build_prediction(model: LtiModel, N: int) -> PredictionMatrices:
    """Assemble A_N, B_N, C_N, D_N so that stacking the plant recursion
    over the horizon reproduces A_N x0 + B_N z exactly."""
    if N < 1:
        raise QpValidationError("bad_value", f"horizon must be >= 1, got {N}")
    n_x, n_u, n_y = model.n_x, model.n_u, model.n_y
    powers = [np.eye(n_x)]
    for _ in range(N):
        powers.append(model.A @ powers[-1])

    A_N = np.vstack(powers)
    B_N = np.zeros(((N + 1) * n_x, N * n_u))
    for i in range(1, N + 1):
        for j in range(i):
            B_N[i * n_x : (i + 1) * n_x, j * n_u : (j + 1) * n_u] = powers[i - j - 1] @ model.B

    C_N = np.vstack([model.C @ P for P in powers])
    D_N = np.zeros(((N + 1) * n_y, N * n_u))
    for i in range(N + 1):
        D_N[i * n_y : (i + 1) * n_y, :] = model.C @ B_N[i * n_x : (i + 1) * n_x, :]
        if i < N:
            D_N[i * n_y : (i + 1) * n_y, i * n_u : (i + 1) * n_u] += model.D
    for arr in (A_N, B_N, C_N, D_N):
        arr.setflags(write=False)
    return PredictionMatrices(A_N=A_N, B_N=B_N, C_N=C_N, D_N=D_N, N=N)


@dataclass(frozen=True)
class ConstraintRow:
    """Bookkeeping for one scalar bound: which signal, stage, component and side."""

    signal: str  # "u" | "x" | "y" | "du"
    stage: int
    component: int
    side: str  # "upper" | "lower"


@dataclass(frozen=True)
class CondensedMpc:
    """Condensed QP plus the bookkeeping the bare problem cannot carry.

    ``rows`` labels every row of (G, E, g).  ``state_rows`` holds the
    bounds that involve only the current state (no z dependence); they are
    checked per time step instead of being passed to the dual solvers.
    ``cost_quad_x0`` is A_N' Qbar A_N, the x0-only cost term dropped from
    the QP objective.
    """

    qp: CondensedQp
    rows: tuple[ConstraintRow, ...]
    state_rows: tuple[ConstraintRow, ...]
    state_E: np.ndarray
    state_g: np.ndarray
    cost_quad_x0: np.ndarray
    prediction: PredictionMatrices

    def cost_offset(self, x0: np.ndarray) -> float:
        """Constant cost term 0.5 x0' (A_N' Qbar A_N) x0 for a given state."""
        x0 = np.asarray(x0, dtype=float)
        return 0.5 * float(x0 @ (self.cost_quad_x0 @ x0))

    def check_state(self, x0: np.ndarray, tol: float = 0.0) -> tuple[ConstraintRow, ...]:
        """Return the state-only bounds violated by x0 (empty when none are)."""
        if len(self.state_rows) == 0:
            return ()
        vals = self.state_E @ np.asarray(x0, dtype=float) + self.state_g
        return tuple(row for row, v in zip(self.state_rows, vals) if v > tol)

    def instance(self, x0: np.ndarray) -> QpInstance:
        return QpInstance(self.qp, x0)


def _signal_rows(sig: str, model: LtiModel, pred: PredictionMatrices):
    """Yield (stage, component, z_row, x_row) for every scalar of a signal."""
    N = pred.N
    if sig == "u":
        n_dec = N * model.n_u
        for k in range(N):
            for c in range(model.n_u):
                z_row = np.zeros(n_dec)
                z_row[k * model.n_u + c] = 1.0
                yield k, c, z_row, np.zeros(model.n_x)
    elif sig == "du":
        n_dec = N * model.n_u
        for k in range(N - 1):
            for c in range(model.n_u):
                z_row = np.zeros(n_dec)
                z_row[(k + 1) * model.n_u + c] = 1.0
                z_row[k * model.n_u + c] = -1.0
                yield k, c, z_row, np.zeros(model.n_x)
    elif sig == "x":
        for k in range(N + 1):
            for c in range(model.n_x):
                i = k * model.n_x + c
                yield k, c, pred.B_N[i].copy(), pred.A_N[i].copy()
    elif sig == "y":
        for k in range(N + 1):
            for c in range(model.n_y):
                i = k * model.n_y + c
                yield k, c, pred.D_N[i].copy(), pred.C_N[i].copy()
    else:  # pragma: no cover
        raise ValueError(sig)


def condense_full(model: LtiModel, cfg: MpcConfig) -> CondensedMpc:
    """Condense the MPC program into standard form, keeping row bookkeeping.

    Raises the underlying validation error if the assembled H fails the
    positive-definiteness check (R too small relative to numerical noise).
    """
    cfg.validate_bounds(model)
    pred = build_prediction(model, cfg.N)
    N = cfg.N

    Qbar = block_diag(*([cfg.Q] * (N + 1)))
    Rbar = block_diag(*([cfg.R] * N))
    BtQ = pred.B_N.T @ Qbar
    H = BtQ @ pred.B_N + Rbar
    H = 0.5 * (H + H.T)
    h = BtQ @ pred.A_N
    cost_quad_x0 = pred.A_N.T @ Qbar @ pred.A_N

    g_rows, e_rows, offs, labels = [], [], [], []
    sg_rows, se_rows, s_offs, s_labels = [], [], [], []
    for sig in ("u", "x", "y", "du"):
        lo = getattr(cfg, f"{sig}_min")
        hi = getattr(cfg, f"{sig}_max")
        if lo is None and hi is None:
            continue
        scalars = list(_signal_rows(sig, model, pred))
        for side, bound, sign in (("upper", hi, 1.0), ("lower", lo, -1.0)):
            if bound is None:
                continue
            for stage, comp, z_row, x_row in scalars:
                b = bound[comp]
                if not np.isfinite(b):
                    continue
                label = ConstraintRow(signal=sig, stage=stage, component=comp, side=side)
                # upper: v - ub <= 0; lower: -v + lb <= 0
                row_g = sign * z_row
                row_e = sign * x_row
                off = -b if side == "upper" else b
                if np.abs(row_g).max() == 0.0:
                    sg_rows.append(row_g)
                    se_rows.append(row_e)
                    s_offs.append(off)
                    s_labels.append(label)
                else:
                    g_rows.append(row_g)
                    e_rows.append(row_e)
                    offs.append(off)
                    labels.append(label)

    if not g_rows:
        raise QpValidationError("bad_value", "no decision-coupled constraints; nothing to solve")

    qp = CondensedQp(H=H, h=h, G=np.vstack(g_rows), E=np.vstack(e_rows), g=np.array(offs))
    validate(qp)
    state_E = np.vstack(se_rows) if se_rows else np.zeros((0, model.n_x))
    return CondensedMpc(
        qp=qp,
        rows=tuple(labels),
        state_rows=tuple(s_labels),
        state_E=state_E,
        state_g=np.array(s_offs),
        cost_quad_x0=cost_quad_x0,
        prediction=pred,
    )


def condense(model: LtiModel, cfg: MpcConfig) -> CondensedQp:
    """Condense the MPC program and return the bare standard-form QP."""
    return condense_full(model, cfg).qp
