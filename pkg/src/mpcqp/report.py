"""Solve reports and per-iteration trace rows, plus their CSV/JSON forms.

Trace formats are part of the package's external interface:

    fast-gradient rows:   k, d_lambda_hat, primal_obj, pos_violation_norm, wall_ns
    interior-point rows:  k, phase, rho, mu, tau, r_dual_norm, r_pri_norm,
                          r_cent_norm, obj, wall_ns

wall_ns is a raw perf_counter timestamp; everything else replays
bit-identically for a given platform, which the CSV writers preserve by
formatting floats at full precision.
"""
from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass, field
from typing import Optional

TERMINATIONS = (
    "converged",
    "cap",
    "switch_premature",
    "linesearch_fail",
    "factorization_fail",
)

DFG_TRACE_HEADER = ("k", "d_lambda_hat", "primal_obj", "pos_violation_norm", "wall_ns")
PDIP_TRACE_HEADER = (
    "k",
    "phase",
    "rho",
    "mu",
    "tau",
    "r_dual_norm",
    "r_pri_norm",
    "r_cent_norm",
    "obj",
    "wall_ns",
)


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


@dataclass(frozen=True)
class DfgTraceRow:
    k: int
    d_lambda_hat: float
    primal_obj: float
    pos_violation_norm: float
    wall_ns: int

    def as_csv(self):
        return [_fmt(getattr(self, f)) for f in DFG_TRACE_HEADER]


@dataclass(frozen=True)
class PdipTraceRow:
    k: int
    phase: str  # "damped" | "pure"
    rho: float
    mu: float
    tau: float
    r_dual_norm: float
    r_pri_norm: float
    r_cent_norm: float
    obj: float
    wall_ns: int

    def as_csv(self):
        return [_fmt(getattr(self, f)) for f in PDIP_TRACE_HEADER]


@dataclass
class SolveReport:
    """Outcome of one solve: phase iteration counts, traces and final stats.

    phase1 is the fast-gradient phase, phase2 the Newton phase; standalone
    runs leave the unused phase empty.  suboptimality_bound is the dual
    gap estimate ||[g(z)]_+||^2 / (2 m_d) at the final iterate and is only
    available when the dual constants were supplied.
    """

    phase1_iters: int
    phase2_iters: int
    phase1_trace: list[DfgTraceRow] = field(default_factory=list)
    phase2_trace: list[PdipTraceRow] = field(default_factory=list)
    termination: str = "converged"
    final_obj: float = 0.0
    final_gap: float = 0.0
    suboptimality_bound: Optional[float] = None
    infeasibility: float = 0.0
    premature_switch: bool = False

    def __post_init__(self):
        if self.termination not in TERMINATIONS:
            raise ValueError(f"unknown termination {self.termination!r}")

    @property
    def converged(self) -> bool:
        return self.termination == "converged"

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["phase1_trace"] = [dataclasses.asdict(r) for r in self.phase1_trace]
        d["phase2_trace"] = [dataclasses.asdict(r) for r in self.phase2_trace]
        return d

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def write_dfg_trace(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DFG_TRACE_HEADER)
        for r in rows:
            w.writerow(r.as_csv())


def write_pdip_trace(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PDIP_TRACE_HEADER)
        for r in rows:
            w.writerow(r.as_csv())
