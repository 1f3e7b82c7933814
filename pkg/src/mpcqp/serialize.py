"""JSON interchange for problems and plant models.

Problem files are self-describing documents with the standard-form data
(matrices as row-major nested arrays, vectors flat) plus the dimensions:

    {"n": .., "m": .., "n_x": .., "H": [[..]], "h": [[..]],
     "G": [[..]], "E": [[..]], "g": [..], "x_t": [..]}

``x_t`` is optional; it is written whenever a state was bound (the
``condense`` CLI always writes one) and defaults to zeros on load so a
problem file alone is solvable.  Model files carry A, B, C, D, N, Q, R
and optional u/x/y/du bound arrays.
"""
from __future__ import annotations

import json

import numpy as np

from .mpc_condense import LtiModel, MpcConfig
from .qp_core import CondensedQp, QpInstance, validate

_BOUND_KEYS = ("u_min", "u_max", "x_min", "x_max", "y_min", "y_max", "du_min", "du_max")


def qp_to_dict(qp: CondensedQp, x_t=None) -> dict:
    doc = {
        "n": qp.n,
        "m": qp.m,
        "n_x": qp.n_x,
        "H": qp.H.tolist(),
        "h": qp.h.tolist(),
        "G": qp.G.tolist(),
        "E": qp.E.tolist(),
        "g": qp.g.tolist(),
    }
    if x_t is not None:
        doc["x_t"] = np.asarray(x_t, dtype=float).reshape(-1).tolist()
    return doc


def qp_from_dict(doc: dict) -> QpInstance:
    qp = CondensedQp(H=doc["H"], h=doc["h"], G=doc["G"], E=doc["E"], g=doc["g"])
    validate(qp)
    for key in ("n", "m", "n_x"):
        if key in doc and int(doc[key]) != getattr(qp, key):
            raise ValueError(f"declared {key}={doc[key]} does not match data ({getattr(qp, key)})")
    x_t = np.asarray(doc.get("x_t", np.zeros(qp.n_x)), dtype=float)
    return QpInstance(qp, x_t)


def save_qp(path, qp: CondensedQp, x_t=None) -> None:
    with open(path, "w") as fh:
        json.dump(qp_to_dict(qp, x_t), fh)


def load_qp(path) -> QpInstance:
    with open(path) as fh:
        return qp_from_dict(json.load(fh))


def model_from_dict(doc: dict) -> tuple[LtiModel, MpcConfig]:
    model = LtiModel(A=doc["A"], B=doc["B"], C=doc["C"], D=doc["D"])
    bounds = {k: doc[k] for k in _BOUND_KEYS if doc.get(k) is not None}
    cfg = MpcConfig(N=int(doc["N"]), Q=doc["Q"], R=doc["R"], **bounds)
    return model, cfg


def model_to_dict(model: LtiModel, cfg: MpcConfig) -> dict:
    doc = {
        "A": model.A.tolist(),
        "B": model.B.tolist(),
        "C": model.C.tolist(),
        "D": model.D.tolist(),
        "N": cfg.N,
        "Q": cfg.Q.tolist(),
        "R": cfg.R.tolist(),
    }
    for k in _BOUND_KEYS:
        v = getattr(cfg, k)
        if v is not None:
            doc[k] = np.asarray(v).tolist()
    return doc


def load_model(path) -> tuple[LtiModel, MpcConfig]:
    with open(path) as fh:
        return model_from_dict(json.load(fh))


def save_model(path, model: LtiModel, cfg: MpcConfig) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model, cfg), fh)


def load_state(path) -> np.ndarray:
    """Read an initial state: either a bare JSON array or {"x_t": [..]}."""
    with open(path) as fh:
        doc = json.load(fh)
    if isinstance(doc, dict):
        doc = doc["x_t"]
    return np.asarray(doc, dtype=float).reshape(-1)
