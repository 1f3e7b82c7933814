"""Shared instance generators for the test suite.

Everything is seeded: a test that consumes a generator owns its rng and
the produced instances replay exactly.
"""
import numpy as np
import pytest

from mpcqp import CondensedQp, QpInstance


def random_spd(rng, n, shift=0.5):
    a = rng.standard_normal((n, n))
    return a @ a.T + (shift + rng.uniform()) * np.eye(n)


def random_instance(rng, n, m, n_x=2, margin_lo=0.2, margin_hi=1.0):
    """Random strictly feasible QP (Slater point built in)."""
    H = random_spd(rng, n)
    G = rng.standard_normal((m, n))
    h = 0.3 * rng.standard_normal((n, n_x))
    E = 0.2 * rng.standard_normal((m, n_x))
    x_t = rng.standard_normal(n_x)
    z_c = 0.5 * rng.standard_normal(n)
    g = -(G @ z_c + E @ x_t) - rng.uniform(margin_lo, margin_hi, m)
    return QpInstance(CondensedQp(H=H, h=h, G=G, E=E, g=g), x_t)


def nondegenerate_instance(rng, n, m, n_active=None, lam_lo=1.0, lam_hi=3.0):
    """QP with a designed optimum: the active set is chosen up front, its
    multipliers are bounded away from zero and the inactive constraints
    keep a strict margin, so strict complementarity and LICQ hold.

    Returns (instance, z_star, lam_star).
    """
    if n_active is None:
        n_active = int(rng.integers(1, max(min(n - 1, 5), 2)))
    H = random_spd(rng, n, shift=1.0)
    z_star = rng.standard_normal(n)
    G_a = rng.standard_normal((n_active, n))
    lam_a = rng.uniform(lam_lo, lam_hi, n_active)
    q = -(H @ z_star) - G_a.T @ lam_a
    g_a = -(G_a @ z_star)
    G_i = rng.standard_normal((m - n_active, n))
    g_i = -(G_i @ z_star) - rng.uniform(0.5, 2.0, m - n_active)
    qp = CondensedQp(
        H=H,
        h=q[:, None],
        G=np.vstack([G_a, G_i]),
        E=np.zeros((m, 1)),
        g=np.concatenate([g_a, g_i]),
    )
    lam_star = np.concatenate([lam_a, np.zeros(m - n_active)])
    return QpInstance(qp, [1.0]), z_star, lam_star


def all_active_instance(rng, n):
    """QP whose optimum activates every constraint, with near-isotropic
    dual geometry (G G' close to a multiple of the identity) so the early
    dual iterates undershoot lam* in every component and the least-squares
    point violates every row."""
    G = np.eye(n) + 0.1 * rng.standard_normal((n, n))
    lam_star = rng.uniform(0.5, 2.0, n)
    z_star = rng.standard_normal(n)
    q = -z_star - G.T @ lam_star
    g = -(G @ z_star)
    qp = CondensedQp(H=np.eye(n), h=q[:, None], G=G, E=np.zeros((n, 1)), g=g)
    return QpInstance(qp, [1.0]), z_star, lam_star


def one_d_instance():
    """min 0.5 z^2 subject to z >= 1; z* = 1, lam* = 1, l_d = 1."""
    qp = CondensedQp(H=[[1.0]], h=[[0.0]], G=[[-1.0]], E=[[0.0]], g=[1.0])
    return QpInstance(qp, [0.0])


@pytest.fixture(scope="session")
def planar_prepared():
    from mpcqp.bench import planar_benchmark, prepare

    return prepare(planar_benchmark())


@pytest.fixture(scope="session")
def cessna_prepared():
    from mpcqp.bench import cessna_benchmark, prepare

    return prepare(cessna_benchmark())
