"""Problem data types, validation and the shared linear-algebra kernels."""
import numpy as np
import pytest

from mpcqp import (
    CondensedQp,
    PowerIterationError,
    QpInstance,
    QpValidationError,
    dual_constants,
    eval_constraints,
    eval_objective,
    project_nonneg,
    validate,
)
from conftest import random_instance, random_spd


def _toy_qp(H=None, G=None, g=None):
    H = np.eye(2) if H is None else np.asarray(H, dtype=float)
    G = np.vstack([np.eye(2), -np.eye(2)]) if G is None else np.asarray(G, dtype=float)
    g = -np.ones(4) if g is None else np.asarray(g, dtype=float)
    return CondensedQp(H=H, h=np.zeros((2, 1)), G=G, E=np.zeros((G.shape[0], 1)), g=g)


def test_validate_identity_case():
    validate(_toy_qp())  # no exception


def test_validate_rejects_asymmetric_h():
    with pytest.raises(QpValidationError) as exc:
        validate(_toy_qp(H=[[1.0, 2.0], [0.0, 1.0]]))
    assert exc.value.kind == "asymmetric"


def test_validate_rejects_indefinite_h():
    with pytest.raises(QpValidationError) as exc:
        validate(_toy_qp(H=[[1.0, 0.0], [0.0, -1.0]]))
    assert exc.value.kind == "not_positive_definite"


def test_validate_rejects_dimension_mismatch():
    qp = _toy_qp()
    bad = CondensedQp(H=qp.H, h=np.zeros((2, 1)), G=qp.G, E=np.zeros((3, 1)), g=qp.g)
    with pytest.raises(QpValidationError) as exc:
        validate(bad)
    assert exc.value.kind == "dimension_mismatch"


def test_dual_constants_identity():
    qp = CondensedQp(H=np.eye(2), h=np.zeros((2, 1)), G=np.eye(2), E=np.zeros((2, 1)), g=-np.ones(2))
    c = dual_constants(qp, 1.0)
    assert np.isclose(c.l_d, 1.0, rtol=1e-9)
    assert np.isclose(c.m_d, 1.0)
    assert np.isclose(c.M_d, 1.0)
    assert np.isclose(c.eta_d, 1.0)


def test_dual_constants_scalar_scaling():
    qp = CondensedQp(H=2 * np.eye(2), h=np.zeros((2, 1)), G=np.eye(2), E=np.zeros((2, 1)), g=-np.ones(2))
    c = dual_constants(qp, 1.0)
    assert np.isclose(c.l_d, 0.5, rtol=1e-9)
    assert np.isclose(c.m_d, 0.5)
    assert np.isclose(c.M_d, 0.5)
    assert np.isclose(c.eta_d, 0.25)


def test_dual_constants_against_eigendecomposition():
    rng = np.random.default_rng(11)
    H = random_spd(rng, 3)
    G = rng.standard_normal((5, 3))
    qp = CondensedQp(H=H, h=np.zeros((3, 1)), G=G, E=np.zeros((5, 1)), g=-np.ones(5))
    c = dual_constants(qp, 10.0)
    dual_hess = G @ np.linalg.solve(H, G.T)
    l_ref = np.linalg.eigvalsh(0.5 * (dual_hess + dual_hess.T))[-1]
    eigs = np.linalg.eigvalsh(H)
    gnorm2 = np.linalg.norm(G, 2) ** 2
    assert abs(c.l_d - l_ref) <= 1e-8 * l_ref
    assert abs(c.m_d - gnorm2 / eigs[-1]) <= 1e-10 * c.m_d
    assert abs(c.M_d - gnorm2 / eigs[0]) <= 1e-10 * c.M_d
    assert np.isclose(c.eta_d, c.m_d**2 / 10.0)


def test_dual_constants_sandwich_on_random_instances():
    rng = np.random.default_rng(5)
    for _ in range(25):
        inst = random_instance(rng, int(rng.integers(2, 7)), int(rng.integers(1, 10)))
        c = dual_constants(inst.problem, 1.0)
        assert c.m_d <= c.l_d * (1 + 1e-8)
        assert c.l_d <= c.M_d * (1 + 1e-8)


def test_dual_constants_zero_g_fails():
    qp = CondensedQp(H=np.eye(2), h=np.zeros((2, 1)), G=np.zeros((2, 2)), E=np.zeros((2, 1)), g=-np.ones(2))
    with pytest.raises(PowerIterationError):
        dual_constants(qp, 1.0)


def test_dual_constants_rejects_nonpositive_ldh():
    with pytest.raises(QpValidationError):
        dual_constants(_toy_qp(), 0.0)


def test_eval_constraints_origin_strictly_feasible():
    qp = CondensedQp(H=np.eye(2), h=np.zeros((2, 1)), G=np.eye(2), E=np.zeros((2, 1)), g=-np.ones(2))
    inst = QpInstance(qp, [0.0])
    np.testing.assert_allclose(eval_constraints(inst, np.zeros(2)), [-1.0, -1.0])


def test_eval_constraints_linear_superposition():
    qp = CondensedQp(H=np.eye(2), h=np.zeros((2, 2)), G=np.eye(2), E=np.eye(2), g=np.zeros(2))
    inst = QpInstance(qp, [0.0, 1.0])
    np.testing.assert_allclose(eval_constraints(inst, np.array([1.0, 0.0])), [1.0, 1.0])


def test_eval_constraints_at_oracle_solution():
    from mpcqp import reference_oracle

    rng = np.random.default_rng(17)
    inst = random_instance(rng, 3, 6)
    ref = reference_oracle(inst)
    viol = np.maximum(eval_constraints(inst, ref.z), 0.0)
    assert np.linalg.norm(viol) <= 1e-9


def test_eval_objective_direct():
    qp = CondensedQp(H=np.eye(2), h=np.zeros((2, 1)), G=np.eye(2), E=np.zeros((2, 1)), g=-np.ones(2))
    inst = QpInstance(qp, [0.0])
    assert eval_objective(inst, np.array([3.0, 4.0])) == pytest.approx(12.5)
    assert eval_objective(inst, np.zeros(2)) == 0.0


def test_eval_objective_scalar_expansion_oracle():
    rng = np.random.default_rng(23)
    for _ in range(10):
        inst = random_instance(rng, 4, 5)
        z = rng.standard_normal(4)
        # expanded sum of scalars, an independent evaluation path
        H, q = inst.problem.H, inst.problem.h @ inst.x_t
        expected = 0.5 * sum(z[i] * H[i, j] * z[j] for i in range(4) for j in range(4))
        expected += sum(q[i] * z[i] for i in range(4))
        assert abs(eval_objective(inst, z) - expected) <= 1e-12 * (1 + abs(expected))


def test_project_nonneg_examples():
    np.testing.assert_allclose(project_nonneg(np.array([-1.0, 2.0])), [0.0, 2.0])
    np.testing.assert_allclose(project_nonneg(np.zeros(2)), [0.0, 0.0])


def test_project_nonneg_idempotent_and_nonexpansive():
    rng = np.random.default_rng(3)
    for _ in range(50):
        v = rng.standard_normal(8) * rng.uniform(0.1, 10)
        w = rng.standard_normal(8) * rng.uniform(0.1, 10)
        pv = project_nonneg(v)
        np.testing.assert_array_equal(project_nonneg(pv), pv)
        assert np.linalg.norm(pv - project_nonneg(w)) <= np.linalg.norm(v - w) + 1e-15


def test_cholesky_accuracy_on_accepted_problems():
    rng = np.random.default_rng(29)
    for _ in range(20):
        inst = random_instance(rng, int(rng.integers(2, 9)), 3)
        validate(inst.problem)
        L = inst.problem.chol
        H = inst.problem.H
        assert np.linalg.norm(L @ L.T - H) <= 1e-10 * np.linalg.norm(H)


def test_problem_arrays_are_readonly():
    qp = _toy_qp()
    with pytest.raises(ValueError):
        qp.H[0, 0] = 5.0
