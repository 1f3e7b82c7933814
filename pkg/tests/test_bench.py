"""Benchmark harness: suites, scenario sweeps, closed-loop simulation."""
import csv
import numpy as np
import pytest

from mpcqp import QpInstance, reference_oracle
from mpcqp.bench import (
    BenchmarkSuite,
    cessna_benchmark,
    closed_loop,
    planar_benchmark,
    prepare,
    run_scenarios,
    scenario,
)


def test_planar_suite_structure(planar_prepared):
    suite = planar_prepared.suite
    eigs = np.abs(np.linalg.eigvals(suite.model.A))
    assert eigs.max() == pytest.approx(1.2)  # unstable, triangular A
    qp = planar_prepared.condensed.qp
    # 2*(N*n_u) + 2*((N+1)*n_y) bound rows minus the state-only ones
    total = 2 * (10 * 1) + 2 * (11 * 2)
    dropped = len(planar_prepared.condensed.state_rows)
    assert qp.m == total - dropped
    assert planar_prepared.consts.eta_d > 1e-6  # eps = 1e-6 stays admissible
    assert planar_prepared.consts.eta_d == pytest.approx(
        planar_prepared.consts.m_d**2 / 200.0
    )


def test_planar_states_feasible_with_active_optima(planar_prepared):
    qp = planar_prepared.condensed.qp
    for x0 in planar_prepared.suite.initial_states:
        assert planar_prepared.condensed.check_state(x0) == ()
        ref = reference_oracle(QpInstance(qp, x0), l_d=planar_prepared.consts.l_d)
        assert len(ref.active) >= 1  # constraints bind at the optimum


def test_cessna_suite_structure(cessna_prepared):
    suite = cessna_prepared.suite
    model, cfg = suite.model, suite.config
    assert (model.n_x, model.n_u, model.n_y) == (4, 1, 2)
    assert cfg.N == 10
    assert cfg.R[0, 0] == pytest.approx(10.0)
    qp = cessna_prepared.condensed.qp
    # u: 2*10, rate rows: 2*9, pitch: 2*11 minus dropped stage-0 rows
    assert qp.m == 20 + 18 + 22 - len(cessna_prepared.condensed.state_rows)
    assert len(suite.initial_states) == 30
    assert suite.reference_notes["original_m_d"] == pytest.approx(1.1394e-4)
    assert suite.reference_notes["original_eta_d"] == pytest.approx(2.6e-2)


def test_cessna_states_feasible(cessna_prepared):
    qp = cessna_prepared.condensed.qp
    for x0 in cessna_prepared.suite.initial_states:
        assert cessna_prepared.condensed.check_state(x0) == ()
        ref = reference_oracle(QpInstance(qp, x0), l_d=cessna_prepared.consts.l_d)
        assert ref.obj == ref.obj  # solved without raising


def test_scenario_mapping_enforced():
    assert scenario(1).init_rule == "ls_warm_lambda_one"
    assert scenario(2).init_rule == "ls_warm_lambda_small"
    assert scenario(3).solver == "hybrid"
    assert scenario(4).solver == "dfg"
    from mpcqp.bench import Scenario

    with pytest.raises(ValueError):
        Scenario(id=1, solver="dfg", init_rule="dfg_only")
    with pytest.raises(ValueError):
        Scenario(id=7, solver="pdip", init_rule="ls_warm_lambda_one")


def test_repetitions_must_be_odd(planar_prepared):
    suite = planar_prepared.suite
    with pytest.raises(ValueError):
        BenchmarkSuite(
            name="x", model=suite.model, config=suite.config,
            initial_states=suite.initial_states, l_dh=200.0, repetitions=4,
        )
    with pytest.raises(ValueError):
        run_scenarios(suite, scenarios=(3,), repetitions=2)


@pytest.fixture(scope="module")
def planar_sweep():
    return run_scenarios(planar_benchmark(), scenarios=(1, 2, 3, 4), eps=1e-6, repetitions=3)


def test_sweep_structural_assertions_pass(planar_sweep):
    assert planar_sweep.ok, planar_sweep.assertion_failures


def test_sweep_scenario3_zero_damped(planar_sweep):
    for cell in planar_sweep.cells:
        if cell.scenario_id == 3 and cell.termination != "cap":
            assert cell.damped_iters == 0


def test_sweep_scenario4_needs_many_more_iterations(planar_sweep):
    dfg3 = [c.dfg_iters for c in planar_sweep.cells if c.scenario_id == 3]
    dfg4 = [c.dfg_iters for c in planar_sweep.cells if c.scenario_id == 4]
    assert np.mean(dfg4) > 2 * np.mean(dfg3)
    assert all(100 <= k <= 5000 for k in dfg4)  # standalone runs to the gap


def test_sweep_objective_errors(planar_sweep):
    for cell in planar_sweep.cells:
        if cell.termination == "converged":
            assert cell.obj_err_rel <= 1e-5
            assert cell.infeasibility <= 1e-6


def test_sweep_tables_and_outputs(tmp_path, planar_sweep):
    planar_sweep.write(tmp_path)
    assert (tmp_path / "report.json").exists()
    with open(tmp_path / "summary_table1.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [int(r["scenario"]) for r in rows] == [1, 2, 3, 4]
    s3 = next(r for r in rows if r["scenario"] == "3")
    assert float(s3["damped_iters_mean"]) == 0.0
    with open(tmp_path / "summary_table2.csv") as fh:
        rows2 = list(csv.DictReader(fh))
    for r in rows2:
        if int(r["timed_cells"]) > 0:
            assert float(r["best_s"]) <= float(r["average_s"]) <= float(r["worst_s"])
    traces = list((tmp_path / "traces").glob("*.csv"))
    assert traces  # per-cell trace files shipped alongside
    import json

    with open(tmp_path / "report.json") as fh:
        doc = json.load(fh)
    # timing stats recomputable from the raw logs
    for cell in doc["cells"]:
        if cell["times_s"]:
            assert np.median(cell["times_s"]) == pytest.approx(cell["median_s"])
            assert np.std(cell["times_s"]) == pytest.approx(cell["std_s"])


def test_closed_loop_origin_is_equilibrium():
    suite = planar_benchmark()
    log = closed_loop(suite, 3, steps=5, x0=[0.0, 0.0])
    assert log.status == "completed"
    for u in log.inputs:
        np.testing.assert_allclose(u, 0.0, atol=1e-9)
    for x in log.states:
        np.testing.assert_allclose(x, 0.0, atol=1e-8)


def test_closed_loop_regulates_planar_state():
    suite = planar_benchmark()
    log = closed_loop(suite, 3, steps=50, x0=[0.3, 0.7])
    assert log.status == "completed"
    norms = [np.linalg.norm(x) for x in log.states]
    assert norms[-1] <= 1e-3 * norms[0]
    u_max = suite.config.u_max
    for u in log.inputs:
        assert (np.abs(u) <= u_max + 1e-9).all()


def test_closed_loop_inputs_match_oracle():
    suite = planar_benchmark()
    prep = prepare(suite)
    log = closed_loop(suite, 3, steps=8, x0=[0.3, 0.7])
    x = np.array([0.3, 0.7])
    for u_applied in log.inputs:
        ref = reference_oracle(QpInstance(prep.condensed.qp, x), l_d=prep.consts.l_d)
        assert np.abs(u_applied - ref.z[: suite.model.n_u]).max() <= 1e-7
        x = suite.model.A @ x + suite.model.B @ u_applied


def test_closed_loop_halts_on_bad_state():
    suite = planar_benchmark()
    log = closed_loop(suite, 3, steps=5, x0=[5.0, 5.0])  # violates |y| <= 1 immediately
    assert log.status.startswith("state_infeasible")
    assert log.inputs == []
