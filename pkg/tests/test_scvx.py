import dataclasses
import math

import numpy as np
import pytest

from scvx_nlmesh import scvx as scvx_mod
from scvx_nlmesh.discretization import propagate_nonlinear
from scvx_nlmesh.scvx import (IterationRecord, Scvx, ScvxOptions, initialize_reference,
                              nonlinear_cost, run, trust_update)
from scvx_nlmesh.subproblem import objective_value, trapezoid

CR3BP_OPTS = ScvxOptions()


def coast_problem(problem, days=3.0):
    """Same start, target reached by coasting: a zero-propellant optimum exists."""
    model = problem.make_model()
    tof = problem.units.days_to_norm(days)
    xf = propagate_nonlinear(model, problem.x0, np.zeros(3), np.zeros(3), tof, 1.0)
    return dataclasses.replace(problem, xf=xf, tof_days=days)


@pytest.mark.parametrize("rho,dL,accepted,factor", [
    (0.01, 1.0, False, 1 / 1.5),     # reject, contract
    (0.1, 1.0, True, 1 / 1.5),       # accept, contract
    (0.5, 1.0, True, 1.0),           # accept, hold
    (0.9, 1.0, True, 1.5),           # accept, expand
    (0.04, 1.0, True, 1 / 1.5),      # rho0 itself is not a rejection
    (0.2, 1.0, True, 1.0),
    (0.7, 1.0, True, 1.5),
    (0.9, 0.0, False, 1 / 1.5),      # no predicted decrease
    (0.9, -1.0, False, 1 / 1.5),
    (float("nan"), 1.0, False, 1 / 1.5),
    (float("-inf"), 1.0, False, 1 / 1.5),
])
def test_trust_update_cases(rho, dL, accepted, factor):
    assert trust_update(rho, dL, CR3BP_OPTS) == (accepted, pytest.approx(factor))


def test_options_validation():
    with pytest.raises(ValueError):
        ScvxOptions(rho0=0.5, rho1=0.2)
    with pytest.raises(ValueError):
        ScvxOptions(alpha=1.0)
    with pytest.raises(ValueError):
        ScvxOptions(r_x=(0.1,) * 5)
    with pytest.raises(ValueError):
        ScvxOptions(mesh="chebyshev")
    with pytest.raises(ValueError):
        ScvxOptions(gamma_min=3.0, gamma_max=1.0)


def test_initial_reference(halo_problem):
    ref = initialize_reference(halo_problem, 7)
    assert np.array_equal(ref.x[0], halo_problem.x0)
    assert np.array_equal(ref.x[-1], halo_problem.xf)
    assert np.all(ref.thrust == 0.0) and np.all(ref.z == halo_problem.z0)
    np.testing.assert_array_equal(ref.s, np.full(6, halo_problem.tof))
    with pytest.raises(ValueError):
        initialize_reference(halo_problem, 1)


def test_e2d_longitude_spans_five_revolutions():
    from scvx_nlmesh import bundled_config, load_config
    prob = load_config(bundled_config("e2d")).problem()
    span = prob.xf[5] - prob.x0[5]
    assert prob.n_rev == 5
    assert 10 * math.pi <= span < 12 * math.pi
    ref = initialize_reference(prob, 11)
    assert np.all(np.diff(ref.x[:, 5]) > 0)


def test_nonlinear_cost_examples(halo_problem):
    assert nonlinear_cost(np.zeros(5), np.zeros((4, 6)), 5.0) == 0.0
    assert nonlinear_cost(np.ones(5), np.full((4, 6), 0.5), 2.0) == pytest.approx(1.0 + 24.0)
    # equals the convex cost when the virtual controls match the defects
    rng = np.random.default_rng(3)
    ts, h = rng.uniform(0, 1, 5), rng.normal(size=(4, 6))
    assert nonlinear_cost(ts, np.abs(h), 5.0) == pytest.approx(objective_value(ts, h, 5.0))


def _drive_step(monkeypatch, problem, rho_target):
    """Run one step() with the nonlinear cost forced to give ratio ``rho_target``."""
    solver = Scvx(problem, ScvxOptions(), 6)
    seen = {}
    real_extract = scvx_mod.extract_solution

    def extract(prog, csol, params):
        seen["sol"] = sol = real_extract(prog, csol, params)
        return sol

    def defects(model, x, thrust, s, rtol, atol):
        sol = seen["sol"]
        dL = solver.J_ref - sol.objective
        J_new = solver.J_ref - rho_target * dL
        out = np.zeros((x.shape[0] - 1, 6))
        out[0, 0] = (J_new - trapezoid(sol.thrust_bound)) / solver.opts.penalty
        return out, np.array([], dtype=int)

    monkeypatch.setattr(scvx_mod, "extract_solution", extract)
    monkeypatch.setattr(scvx_mod, "compute_defects", defects)
    ref0, r0 = solver.ref, solver.r_x.copy()
    rec = solver.step()
    return solver, rec, ref0, r0


@pytest.mark.parametrize("rho,accepted,factor", [
    (0.01, False, 1 / 1.5), (0.1, True, 1 / 1.5), (0.5, True, 1.0), (0.9, True, 1.5)])
def test_step_follows_ratio_regimes(monkeypatch, halo_problem, rho, accepted, factor):
    solver, rec, ref0, r0 = _drive_step(monkeypatch, halo_problem, rho)
    assert rec.rho == pytest.approx(rho, rel=1e-9)
    assert rec.accepted is accepted
    np.testing.assert_allclose(solver.r_x, r0 * factor, rtol=1e-15)
    assert (solver.ref is ref0) is (not accepted)
    assert solver.consecutive_rejections == (0 if accepted else 1)


def test_run_converges_on_reachable_target(halo_problem):
    prob = coast_problem(halo_problem)
    records = []
    res = run(prob, ScvxOptions(max_iterations=60), 25, sink=records.append)
    assert res.converged and res.message == "converged"
    assert len(records) == res.iterations == len(res.history)
    assert res.final_defects.max() < 1e-4
    assert prob.m0_kg - res.final_mass_kg < 0.02
    # log-mass follows the trapezoid recursion exactly
    ref = res.reference
    K = ref.K
    c = prob.exhaust_velocity
    np.testing.assert_allclose(np.diff(ref.z), -(ref.thrust_bound[:-1] + ref.thrust_bound[1:])
                               / (2 * (K - 1) * c), atol=1e-12)
    mf = prob.m0_kg * math.exp(-trapezoid(ref.thrust_bound) / c)
    assert res.final_mass_kg == pytest.approx(mf, rel=1e-10)


def test_run_is_deterministic(halo_problem):
    prob = coast_problem(halo_problem)
    opts = ScvxOptions(max_iterations=4)
    a, b = run(prob, opts, 12), run(prob, opts, 12)
    assert [r.csv_row() for r in a.history] == [r.csv_row() for r in b.history]
    np.testing.assert_array_equal(a.reference.x, b.reference.x)


def test_budget_and_rejection_limits(halo_problem):
    res = run(halo_problem, ScvxOptions(max_iterations=2), 10)
    assert not res.converged and res.iterations == 2
    assert res.message == "iteration budget exhausted"


def test_uniform_mesh_keeps_dilations(halo_problem):
    prob = coast_problem(halo_problem)
    res = run(prob, ScvxOptions(mesh="uniform", max_iterations=5), 10)
    np.testing.assert_allclose(res.reference.s, prob.tof, rtol=1e-9)


def test_nonlinearity_index_scales_radii(halo_problem):
    on = Scvx(halo_problem, ScvxOptions(), 10)
    off = Scvx(halo_problem, ScvxOptions(nl_index=False), 10)
    field = on.trust_field()
    assert field.shape == (10, 6)
    assert np.all(field >= 0.5 * 0.1 - 1e-15) and np.all(field <= 20 * 0.1 + 1e-15)
    np.testing.assert_array_equal(off.trust_field(), np.full((10, 6), 0.1))


def test_iteration_record_csv():
    rec = IterationRecord(1, 0.5, 1.0, 0.8, 0.2, 0.5, 0.4, True, np.full(6, 0.1), 0.1, 1e-3,
                          0.3, "optimal", 12)
    assert len(rec.csv_row()) == len(IterationRecord.csv_header())
    assert all("[" in h for h in IterationRecord.csv_header())
    assert rec.csv_row()[7] == 1
