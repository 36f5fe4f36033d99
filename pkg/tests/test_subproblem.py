import numpy as np
import pytest

from scvx_nlmesh import conic
from scvx_nlmesh.discretization import discretize
from scvx_nlmesh.errors import AssemblyError, ScvxError
from scvx_nlmesh.scvx import initialize_reference
from scvx_nlmesh.subproblem import (VariableLayout, assemble, extract_solution,
                                    linearized_thrust_bound, node_segments, objective_value,
                                    trapezoid, trapezoid_weights)


def _setup(problem, K, r=0.1, r_s=0.1):
    ref = initialize_reference(problem, K)
    disc = discretize(problem.make_model(), ref)
    params = problem.subproblem_params(5.0)
    prog = assemble(ref, disc, np.full((K, 6), r), r_s, params)
    return ref, disc, params, prog


def test_variable_count_for_three_nodes():
    K = 3
    lay = VariableLayout(K)
    assert lay.size == K * (6 + 3 + 1 + 1) + (K - 1) * (1 + 6) + (K - 1) * 6 == 59
    idx = np.concatenate([lay.index(n).ravel() for n in lay.blocks])
    np.testing.assert_array_equal(np.sort(idx), np.arange(59))


def test_pack_unpack_round_trip(rng):
    lay = VariableLayout(4)
    parts = {name: rng.normal(size=shape) for name, (_, shape) in lay.blocks.items()}
    back = lay.unpack(lay.pack(parts))
    for name in parts:
        np.testing.assert_array_equal(back[name], parts[name])
    with pytest.raises(ScvxError):
        lay.unpack(np.zeros(3))


def test_trapezoid():
    assert trapezoid([1.0, 1.0, 1.0]) == 1.0
    assert trapezoid([0.0, 2.0]) == 1.0
    np.testing.assert_allclose(trapezoid_weights(5) @ np.arange(5.0), trapezoid(np.arange(5.0)))
    np.testing.assert_array_equal(node_segments(4), [0, 1, 2, 2])


def test_linearized_thrust_bound_matches_finite_differences():
    tmax, s0, z0 = 0.3, 2.0, -0.4
    const, cs, cz = linearized_thrust_bound(z0, s0, tmax)
    f = lambda s, z: tmax * s * np.exp(-z)  # noqa: E731
    assert const + cs * s0 + cz * z0 == pytest.approx(f(s0, z0), rel=1e-14)
    h = 1e-6
    assert cs == pytest.approx((f(s0 + h, z0) - f(s0 - h, z0)) / (2 * h), rel=1e-8)
    assert cz == pytest.approx((f(s0, z0 + h) - f(s0, z0 - h)) / (2 * h), rel=1e-8)
    with pytest.raises(ValueError):
        linearized_thrust_bound(0.0, 1.0, 0.0)


def test_solution_satisfies_constraints(halo_problem):
    K = 12
    ref, disc, params, prog = _setup(halo_problem, K)
    csol = conic.solve(prog)
    assert csol.ok
    sol = extract_solution(prog, csol, params)
    np.testing.assert_allclose(sol.x[0], halo_problem.x0, atol=1e-9)
    np.testing.assert_allclose(sol.x[-1], halo_problem.xf, atol=1e-9)
    assert sol.z[0] == pytest.approx(halo_problem.z0, abs=1e-9)
    # dynamics with virtual control
    pred = disc.predict(sol.x, sol.thrust, sol.s) + sol.h
    np.testing.assert_allclose(pred, sol.x[1:], atol=1e-8)
    # mass recursion and thrust cone
    c = params.exhaust_velocity
    dz = sol.z[1:] - sol.z[:-1]
    np.testing.assert_allclose(dz, -(sol.thrust_bound[:-1] + sol.thrust_bound[1:])
                               / (2 * (K - 1) * c), atol=1e-10)
    assert np.all(np.linalg.norm(sol.thrust, axis=1) <= sol.thrust_bound + 1e-8)
    # trust region and mesh sum
    assert np.all(np.abs(sol.x - ref.x) <= 0.1 + 1e-8)
    assert np.mean(sol.s) == pytest.approx(params.tof, rel=1e-9)
    assert np.all(np.abs(sol.s - ref.s) <= 0.1 + 1e-8)
    assert sol.objective == pytest.approx(objective_value(sol.thrust_bound, sol.h, 5.0))
    assert sol.objective == pytest.approx(csol.objective, rel=1e-5)


def test_uniform_mesh_pins_dilations(halo_problem):
    K = 8
    ref, disc, params, prog = _setup(halo_problem, K, r_s=0.0)
    sol = extract_solution(prog, conic.solve(prog), params)
    np.testing.assert_allclose(sol.s, ref.s, atol=1e-9)


def test_assembly_rejects_bad_inputs(halo_problem):
    K = 5
    ref = initialize_reference(halo_problem, K)
    disc = discretize(halo_problem.make_model(), ref)
    params = halo_problem.subproblem_params(5.0)
    with pytest.raises(AssemblyError):
        assemble(ref, disc, np.full((K - 1, 6), 0.1), 0.1, params)
    with pytest.raises(AssemblyError):
        assemble(ref, disc, np.zeros((K, 6)), 0.1, params)
    disc.e[0, 0] = np.nan
    with pytest.raises(AssemblyError):
        assemble(ref, disc, np.full((K, 6), 0.1), 0.1, params)
    short = initialize_reference(halo_problem, K + 1)
    with pytest.raises(AssemblyError):
        assemble(short, disc, np.full((K + 1, 6), 0.1), 0.1, params)


def test_failed_solve_gives_no_trajectory(halo_problem):
    _, _, params, prog = _setup(halo_problem, 4)
    bad = conic.ConicSolution(None, None, None, None, float("nan"), conic.INFEASIBLE, 3, {}, 0.0)
    sol = extract_solution(prog, bad, params)
    assert not sol.ok and sol.x is None
