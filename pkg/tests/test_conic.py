import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from scvx_nlmesh import conic
from scvx_nlmesh.conic import ConicProgram, dump_program, load_program, solve


def empty(n):
    return sp.csc_matrix((0, n)), np.zeros(0)


def lp_with_known_basis(rng, m=20, n=40):
    """min c'y s.t. Ay = b, y >= 0 with a planted optimal basis.

    Returns the program and the optimum from a dense solve of the basis KKT system.
    """
    A = rng.normal(size=(m, n))
    basis = np.sort(rng.choice(n, m, replace=False))
    nonbasis = np.setdiff1d(np.arange(n), basis)
    y_b = rng.uniform(0.5, 2.0, m)
    b = A[:, basis] @ y_b
    lam = rng.normal(size=m)
    c = A.T @ lam
    c[nonbasis] += rng.uniform(0.5, 2.0, nonbasis.size)
    # dense oracle: A_B y_B = b, y_N = 0
    y = np.zeros(n)
    y[basis] = np.linalg.solve(A[:, basis], b)
    prog = ConicProgram(c, sp.csc_matrix(A), b, -sp.eye(n, format="csc"), np.zeros(n), n, [])
    return prog, float(c @ y), y


def test_scalar_lower_bound():
    A, b = empty(1)
    prog = ConicProgram(np.array([1.0]), A, b, sp.csc_matrix([[-1.0]]), np.array([-3.0]), 1, [])
    sol = solve(prog)
    assert sol.status == conic.OPTIMAL
    assert sol.x[0] == pytest.approx(3.0, abs=1e-6)
    assert sol.objective == pytest.approx(3.0, abs=1e-6)


def test_euclidean_norm_epigraph():
    A, b = empty(1)
    G = sp.csc_matrix(np.array([[-1.0], [0.0], [0.0]]))
    prog = ConicProgram(np.array([1.0]), A, b, G, np.array([0.0, 3.0, 4.0]), 0, [3])
    sol = solve(prog)
    assert sol.ok
    assert sol.objective == pytest.approx(5.0, abs=1e-6)


def test_random_lp_matches_dense_kkt(rng):
    prog, opt, y = lp_with_known_basis(rng)
    sol = solve(prog)
    assert sol.status == conic.OPTIMAL
    assert abs(sol.objective - opt) < 1e-6
    np.testing.assert_allclose(sol.x, y, atol=1e-6)
    assert max(sol.residuals["primal"], sol.residuals["dual"]) <= 1e-8
    assert sol.residuals["cone"] <= 1e-8


def test_equality_row_permutation_invariance(rng):
    prog, _, _ = lp_with_known_basis(rng)
    perm = rng.permutation(prog.n_eq)
    shuffled = ConicProgram(prog.c, prog.A[perm], prog.b[perm], prog.G, prog.h, prog.n_nonneg, [])
    a, b = solve(prog), solve(shuffled)
    assert abs(a.objective - b.objective) <= 1e-8 * max(1.0, abs(a.objective))


@settings(max_examples=15, deadline=None)
@given(st.floats(0.01, 100.0), st.integers(0, 2**31 - 1))
def test_objective_scaling(lam, seed):
    prog, opt, y = lp_with_known_basis(np.random.default_rng(seed), m=6, n=12)
    scaled = ConicProgram(lam * prog.c, prog.A, prog.b, prog.G, prog.h, prog.n_nonneg, [])
    sol = solve(scaled)
    assert sol.ok
    assert sol.objective == pytest.approx(lam * opt, rel=1e-6, abs=1e-7)
    np.testing.assert_allclose(sol.x, y, atol=1e-5)


def test_infeasible_and_unbounded_statuses():
    # x >= 1 and x <= -1
    A, b = empty(1)
    G = sp.csc_matrix(np.array([[-1.0], [1.0]]))
    sol = solve(ConicProgram(np.array([1.0]), A, b, G, np.array([-1.0, -1.0]), 2, []))
    assert sol.status == conic.INFEASIBLE and not sol.ok
    # min x with x <= 0 only
    sol = solve(ConicProgram(np.array([1.0]), A, b, sp.csc_matrix([[1.0]]), np.zeros(1), 1, []))
    assert sol.status == conic.UNBOUNDED


def test_non_finite_data_reports_failure():
    A, b = empty(1)
    prog = ConicProgram(np.array([np.nan]), A, b, sp.csc_matrix([[-1.0]]), np.array([-3.0]), 1,
                        [])
    assert solve(prog).status == conic.NUMERICAL_FAILURE


def test_program_shape_checks():
    A, b = empty(2)
    with pytest.raises(ValueError):
        ConicProgram(np.zeros(2), A, b, sp.csc_matrix(np.eye(3)), np.zeros(3), 3, [])
    with pytest.raises(ValueError):
        ConicProgram(np.zeros(2), A, b, sp.csc_matrix(np.eye(2)), np.zeros(2), 1, [])


def test_dump_round_trip(tmp_path, rng):
    prog, _, _ = lp_with_known_basis(rng, m=4, n=8)
    path = tmp_path / "lp.txt"
    dump_program(prog, path)
    back = load_program(path)
    np.testing.assert_array_equal(back.c, prog.c)
    assert (back.A != prog.A).nnz == 0 and (back.G != prog.G).nnz == 0
    np.testing.assert_array_equal(back.b, prog.b)
    assert solve(back).objective == solve(prog).objective


def test_deterministic(rng):
    prog, _, _ = lp_with_known_basis(rng)
    a, b = solve(prog), solve(prog)
    np.testing.assert_array_equal(a.x, b.x)
