"""Second-order cone programs and their solution.

Programs have the form::

    minimize    c'x
    subject to  A x  = b
                G x + s = h,   s in K = R+^l x Q^q1 x ... x Q^qm

where ``Q^q = {(t, u) : ||u||_2 <= t}``. The interior-point work is delegated
to Clarabel; this module owns the problem container, status mapping,
independent KKT residual checks and a plain-text triplet dump format.
"""

import time
from dataclasses import dataclass, field
from typing import Optional

import clarabel
import numpy as np
import scipy.sparse as sp

OPTIMAL = "optimal"
NEAR_OPTIMAL = "near-optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_FAILURE = "numerical-failure"

_STATUS = {
    "Solved": OPTIMAL,
    "AlmostSolved": NEAR_OPTIMAL,
    "PrimalInfeasible": INFEASIBLE,
    "AlmostPrimalInfeasible": INFEASIBLE,
    "DualInfeasible": UNBOUNDED,
    "AlmostDualInfeasible": UNBOUNDED,
}

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200
INNER_TOL_FACTOR = 0.1


@dataclass
class ConicProgram:
    c: np.ndarray
    A: sp.csc_matrix
    b: np.ndarray
    G: sp.csc_matrix
    h: np.ndarray
    n_nonneg: int
    soc_sizes: list = field(default_factory=list)
    layout: Optional[object] = None

    def __post_init__(self):
        n = self.c.shape[0]
        self.A = sp.csc_matrix(self.A)
        self.G = sp.csc_matrix(self.G)
        if self.A.shape[1] != n or self.G.shape[1] != n:
            raise ValueError("constraint matrices do not match the variable count")
        if self.A.shape[0] != self.b.shape[0] or self.G.shape[0] != self.h.shape[0]:
            raise ValueError("right-hand sides do not match the constraint rows")
        if self.n_nonneg + sum(self.soc_sizes) != self.G.shape[0]:
            raise ValueError("cone sizes do not add up to the conic rows")

    @property
    def n_vars(self):
        return self.c.shape[0]

    @property
    def n_eq(self):
        return self.A.shape[0]


@dataclass
class ConicSolution:
    x: Optional[np.ndarray]
    y: Optional[np.ndarray]
    z: Optional[np.ndarray]
    s: Optional[np.ndarray]
    objective: float
    status: str
    iterations: int
    residuals: dict
    solve_time: float
    raw_status: str = ""

    @property
    def ok(self):
        return self.status in (OPTIMAL, NEAR_OPTIMAL)


def _inf(v):
    return float(np.max(np.abs(v))) if v.size else 0.0


def kkt_residuals(program, x, y, z, s):
    """Relative primal/dual residuals and duality gap on the unscaled program."""
    ax = program.A @ x
    gx = program.G @ x
    r_eq = ax - program.b
    r_cone = gx + s - program.h
    primal = max(_inf(r_eq), _inf(r_cone)) / max(
        1.0, _inf(program.b) + _inf(program.h) + _inf(x) + _inf(s))
    aty = program.A.T @ y
    gtz = program.G.T @ z
    dual = _inf(program.c + aty + gtz) / max(1.0, _inf(program.c) + _inf(aty) + _inf(gtz))
    pobj = float(program.c @ x)
    dobj = -float(program.b @ y) - float(program.h @ z)
    gap = abs(pobj - dobj) / max(1.0, min(abs(pobj), abs(dobj)))
    return {"primal": primal, "dual": dual, "gap": gap}


def cone_violation(program, s):
    """Largest violation of ``s in K`` (0 when inside the cone)."""
    worst = 0.0
    l = program.n_nonneg
    if l:
        worst = max(worst, float(np.max(-s[:l], initial=0.0)))
    off = l
    for q in program.soc_sizes:
        blk = s[off:off + q]
        worst = max(worst, float(np.linalg.norm(blk[1:]) - blk[0]))
        off += q
    return max(worst, 0.0)


def solve(program, tolerance=DEFAULT_TOL, max_iterations=DEFAULT_MAX_ITER):
    """Solve a ConicProgram to primal-dual optimality."""
    n = program.n_vars
    m_eq = program.n_eq
    stacked = sp.vstack([program.A, program.G], format="csc")
    rhs = np.concatenate([program.b, program.h])
    cones = []
    if m_eq:
        cones.append(clarabel.ZeroConeT(m_eq))
    if program.n_nonneg:
        cones.append(clarabel.NonnegativeConeT(program.n_nonneg))
    cones.extend(clarabel.SecondOrderConeT(q) for q in program.soc_sizes)

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = int(max_iterations)
    # Clarabel tests its residuals on the equilibrated data; the margin keeps the
    # unscaled residuals checked below inside ``tolerance``.
    inner = INNER_TOL_FACTOR * tolerance
    settings.tol_gap_abs = inner
    settings.tol_gap_rel = inner
    settings.tol_feas = inner
    settings.tol_ktratio = 1e-7
    settings.max_threads = 1
    t0 = time.perf_counter()
    try:
        if not (np.all(np.isfinite(stacked.data)) and np.all(np.isfinite(rhs))
                and np.all(np.isfinite(program.c))):
            raise ValueError("non-finite program data")
        solver = clarabel.DefaultSolver(sp.csc_matrix((n, n)), program.c, stacked, rhs,
                                        cones, settings)
        sol = solver.solve()
    except Exception as exc:  # noqa: BLE001 - solver breakdown must not crash callers
        return ConicSolution(None, None, None, None, float("nan"), NUMERICAL_FAILURE, 0,
                             {}, time.perf_counter() - t0, raw_status=str(exc))
    elapsed = time.perf_counter() - t0
    raw = str(sol.status)
    status = _STATUS.get(raw, NUMERICAL_FAILURE)
    x = np.asarray(sol.x)
    zz = np.asarray(sol.z)
    ss = np.asarray(sol.s)
    y, z = zz[:m_eq], zz[m_eq:]
    s_cone = ss[m_eq:]
    if status in (OPTIMAL, NEAR_OPTIMAL) and np.all(np.isfinite(x)):
        res = kkt_residuals(program, x, y, z, s_cone)
        res["cone"] = cone_violation(program, s_cone)
        if status == OPTIMAL and max(res.values()) > tolerance:
            status = NEAR_OPTIMAL
        return ConicSolution(x, y, z, s_cone, float(program.c @ x), status,
                             int(sol.iterations), res, elapsed, raw)
    if status in (OPTIMAL, NEAR_OPTIMAL):
        status = NUMERICAL_FAILURE
    return ConicSolution(None, None, None, None, float("nan"), status, int(sol.iterations),
                         {}, elapsed, raw)


# -- triplet dump ------------------------------------------------------------

_MAGIC = "# scvx-nlmesh conic program v1"


def _triplets(name, mat, fh):
    coo = sp.coo_matrix(mat)
    order = np.lexsort((coo.col, coo.row))
    fh.write(f"section {name} {coo.nnz}\n")
    for i in order:
        fh.write(f"{coo.row[i]} {coo.col[i]} {float(coo.data[i])!r}\n")


def _vector(name, vec, fh):
    nz = np.flatnonzero(vec)
    fh.write(f"section {name} {nz.size}\n")
    for i in nz:
        fh.write(f"{i} {float(vec[i])!r}\n")


def dump_program(program, path):
    """Write ``program`` as text.

    Format::

        # scvx-nlmesh conic program v1
        dims <n_vars> <n_eq> <n_cone_rows>
        cones l=<n_nonneg> q=<q1,q2,...>
        section c <nnz>      then "<col> <value>" lines
        section A <nnz>      then "<row> <col> <value>" lines
        section b <nnz>      then "<row> <value>" lines
        section G <nnz>      (as A)
        section h <nnz>      (as b)
        end
    """
    with open(path, "w") as fh:
        fh.write(_MAGIC + "\n")
        fh.write(f"dims {program.n_vars} {program.n_eq} {program.G.shape[0]}\n")
        fh.write(f"cones l={program.n_nonneg} q={','.join(map(str, program.soc_sizes))}\n")
        _vector("c", program.c, fh)
        _triplets("A", program.A, fh)
        _vector("b", program.b, fh)
        _triplets("G", program.G, fh)
        _vector("h", program.h, fh)
        fh.write("end\n")


def load_program(path):
    """Read a program written by :func:`dump_program`."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if lines[0] != _MAGIC:
        raise ValueError(f"{path}: not a conic program dump")
    _, n, m_eq, m_cone = lines[1].split()
    n, m_eq, m_cone = int(n), int(m_eq), int(m_cone)
    cone_fields = dict(tok.split("=") for tok in lines[2].split()[1:])
    n_l = int(cone_fields["l"])
    socs = [int(q) for q in cone_fields["q"].split(",") if q]
    data = {}
    i = 3
    while lines[i] != "end":
        _, name, count = lines[i].split()
        count = int(count)
        data[name] = [ln.split() for ln in lines[i + 1:i + 1 + count]]
        i += 1 + count

    def vec(name, size):
        v = np.zeros(size)
        for idx, val in data[name]:
            v[int(idx)] = float(val)
        return v

    def mat(name, rows):
        t = data[name]
        r = [int(a) for a, _, _ in t]
        c = [int(b) for _, b, _ in t]
        d = [float(v) for _, _, v in t]
        return sp.csc_matrix((d, (r, c)), shape=(rows, n))

    return ConicProgram(vec("c", n), mat("A", m_eq), vec("b", m_eq), mat("G", m_cone),
                        vec("h", m_cone), n_l, socs)
