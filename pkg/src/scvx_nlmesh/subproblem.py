"""Assembly of the convex subproblem solved at every SCVX iteration.

Decision vector layout (contiguous blocks, node-major inside each block)::

    x   (K, 6)    node states
    Tv  (K, 3)    acceleration-thrust vectors
    Ts  (K,)      epigraph bounds  ||Tv_k|| <= Ts_k
    z   (K,)      log-mass
    s   (K-1,)    segment dilations
    h   (K-1, 6)  virtual controls on the discrete dynamics
    w   (K-1, 6)  L1 auxiliaries, w >= |h|
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .conic import OPTIMAL, NEAR_OPTIMAL, ConicProgram
from .errors import AssemblyError, ScvxError

log = logging.getLogger(__name__)

_BLOCKS = (("x", 6), ("Tv", 3), ("Ts", 1), ("z", 1), ("s", 1), ("h", 6), ("w", 6))


class VariableLayout:
    """Offsets of each variable block in the flat decision vector."""

    def __init__(self, K):
        self.K = K
        self.blocks = {}
        off = 0
        for name, width in _BLOCKS:
            rows = K if name in ("x", "Tv", "Ts", "z") else K - 1
            shape = (rows, width) if width > 1 else (rows,)
            size = rows * width
            self.blocks[name] = (off, shape)
            off += size
        self.size = off

    def index(self, name):
        """Integer index array of a block, shaped like the block."""
        off, shape = self.blocks[name]
        return off + np.arange(int(np.prod(shape))).reshape(shape)

    def unpack(self, vec):
        if vec.shape != (self.size,):
            raise ScvxError(f"layout mismatch: expected {self.size} entries, got {vec.shape}")
        out = {}
        for name, (off, shape) in self.blocks.items():
            out[name] = vec[off:off + int(np.prod(shape))].reshape(shape).copy()
        return out

    def pack(self, parts):
        vec = np.zeros(self.size)
        for name, (off, shape) in self.blocks.items():
            arr = np.asarray(parts[name], dtype=float)
            if arr.shape != shape:
                raise ScvxError(f"block {name}: expected shape {shape}, got {arr.shape}")
            vec[off:off + arr.size] = arr.ravel()
        return vec


@dataclass(frozen=True)
class SubproblemParams:
    """Problem data that does not change between iterations (normalized units)."""

    x0: np.ndarray
    xf: np.ndarray
    z0: float
    tof: float
    tmax: float
    exhaust_velocity: float
    penalty: float


@dataclass
class SubproblemSolution:
    status: str
    x: Optional[np.ndarray] = None
    thrust: Optional[np.ndarray] = None
    thrust_bound: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None
    s: Optional[np.ndarray] = None
    h: Optional[np.ndarray] = None
    objective: float = float("nan")
    solver_objective: float = float("nan")
    residuals: Optional[dict] = None

    @property
    def ok(self):
        return self.status in (OPTIMAL, NEAR_OPTIMAL)


def trapezoid(values):
    """Trapezoid rule on the uniform unit grid: ``1/(K-1) * sum (v_k + v_k+1)/2``."""
    values = np.asarray(values, dtype=float)
    K = values.shape[0]
    return float(np.sum(0.5 * (values[:-1] + values[1:])) / (K - 1))


def trapezoid_weights(K):
    w = np.full(K, 1.0 / (K - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def linearized_thrust_bound(z_hat, s_hat, tmax):
    """Affine model of ``tmax * s * exp(-z)`` about ``(s_hat, z_hat)``.

    Returns ``(const, coef_s, coef_z)`` so that the bound is
    ``const + coef_s * s + coef_z * z`` (i.e. ``tmax e^-zh (s - sh (z - zh))``).
    """
    if not tmax > 0.0:
        raise ValueError("maximum thrust must be positive")
    z_hat = np.asarray(z_hat, dtype=float)
    s_hat = np.asarray(s_hat, dtype=float)
    scale = tmax * np.exp(-z_hat)
    return scale * s_hat * z_hat, scale, -scale * s_hat


def node_segments(K):
    """Segment index attached to each node (leading segment; last node uses the last one)."""
    return np.minimum(np.arange(K), K - 2)


class _Rows:
    """Accumulates COO triplets for a block of constraint rows."""

    def __init__(self):
        self.r, self.c, self.v, self.rhs, self.names = [], [], [], [], []
        self.n = 0

    def add(self, name, rows, cols, vals, rhs):
        rows = np.asarray(rows)
        vals = np.broadcast_to(np.asarray(vals, dtype=float), rows.shape)
        rhs = np.asarray(rhs, dtype=float).ravel()
        if not np.all(np.isfinite(vals)) or not np.all(np.isfinite(rhs)):
            raise AssemblyError(f"non-finite coefficient in constraint '{name}'")
        self.r.append(rows.ravel() + self.n)
        self.c.append(np.asarray(cols).ravel())
        self.v.append(vals.ravel())
        self.rhs.append(rhs)
        self.names.append((name, self.n, rhs.size))
        self.n += rhs.size

    def matrix(self, n_cols):
        if not self.r:
            return sp.csc_matrix((0, n_cols)), np.zeros(0)
        r = np.concatenate(self.r)
        c = np.concatenate(self.c)
        v = np.concatenate(self.v)
        mat = sp.csc_matrix((v, (r, c)), shape=(self.n, n_cols))
        return mat, np.concatenate(self.rhs)


def assemble(ref, disc, r_x, r_s, params):
    """Build the conic program for one SCVX iteration.

    Args:
        ref: ReferenceTrajectory the linearization was taken about.
        disc: Discretization of ``ref`` (K-1 segments).
        r_x: (K, 6) state trust radii per node (already nonlinearity-scaled).
        r_s: dilation trust radius; 0 pins every ``s_k`` to the reference (uniform mesh).
        params: SubproblemParams.
    """
    K = ref.K
    if K < 2:
        raise AssemblyError("need at least two nodes")
    if len(disc) != K - 1:
        raise AssemblyError(f"expected {K - 1} segment linearizations, got {len(disc)}")
    r_x = np.asarray(r_x, dtype=float)
    if r_x.shape != (K, 6):
        raise AssemblyError(f"state trust radii must have shape {(K, 6)}, got {r_x.shape}")
    if np.any(r_x <= 0.0) or r_s < 0.0:
        raise AssemblyError("trust radii must be positive (r_s may be 0)")
    lay = VariableLayout(K)
    X, TV, TS, Z = lay.index("x"), lay.index("Tv"), lay.index("Ts"), lay.index("z")
    S, H, W = lay.index("s"), lay.index("h"), lay.index("w")
    m = K - 1
    c = params.exhaust_velocity

    eq = _Rows()
    # x_k+1 - A x_k - B T_k - C T_k+1 - d s_k - h_k = e_k
    row6 = np.arange(6 * m).reshape(m, 6)
    rr = np.repeat(row6[:, :, None], 6, axis=2)
    rr3 = np.repeat(row6[:, :, None], 3, axis=2)
    cols = [X[1:], np.broadcast_to(X[:-1][:, None, :], (m, 6, 6)),
            np.broadcast_to(TV[:-1][:, None, :], (m, 6, 3)),
            np.broadcast_to(TV[1:][:, None, :], (m, 6, 3)),
            np.broadcast_to(S[:, None], (m, 6)), H]
    rows = [row6, rr, rr3, rr3, row6, row6]
    vals = [1.0, -disc.A, -disc.B, -disc.C, -disc.d, -1.0]
    eq.add("dynamics",
           np.concatenate([np.broadcast_to(r, np.shape(cc)).ravel() for r, cc in zip(rows, cols)]),
           np.concatenate([np.asarray(cc).ravel() for cc in cols]),
           np.concatenate([np.broadcast_to(v, np.shape(cc)).ravel() for v, cc in zip(vals, cols)]),
           disc.e)
    # z_k+1 - z_k + (Ts_k + Ts_k+1) / (2 (K-1) c) = 0
    k = np.arange(m)
    q = 1.0 / (2.0 * (K - 1) * c)
    eq.add("mass",
           np.concatenate([k, k, k, k]),
           np.concatenate([Z[1:], Z[:-1], TS[:-1], TS[1:]]),
           np.concatenate([np.ones(m), -np.ones(m), np.full(m, q), np.full(m, q)]),
           np.zeros(m))
    eq.add("boundary_x0", np.arange(6), X[0], 1.0, params.x0)
    eq.add("boundary_xf", np.arange(6), X[-1], 1.0, params.xf)
    eq.add("boundary_z0", [0], [Z[0]], 1.0, [params.z0])
    if r_s == 0.0:
        eq.add("mesh_fixed", k, S, 1.0, ref.s)
    else:
        eq.add("mesh_sum", np.zeros(m, dtype=int), S, 1.0 / (K - 1), [params.tof])

    ineq = _Rows()
    # Ts_k - coef_s s_j - coef_z z_k <= const
    seg = node_segments(K)
    const, coef_s, coef_z = linearized_thrust_bound(ref.z, ref.s[seg], params.tmax)
    nodes = np.arange(K)
    ineq.add("thrust_bound",
             np.concatenate([nodes, nodes, nodes]),
             np.concatenate([TS, S[seg], Z]),
             np.concatenate([np.ones(K), -coef_s, -coef_z]),
             const)
    rk = np.arange(6 * K).reshape(K, 6)
    ineq.add("trust_x_upper", rk, X, 1.0, ref.x + r_x)
    ineq.add("trust_x_lower", rk, X, -1.0, -ref.x + r_x)
    if r_s > 0.0:
        ineq.add("trust_s_upper", k, S, 1.0, ref.s + r_s)
        ineq.add("trust_s_lower", k, S, -1.0, -ref.s + r_s)
    ineq.add("s_nonneg", k, S, -1.0, np.zeros(m))
    ineq.add("l1_upper", np.concatenate([row6.ravel(), row6.ravel()]),
             np.concatenate([H.ravel(), W.ravel()]),
             np.concatenate([np.ones(6 * m), -np.ones(6 * m)]), np.zeros(6 * m))
    ineq.add("l1_lower", np.concatenate([row6.ravel(), row6.ravel()]),
             np.concatenate([H.ravel(), W.ravel()]),
             np.concatenate([-np.ones(6 * m), -np.ones(6 * m)]), np.zeros(6 * m))
    n_nonneg = ineq.n
    # (Ts_k, Tv_k) in Q^4  <=>  -[Ts_k, Tv_k] + s = 0
    soc_rows = np.arange(4 * K).reshape(K, 4)
    ineq.add("thrust_cone", soc_rows, np.hstack([TS[:, None], TV]), -1.0, np.zeros(4 * K))

    A, b = eq.matrix(lay.size)
    G, h = ineq.matrix(lay.size)
    cvec = np.zeros(lay.size)
    cvec[TS] = trapezoid_weights(K)
    cvec[W.ravel()] = params.penalty
    prog = ConicProgram(cvec, A, b, G, h, n_nonneg, [4] * K, layout=lay)
    prog.row_names = {"eq": eq.names, "cone": ineq.names}
    return prog


def objective_value(thrust_bound, h, penalty):
    """Convex cost: trapezoid of the thrust bound plus the L1 virtual-control penalty."""
    return trapezoid(thrust_bound) + penalty * float(np.sum(np.abs(h)))


def extract_solution(program, conic_solution, params, rel_tol=1e-6):
    """Unpack a conic solution into trajectory arrays and recompute the convex cost."""
    status = conic_solution.status
    if not conic_solution.ok:
        return SubproblemSolution(status=status)
    parts = program.layout.unpack(conic_solution.x)
    L = objective_value(parts["Ts"], parts["h"], params.penalty)
    obj = conic_solution.objective
    if abs(L - obj) > rel_tol * max(1.0, abs(obj)):
        log.warning("convex cost %.12g differs from solver objective %.12g", L, obj)
    return SubproblemSolution(
        status=status, x=parts["x"], thrust=parts["Tv"], thrust_bound=parts["Ts"],
        z=parts["z"], s=parts["s"], h=parts["h"], objective=L, solver_objective=obj,
        residuals=conic_solution.residuals)
