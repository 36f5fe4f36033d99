"""Uniform tau-grid, first-order-hold discretization and defect propagation.

Each segment ``[tau_k, tau_k+1]`` is linearized along the nonlinear reference
propagated from ``x_k`` with the thrust interpolated linearly between the
node values and a constant dilation ``s_k``. The affine map

    x_k+1 = Abar x_k + Bbar T_k + Cbar T_k+1 + dbar s_k + ebar

is obtained from one augmented ODE per segment. All segments are integrated
as one batch; each keeps its own step-size control so results do not depend
on batch composition.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels as _kern
from .errors import PropagationError
from .integrate import ATOL, RTOL, integrate_batch

N = 6


@dataclass(frozen=True)
class Grid:
    """Equally spaced normalized-time nodes ``tau_k = k/(K-1)``."""

    K: int
    tau: np.ndarray = field(repr=False)

    @property
    def dtau(self):
        return 1.0 / (self.K - 1)

    @property
    def n_segments(self):
        return self.K - 1


def make_grid(K):
    if int(K) != K or K < 2:
        raise ValueError(f"grid needs at least 2 nodes, got {K!r}")
    K = int(K)
    tau = np.arange(K) / (K - 1)
    tau[-1] = 1.0
    return Grid(K, tau)


def foh_weights(tau, k, grid):
    """First-order-hold weights ``(alpha, beta)`` of segment ``k`` at ``tau``."""
    lo, hi = grid.tau[k], grid.tau[k + 1]
    span = hi - lo
    if not lo - 1e-15 <= tau <= hi + 1e-15:
        raise ValueError(f"tau={tau} outside segment {k} [{lo}, {hi}]")
    beta = (tau - lo) / span
    return 1.0 - beta, beta


@dataclass
class ReferenceTrajectory:
    """Node states, acceleration-thrust (vector and bound), log-mass and segment dilations."""

    x: np.ndarray
    thrust: np.ndarray
    thrust_bound: np.ndarray
    z: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        K = self.x.shape[0]
        if self.x.shape != (K, N) or self.thrust.shape != (K, 3):
            raise ValueError("reference arrays have inconsistent shapes")
        if self.thrust_bound.shape != (K,) or self.z.shape != (K,) or self.s.shape != (K - 1,):
            raise ValueError("reference arrays have inconsistent shapes")

    @property
    def K(self):
        return self.x.shape[0]

    def copy(self):
        return ReferenceTrajectory(self.x.copy(), self.thrust.copy(),
                                   self.thrust_bound.copy(), self.z.copy(), self.s.copy())


@dataclass
class SegmentLinearization:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    d: np.ndarray
    e: np.ndarray
    Phi: np.ndarray
    Lam: Optional[np.ndarray] = None


@dataclass
class Discretization:
    """Batched segment maps for a whole trajectory; index to get one segment."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    d: np.ndarray
    e: np.ndarray
    x_end: np.ndarray
    Lam: Optional[np.ndarray] = None

    @property
    def Phi(self):
        return self.A

    def __len__(self):
        return self.A.shape[0]

    def __getitem__(self, k):
        lam = None if self.Lam is None else self.Lam[k]
        return SegmentLinearization(self.A[k], self.B[k], self.C[k], self.d[k], self.e[k],
                                    self.A[k], lam)

    def predict(self, x, thrust, s):
        """Affine one-step prediction of ``x_k+1`` for every segment."""
        return (np.einsum("kij,kj->ki", self.A, x[:-1])
                + np.einsum("kij,kj->ki", self.B, thrust[:-1])
                + np.einsum("kij,kj->ki", self.C, thrust[1:])
                + self.d * s[:, None] + self.e)


def _c(a):
    return np.ascontiguousarray(a, dtype=float)


def _control(t, rows, t_k, t_k1, dtau):
    span = dtau[rows]
    with np.errstate(invalid="ignore", divide="ignore"):
        beta = np.where(span > 0.0, t / span, 0.0)
    alpha = 1.0 - beta
    thrust = alpha[:, None] * t_k[rows] + beta[:, None] * t_k1[rows]
    return alpha, beta, thrust


def discretize_batch(model, x_k, t_k, t_k1, s, dtau, with_stt=False,
                     rtol=RTOL, atol=ATOL, backend=None):
    """Discretize a batch of segments.

    Args:
        model: dynamics model.
        x_k: (M, 6) segment start states.
        t_k, t_k1: (M, 3) thrust at segment start / end nodes.
        s: (M,) segment dilations.
        dtau: scalar or (M,) segment lengths in normalized time.
        with_stt: also propagate the second-order state transition tensor.

    Returns:
        Discretization; raises PropagationError naming failed segments.
    """
    kern = _kern.get_backend(backend)
    x_k, t_k, t_k1 = _c(np.atleast_2d(x_k)), _c(np.atleast_2d(t_k)), _c(np.atleast_2d(t_k1))
    m = x_k.shape[0]
    s = _c(np.broadcast_to(s, (m,)))
    dtau = _c(np.broadcast_to(dtau, (m,)))
    width = _kern.N_DISC + (_kern.N_STT if with_stt else 0)
    y0 = np.zeros((m, width))
    y0[:, :N] = x_k
    y0[:, _kern.OFF_PHI:_kern.OFF_B] = np.eye(N).ravel()
    order = 2 if with_stt else 1

    def rhs(t, y, rows):
        alpha, beta, thrust = _control(t, rows, t_k, t_k1, dtau)
        sr = s[rows]
        with np.errstate(all="ignore"):
            der = model.derivatives(y[:, :N], thrust, sr, order=order)
        out = np.empty_like(y)
        hess = _c(der.h) if with_stt else None
        kern.disc_rhs(_c(y), _c(der.a), _c(der.b), _c(der.d), _c(der.f), _c(thrust),
                      sr, _c(alpha), _c(beta), hess, out)
        return out

    res = integrate_batch(rhs, y0, dtau, rtol=rtol, atol=atol)
    if res.failed.any():
        raise PropagationError(
            f"discretization failed on segments {np.flatnonzero(res.failed).tolist()}",
            np.flatnonzero(res.failed))
    y = res.y
    lam = None
    if with_stt:
        lam = y[:, _kern.N_DISC:].reshape(m, N, N, N)
    return Discretization(
        A=y[:, _kern.OFF_PHI:_kern.OFF_B].reshape(m, N, N),
        B=y[:, _kern.OFF_B:_kern.OFF_C].reshape(m, N, 3),
        C=y[:, _kern.OFF_C:_kern.OFF_D].reshape(m, N, 3),
        d=y[:, _kern.OFF_D:_kern.OFF_E].copy(),
        e=y[:, _kern.OFF_E:_kern.N_DISC].copy(),
        x_end=y[:, :N].copy(),
        Lam=lam,
    )


def discretize(model, ref, with_stt=False, rtol=RTOL, atol=ATOL, backend=None):
    """Discretize every segment of a reference trajectory on the uniform grid."""
    dtau = 1.0 / (ref.K - 1)
    return discretize_batch(model, ref.x[:-1], ref.thrust[:-1], ref.thrust[1:], ref.s,
                            dtau, with_stt=with_stt, rtol=rtol, atol=atol, backend=backend)


def discretize_segment(model, x_k, thrust_k, thrust_k1, s_k, dtau, with_stt=False,
                       rtol=RTOL, atol=ATOL):
    """Single-segment convenience wrapper returning a SegmentLinearization."""
    if s_k < 0.0:
        raise ValueError("segment dilation must be non-negative")
    disc = discretize_batch(model, x_k, thrust_k, thrust_k1, np.array([s_k]), dtau,
                            with_stt=with_stt, rtol=rtol, atol=atol)
    return disc[0]


def propagate_batch(model, x_k, t_k, t_k1, s, dtau, rtol=RTOL, atol=ATOL):
    """Propagate the nonlinear dynamics over a batch of segments.

    Returns ``(x_end, failed)``; failed rows hold NaN.
    """
    x_k, t_k, t_k1 = _c(np.atleast_2d(x_k)), _c(np.atleast_2d(t_k)), _c(np.atleast_2d(t_k1))
    m = x_k.shape[0]
    s = _c(np.broadcast_to(s, (m,)))
    dtau = _c(np.broadcast_to(dtau, (m,)))

    def rhs(t, y, rows):
        _, _, thrust = _control(t, rows, t_k, t_k1, dtau)
        with np.errstate(all="ignore"):
            return model.derivatives(y, thrust, s[rows], order=0).f

    res = integrate_batch(rhs, x_k, dtau, rtol=rtol, atol=atol)
    return res.y, res.failed


def propagate_nonlinear(model, x_k, thrust_k, thrust_k1, s_k, dtau, rtol=RTOL, atol=ATOL):
    """State at the end of one segment under FOH thrust and constant dilation."""
    y, failed = propagate_batch(model, x_k, thrust_k, thrust_k1, np.array([s_k]), dtau,
                                rtol=rtol, atol=atol)
    if failed[0]:
        raise PropagationError("nonlinear propagation failed", [0])
    return y[0]


def compute_defects(model, x, thrust, s, rtol=RTOL, atol=ATOL):
    """Elementwise |propagated x_k -> x_k+1 minus x_k+1| for every segment.

    Segments whose propagation fails get ``inf`` defects; their indices are
    returned as the second element.
    """
    K = x.shape[0]
    ends, failed = propagate_batch(model, x[:-1], thrust[:-1], thrust[1:], s,
                                   1.0 / (K - 1), rtol=rtol, atol=atol)
    defects = np.abs(ends - x[1:])
    defects[failed] = np.inf
    return defects, np.flatnonzero(failed)
