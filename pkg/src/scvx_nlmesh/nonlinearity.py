"""State transition tensors, nonlinearity indices and trust-region scaling.

The index of a segment compares the spread of its state transition matrix
under initial-state perturbations to the matrix itself. The sampled form
propagates perturbed STMs; the tensor form replaces the perturbed STMs with
the second-order state transition tensor ``Lam[I, J, K] = d Phi[I, J] / d x0[K]``
and entrywise L1 norms.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels as _kern
from .errors import PropagationError
from .integrate import ATOL, RTOL, integrate_batch


def _n_state(model):
    return getattr(model, "n_state", 6)


def _stt_rhs_generic(f, a, h, y, n):
    m = y.shape[0]
    phi = y[:, n:n + n * n].reshape(m, n, n)
    lam = y[:, n + n * n:].reshape(m, n, n, n)
    dphi = a @ phi
    dlam = (np.einsum("mide,mek,mdj->mijk", h, phi, phi)
            + np.einsum("mid,mdjk->mijk", a, lam))
    return np.hstack([f, dphi.reshape(m, -1), dlam.reshape(m, -1)])


def propagate_stt_batch(model, x_k, t_k, t_k1, s, dtau, rtol=RTOL, atol=ATOL, backend=None):
    """Propagate state, STM and STT over a batch of segments.

    Returns ``(x_end, Phi, Lam)`` with shapes (M,n), (M,n,n), (M,n,n,n).
    """
    n = _n_state(model)
    x_k = np.ascontiguousarray(np.atleast_2d(x_k), dtype=float)
    m = x_k.shape[0]
    t_k = np.ascontiguousarray(np.atleast_2d(t_k), dtype=float)
    t_k1 = np.ascontiguousarray(np.atleast_2d(t_k1), dtype=float)
    s = np.ascontiguousarray(np.broadcast_to(s, (m,)), dtype=float)
    dtau = np.ascontiguousarray(np.broadcast_to(dtau, (m,)), dtype=float)
    kern = _kern.get_backend(backend) if n == 6 else None
    y0 = np.zeros((m, n + n * n + n**3))
    y0[:, :n] = x_k
    y0[:, n:n + n * n] = np.eye(n).ravel()

    def rhs(t, y, rows):
        span = dtau[rows]
        beta = np.where(span > 0.0, t / np.where(span > 0.0, span, 1.0), 0.0)
        thrust = (1.0 - beta)[:, None] * t_k[rows] + beta[:, None] * t_k1[rows]
        with np.errstate(all="ignore"):
            der = model.derivatives(y[:, :n], thrust, s[rows], order=2)
        if kern is None:
            return _stt_rhs_generic(der.f, der.a, der.h, y, n)
        out = np.empty_like(y)
        kern.stt_rhs(np.ascontiguousarray(y), np.ascontiguousarray(der.f),
                     np.ascontiguousarray(der.a), np.ascontiguousarray(der.h), out)
        return out

    res = integrate_batch(rhs, y0, dtau, rtol=rtol, atol=atol)
    if res.failed.any():
        raise PropagationError("STT propagation failed", np.flatnonzero(res.failed))
    y = res.y
    return (y[:, :n], y[:, n:n + n * n].reshape(m, n, n),
            y[:, n + n * n:].reshape(m, n, n, n))


def propagate_stt(model, x_k, thrust_k, thrust_k1, s_k, dtau, rtol=RTOL, atol=ATOL):
    """STM and STT of one segment, propagated from identity / zero."""
    _, phi, lam = propagate_stt_batch(model, x_k, thrust_k, thrust_k1, np.array([s_k]),
                                      dtau, rtol=rtol, atol=atol)
    return phi[0], lam[0]


def _stm_batch(model, x0, thrust_k, thrust_k1, s_k, dtau, rtol, atol):
    n = _n_state(model)
    m = x0.shape[0]
    t_k = np.broadcast_to(np.asarray(thrust_k, dtype=float), (m, 3))
    t_k1 = np.broadcast_to(np.asarray(thrust_k1, dtype=float), (m, 3))
    s = np.full(m, float(s_k))
    y0 = np.zeros((m, n + n * n))
    y0[:, :n] = x0
    y0[:, n:] = np.eye(n).ravel()

    def rhs(t, y, rows):
        beta = t / dtau if dtau > 0 else np.zeros_like(t)
        thrust = (1.0 - beta)[:, None] * t_k[rows] + beta[:, None] * t_k1[rows]
        with np.errstate(all="ignore"):
            der = model.derivatives(y[:, :n], thrust, s[rows], order=1)
        phi = y[:, n:].reshape(-1, n, n)
        return np.hstack([der.f, (der.a @ phi).reshape(len(rows), -1)])

    res = integrate_batch(rhs, y0, dtau, rtol=rtol, atol=atol)
    if res.failed.any():
        raise PropagationError("perturbed STM propagation failed", np.flatnonzero(res.failed))
    return res.y[:, n:].reshape(m, n, n)


def sampled_index(model, x_k, thrust_k, thrust_k1, s_k, dtau, dx_max=1e-6, n_samples=32,
                  seed=0, return_samples=False, rtol=1e-12, atol=1e-14):
    """Sampling-based nonlinearity index of one segment.

    Perturbations are drawn uniformly on the sphere of radius ``dx_max``
    around ``x_k``; the index is the largest entrywise-L1 relative change of
    the segment STM. Deterministic for a given ``seed``.
    """
    if not dx_max > 0.0:
        raise ValueError("dx_max must be positive")
    if n_samples < 1:
        raise ValueError("need at least one sample")
    n = _n_state(model)
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n_samples, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    x0 = np.vstack([np.asarray(x_k, dtype=float).reshape(1, n),
                    np.asarray(x_k, dtype=float) + dx_max * dirs])
    phis = _stm_batch(model, x0, thrust_k, thrust_k1, s_k, dtau, rtol, atol)
    ref = phis[0]
    ratios = np.abs(phis[1:] - ref).sum(axis=(1, 2)) / np.abs(ref).sum()
    v = float(ratios.max())
    if return_samples:
        return v, ratios
    return v


def _phi_norm(phi):
    den = np.abs(phi).sum(axis=(-2, -1))
    if np.any(den == 0.0):
        raise ValueError("degenerate STM (all entries zero)")
    return den


def tensor_index(lam, phi):
    """``sum|Lam| / sum|Phi|`` (works on a single segment or a leading batch axis)."""
    lam, phi = np.asarray(lam, dtype=float), np.asarray(phi, dtype=float)
    return np.abs(lam).sum(axis=(-3, -2, -1)) / _phi_norm(phi)


def directional_index(lam, phi, e):
    """Index along state direction ``e``: ``sum_ij |Lam[i, j, e]| / sum|Phi|``."""
    lam, phi = np.asarray(lam, dtype=float), np.asarray(phi, dtype=float)
    n = lam.shape[-1]
    if not 0 <= e < n:
        raise ValueError(f"direction {e} out of range for a {n}-state system")
    return np.abs(lam[..., e]).sum(axis=(-2, -1)) / _phi_norm(phi)


def directional_indices(lam, phi):
    """All directional indices at once; shape (..., n)."""
    lam, phi = np.asarray(lam, dtype=float), np.asarray(phi, dtype=float)
    return np.abs(lam).sum(axis=(-3, -2)) / _phi_norm(phi)[..., None]


@dataclass
class NonlinearityField:
    v: np.ndarray
    gamma: np.ndarray


@dataclass
class TrustRegionSpec:
    """Base radii plus the nonlinearity scaling parameters.

    ``r_s == 0`` fixes the dilations (uniform mesh).
    """

    r_x: np.ndarray
    r_s: float
    eta: float = 0.1
    gamma_min: float = 1.0
    gamma_max: float = 1.0

    def __post_init__(self):
        self.r_x = np.asarray(self.r_x, dtype=float).copy()
        if self.r_x.shape != (6,) or np.any(self.r_x <= 0.0):
            raise ValueError("state trust radii must be six positive numbers")
        if self.r_s < 0.0:
            raise ValueError("dilation trust radius must be non-negative")
        if not self.eta > 0.0 or self.gamma_min > self.gamma_max or self.gamma_min <= 0.0:
            raise ValueError("need eta > 0 and 0 < gamma_min <= gamma_max")

    def scaled(self, gamma=None, K=None):
        """Node field ``gamma * r_x`` (constant radii when ``gamma`` is None)."""
        if gamma is None:
            return np.broadcast_to(self.r_x, (K, 6)).copy()
        return gamma * self.r_x


def clamp_multipliers(v, eta, gamma_min, gamma_max):
    """``clip(eta / v, gamma_min, gamma_max)`` with v = 0 mapped to gamma_max."""
    v = np.asarray(v, dtype=float)
    if np.any(v < 0.0) or np.any(np.isnan(v)):
        raise ValueError("nonlinearity indices must be non-negative")
    with np.errstate(divide="ignore"):
        raw = np.where(v > 0.0, eta / np.where(v > 0.0, v, 1.0), np.inf)
    return np.clip(raw, gamma_min, gamma_max)


def node_multipliers(v, eta, gamma_min, gamma_max):
    """Per-node multipliers (K, 6) from per-segment indices (K-1, 6).

    Node k takes its leading segment k; the final node repeats the last segment.
    """
    gamma = clamp_multipliers(v, eta, gamma_min, gamma_max)
    return np.vstack([gamma, gamma[-1:]])


def scale_trust_region(v, spec):
    """Scaled state radii field (K, 6) from per-segment indices (K-1, 6)."""
    return node_multipliers(v, spec.eta, spec.gamma_min, spec.gamma_max) * spec.r_x


def segment_field(lam, phi, spec):
    """Directional indices and clamped multipliers for a batch of segments."""
    v = directional_indices(lam, phi)
    return NonlinearityField(v, clamp_multipliers(v, spec.eta, spec.gamma_min, spec.gamma_max))
