"""Time-dilated equations of motion and their derivatives.

Both flight models share the control-affine form

    x' = s * drift(x) + control_matrix(x) @ T

where ``s = dt/dtau`` and ``T`` is the acceleration-thrust ``T s / m``. The
log-mass obeys ``z' = -T_bound / c`` separately and is not part of the
six-dimensional state.

Two models are provided:

* :class:`CR3BP` -- rotating-frame circular restricted three-body problem,
  state ``(rx, ry, rz, vx, vy, vz)``. Derivatives are analytic and evaluated
  by the selected kernel backend.
* :class:`MEE` -- two-body motion in modified equinoctial elements
  ``(p, f, g, h, k, L)`` using the Gauss variational equations, prograde
  convention (retrograde factor +1), with the thrust given in the radial /
  transverse / normal frame. Derivatives come from :mod:`.jets`.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import jets
from .errors import DomainError
from .kernels import get_backend

N_STATE = 6
N_CTRL = 3


class Derivatives(NamedTuple):
    """Batched field value and derivatives at a set of points.

    ``f`` (N,6) field; ``a`` (N,6,6) df/dx; ``b`` (N,6,3) df/dT;
    ``d`` (N,6) df/ds; ``h`` (N,6,6,6) d2f/dx2 (None unless requested).
    """

    f: np.ndarray
    a: Optional[np.ndarray]
    b: np.ndarray
    d: np.ndarray
    h: Optional[np.ndarray]


@dataclass(frozen=True)
class DilatedInputs:
    """Controls at a point: acceleration-thrust vector, its epigraph bound, dilation and log-mass."""

    thrust: np.ndarray
    thrust_bound: Optional[float] = None
    s: float = 1.0
    z: float = 0.0

    def __post_init__(self):
        t = np.asarray(self.thrust, dtype=float).reshape(N_CTRL)
        object.__setattr__(self, "thrust", t)
        if self.thrust_bound is None:
            object.__setattr__(self, "thrust_bound", float(np.linalg.norm(t)))
        if self.s < 0.0:
            raise ValueError("time dilation s must be non-negative")


class CR3BP:
    """Circular restricted three-body problem in the rotating frame."""

    name = "cr3bp"

    def __init__(self, mu, backend=None):
        if not 0.0 < mu < 0.5:
            raise ValueError("CR3BP mass ratio must lie in (0, 0.5)")
        self.mu = float(mu)
        self._k = get_backend(backend)
        self._b = np.zeros((N_STATE, N_CTRL))
        self._b[3:, :] = np.eye(3)

    def singular_mask(self, x):
        x = np.atleast_2d(x)
        l1 = np.hypot(np.hypot(x[:, 0] + self.mu, x[:, 1]), x[:, 2])
        l2 = np.hypot(np.hypot(x[:, 0] + self.mu - 1.0, x[:, 1]), x[:, 2])
        return ~(np.isfinite(x).all(axis=1) & (l1 > 1e-12) & (l2 > 1e-12))

    def control_matrix(self, x):
        x = np.atleast_2d(x)
        return np.broadcast_to(self._b, (x.shape[0], N_STATE, N_CTRL))

    def drift(self, x):
        x = np.ascontiguousarray(np.atleast_2d(x), dtype=float)
        out = np.empty_like(x)
        self._k.cr3bp_derivs(x, self.mu, 0, out, None, None)
        return out

    def derivatives(self, x, thrust, s, order=1):
        x = np.ascontiguousarray(x, dtype=float)
        n = x.shape[0]
        drift = np.empty((n, N_STATE))
        jac = np.empty((n, N_STATE, N_STATE)) if order >= 1 else None
        hess = np.empty((n, N_STATE, N_STATE, N_STATE)) if order >= 2 else None
        self._k.cr3bp_derivs(x, self.mu, order, drift, jac, hess)
        s = np.asarray(s, dtype=float)
        f = s[:, None] * drift
        f[:, 3:] += thrust
        a = None if jac is None else jac * s[:, None, None]
        h = None if hess is None else hess * s[:, None, None, None]
        return Derivatives(f, a, self.control_matrix(x), drift, h)

    def jacobi_constant(self, x):
        """Jacobi integral 2*Omega - v^2 of the unforced motion."""
        x = np.atleast_2d(x)
        mu = self.mu
        l1 = np.sqrt((x[:, 0] + mu) ** 2 + x[:, 1] ** 2 + x[:, 2] ** 2)
        l2 = np.sqrt((x[:, 0] + mu - 1) ** 2 + x[:, 1] ** 2 + x[:, 2] ** 2)
        omega = 0.5 * (x[:, 0] ** 2 + x[:, 1] ** 2) + (1 - mu) / l1 + mu / l2
        return 2 * omega - np.sum(x[:, 3:] ** 2, axis=1)

    def to_cartesian(self, x):
        return np.atleast_2d(x).copy()


class MEE:
    """Two-body dynamics in modified equinoctial elements (Gauss variational form)."""

    name = "mee"

    def __init__(self, mu=1.0, backend=None):
        if not mu > 0.0:
            raise ValueError("gravitational parameter must be positive")
        self.mu = float(mu)

    def singular_mask(self, x):
        x = np.atleast_2d(x)
        ok = np.isfinite(x).all(axis=1) & (x[:, 0] > 0.0)
        w = 1.0 + x[:, 1] * np.cos(x[:, 5]) + x[:, 2] * np.sin(x[:, 5])
        return ~(ok & (np.abs(w) > 1e-12))

    def _terms(self, p, f, g, h, k, L):
        # works on floats/arrays and on Jets alike
        mu = self.mu
        sinl, cosl = jets.sin(L), jets.cos(L)
        w = 1.0 + f * cosl + g * sinl
        rt = jets.sqrt(p / mu)
        winv = 1.0 / w
        s2 = 1.0 + h * h + k * k
        hk = h * sinl - k * cosl
        drift_l = jets.sqrt(mu / (p * p * p)) * (w * w)
        # rows: p, f, g, h, k, L ; columns: radial, transverse, normal
        ctrl = [
            [None, 2.0 * p * rt * winv, None],
            [rt * sinl, rt * ((w + 1.0) * cosl + f) * winv, -1.0 * rt * hk * g * winv],
            [-1.0 * rt * cosl, rt * ((w + 1.0) * sinl + g) * winv, rt * hk * f * winv],
            [None, None, 0.5 * rt * s2 * cosl * winv],
            [None, None, 0.5 * rt * s2 * sinl * winv],
            [None, None, rt * hk * winv],
        ]
        return drift_l, ctrl

    def control_matrix(self, x):
        x = np.atleast_2d(x)
        _, ctrl = self._terms(*x.T)
        n = x.shape[0]
        out = np.zeros((n, N_STATE, N_CTRL))
        for i, row in enumerate(ctrl):
            for j, term in enumerate(row):
                if term is not None:
                    out[:, i, j] = term
        return out

    def drift(self, x):
        x = np.atleast_2d(x)
        out = np.zeros_like(x, dtype=float)
        drift_l, _ = self._terms(*x.T)
        out[:, 5] = drift_l
        return out

    def derivatives(self, x, thrust, s, order=1):
        x = np.asarray(x, dtype=float)
        s = np.asarray(s, dtype=float)
        n = x.shape[0]
        if order == 0:
            d = self.drift(x)
            b = self.control_matrix(x)
            f = s[:, None] * d + np.einsum("nij,nj->ni", b, thrust)
            return Derivatives(f, None, b, d, None)
        seeds = jets.Jet.seed(x, second=order >= 2)
        drift_l, ctrl = self._terms(*seeds)
        b = np.zeros((n, N_STATE, N_CTRL))
        rows = []
        for i, row in enumerate(ctrl):
            acc = drift_l * s if i == 5 else None
            for j, term in enumerate(row):
                if term is None:
                    continue
                b[:, i, j] = term.v
                piece = term * thrust[:, j]
                acc = piece if acc is None else acc + piece
            rows.append(acc)
        f, a, h = jets.stack(rows)
        d = np.zeros((n, N_STATE))
        d[:, 5] = drift_l.v
        return Derivatives(f, a, b, d, h)

    def to_cartesian(self, x):
        return mee_to_cartesian(x, self.mu)


def get_model(name, mu, backend=None):
    """Construct a dynamics model by id ('cr3bp' or 'mee')."""
    name = name.lower()
    if name == "cr3bp":
        return CR3BP(mu, backend=backend)
    if name == "mee":
        return MEE(mu, backend=backend)
    raise ValueError(f"unknown model {name!r}")


# -- single-point API ------------------------------------------------------

def _point(model, x, u):
    x = np.asarray(x, dtype=float).reshape(1, N_STATE)
    if model.singular_mask(x)[0]:
        raise DomainError(f"state {x[0]} is singular for model {model.name}")
    return x, u.thrust.reshape(1, N_CTRL), np.array([u.s], dtype=float)


def eval_dynamics(model, x, u):
    """Dilated state rate ``s*drift(x) + B(x) T`` at a single point."""
    xp, t, s = _point(model, x, u)
    return model.derivatives(xp, t, s, order=0).f[0]


def log_mass_rate(u, exhaust_velocity):
    """``z' = -T_bound / c`` (epigraph slack drives the mass flow)."""
    return -u.thrust_bound / exhaust_velocity


def eval_jacobians(model, x, u):
    """Return ``(A_L, B_L, d_L, e)`` of the affine expansion at ``(x, u)``."""
    xp, t, s = _point(model, x, u)
    der = model.derivatives(xp, t, s, order=1)
    a, b, d = der.a[0], der.b[0], der.d[0]
    e = der.f[0] - a @ xp[0] - b @ t[0] - d * s[0]
    return a, np.array(b), d, e


def eval_hessian(model, x, u):
    """Second state derivatives ``H[i, j, k] = d2 f_i / dx_j dx_k``."""
    xp, t, s = _point(model, x, u)
    return model.derivatives(xp, t, s, order=2).h[0]


# -- element conversions ---------------------------------------------------

def cartesian_to_mee(rv, mu):
    """Cartesian ``(r, v)`` rows to modified equinoctial elements, L in (-pi, pi]."""
    rv = np.atleast_2d(np.asarray(rv, dtype=float))
    r, v = rv[:, :3], rv[:, 3:]
    hvec = np.cross(r, v)
    hmag = np.linalg.norm(hvec, axis=1)
    rmag = np.linalg.norm(r, axis=1)
    p = hmag**2 / mu
    hhat = hvec / hmag[:, None]
    denom = 1.0 + hhat[:, 2]
    if np.any(denom <= 1e-12):
        raise DomainError("retrograde equatorial orbit is singular in prograde MEE")
    hh = -hhat[:, 1] / denom
    kk = hhat[:, 0] / denom
    s2 = 1.0 + hh**2 + kk**2
    fhat = np.stack([1 - kk**2 + hh**2, 2 * kk * hh, -2 * kk], axis=1) / s2[:, None]
    ghat = np.stack([2 * kk * hh, 1 + kk**2 - hh**2, 2 * hh], axis=1) / s2[:, None]
    evec = np.cross(v, hvec) / mu - r / rmag[:, None]
    f = np.sum(evec * fhat, axis=1)
    g = np.sum(evec * ghat, axis=1)
    L = np.arctan2(np.sum(r * ghat, axis=1), np.sum(r * fhat, axis=1))
    return np.stack([p, f, g, hh, kk, L], axis=1)


def mee_to_cartesian(x, mu):
    """Modified equinoctial elements rows to Cartesian ``(r, v)`` rows."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    p, f, g, h, k, L = x.T
    cosl, sinl = np.cos(L), np.sin(L)
    a2 = h**2 - k**2
    s2 = 1 + h**2 + k**2
    w = 1 + f * cosl + g * sinl
    rad = p / w
    r = (rad / s2)[:, None] * np.stack([
        cosl + a2 * cosl + 2 * h * k * sinl,
        sinl - a2 * sinl + 2 * h * k * cosl,
        2 * (h * sinl - k * cosl),
    ], axis=1)
    vs = (-1.0 / s2 * np.sqrt(mu / p))[:, None]
    v = vs * np.stack([
        sinl + a2 * sinl - 2 * h * k * cosl + g - 2 * f * h * k + a2 * g,
        -cosl + a2 * cosl + 2 * h * k * sinl - f + 2 * g * h * k + a2 * f,
        -2 * (h * cosl + k * sinl + f * h + g * k),
    ], axis=1)
    return np.hstack([r, v])
