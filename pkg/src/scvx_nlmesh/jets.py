"""Second-order forward-mode automatic differentiation on batched values.

A :class:`Jet` carries a value, gradient and (optionally) Hessian with respect
to ``n`` seed variables, for a batch of N points at once::

    v: (N,)   g: (N, n)   h: (N, n, n) or None

Only the handful of operations needed by the orbital element equations are
provided.
"""

import numpy as np


class Jet:
    __slots__ = ("v", "g", "h")
    __array_priority__ = 100

    def __init__(self, v, g, h=None):
        self.v = v
        self.g = g
        self.h = h

    @classmethod
    def seed(cls, x, second=True):
        """Independent variables: one jet per column of ``x`` (N, n)."""
        n_pts, n = x.shape
        eye = np.eye(n)
        out = []
        for i in range(n):
            g = np.broadcast_to(eye[i], (n_pts, n)).copy()
            h = np.zeros((n_pts, n, n)) if second else None
            out.append(cls(x[:, i].copy(), g, h))
        return out

    # -- helpers ---------------------------------------------------------
    def _lift(self, other):
        if isinstance(other, Jet):
            return other
        other = np.asarray(other, dtype=float)
        g = np.zeros_like(self.g)
        h = None if self.h is None else np.zeros_like(self.h)
        return Jet(np.broadcast_to(other, self.v.shape).astype(float), g, h)

    def _unary(self, f0, f1, f2):
        g = f1[:, None] * self.g
        h = None
        if self.h is not None:
            h = f1[:, None, None] * self.h + f2[:, None, None] * (
                self.g[:, :, None] * self.g[:, None, :])
        return Jet(f0, g, h)

    # -- arithmetic ------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.v + other, self.g, self.h)
        h = None if self.h is None else self.h + other.h
        return Jet(self.v + other.v, self.g + other.g, h)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.v, -self.g, None if self.h is None else -self.h)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            c = np.asarray(other, dtype=float)
            cg = c[..., None] if c.ndim else c
            h = None
            if self.h is not None:
                h = self.h * (c[..., None, None] if c.ndim else c)
            return Jet(self.v * c, self.g * cg, h)
        v = self.v * other.v
        g = self.v[:, None] * other.g + other.v[:, None] * self.g
        h = None
        if self.h is not None:
            outer = self.g[:, :, None] * other.g[:, None, :]
            h = (self.v[:, None, None] * other.h + other.v[:, None, None] * self.h
                 + outer + np.swapaxes(outer, 1, 2))
        return Jet(v, g, h)

    __rmul__ = __mul__

    def reciprocal(self):
        inv = 1.0 / self.v
        return self._unary(inv, -inv * inv, 2.0 * inv * inv * inv)

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / np.asarray(other, dtype=float))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, k):
        if k == 2:
            return self * self
        v = self.v
        return self._unary(v ** k, k * v ** (k - 1), k * (k - 1) * v ** (k - 2))


def sqrt(a):
    if not isinstance(a, Jet):
        return np.sqrt(a)
    r = np.sqrt(a.v)
    return a._unary(r, 0.5 / r, -0.25 / (r * a.v))


def sin(a):
    if not isinstance(a, Jet):
        return np.sin(a)
    s, c = np.sin(a.v), np.cos(a.v)
    return a._unary(s, c, -s)


def cos(a):
    if not isinstance(a, Jet):
        return np.cos(a)
    s, c = np.sin(a.v), np.cos(a.v)
    return a._unary(c, -s, -c)


def stack(jets):
    """Stack a list of m jets into value (N, m), Jacobian (N, m, n), Hessian (N, m, n, n)."""
    v = np.stack([j.v for j in jets], axis=1)
    g = np.stack([j.g for j in jets], axis=1)
    h = None
    if jets[0].h is not None:
        h = np.stack([j.h for j in jets], axis=1)
    return v, g, h
