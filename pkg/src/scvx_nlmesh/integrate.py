"""Batched adaptive Dormand-Prince 8(5,3) integration.

Every row of the batch is an independent initial value problem integrated
from local time 0 to its own end time with its own step size. Rows share the
vectorized right-hand side evaluation but never each other's step control,
so the result for one row does not depend on what else is in the batch.

The Butcher tableau and the error estimator follow Hairer's DOP853, as
shipped with scipy.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _dop

RTOL = 1e-10
ATOL = 1e-12

_A = _dop.A[:_dop.N_STAGES, :_dop.N_STAGES]
_B = _dop.B
_C = _dop.C[:_dop.N_STAGES]
_E3 = _dop.E3
_E5 = _dop.E5
_NS = _dop.N_STAGES
_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_EXPONENT = -1.0 / 8.0


@dataclass
class BatchResult:
    y: np.ndarray
    failed: np.ndarray
    n_steps: np.ndarray
    n_rejected: np.ndarray
    nfev: int


def integrate_batch(rhs, y0, t_end, rtol=RTOL, atol=ATOL, max_steps=20000, h0=None):
    """Integrate ``y' = rhs(t, y, rows)`` for every row of ``y0`` over ``[0, t_end]``.

    Args:
        rhs: callable ``(t, y, rows) -> dy`` where ``t`` (n,), ``y`` (n, m) and
            ``rows`` (n,) holds the batch indices of the rows being evaluated.
        y0: initial states, shape (N, m).
        t_end: scalar or (N,) end times (>= 0).
        rtol, atol: tolerances for the mixed error test.
        max_steps: step budget per row before declaring failure.
        h0: optional initial step (defaults to the full interval).

    Returns:
        BatchResult with the end states; rows that failed (step underflow,
        non-finite values or exhausted budget) are flagged in ``failed`` and
        carry NaN.
    """
    y = np.array(y0, dtype=float, copy=True)
    n, m = y.shape
    t_end = np.broadcast_to(np.asarray(t_end, dtype=float), (n,)).copy()
    if np.any(t_end < 0.0):
        raise ValueError("t_end must be non-negative")
    t = np.zeros(n)
    h = t_end.copy() if h0 is None else np.minimum(np.full(n, float(h0)), t_end)
    failed = np.zeros(n, dtype=bool)
    done = t_end <= 0.0
    n_steps = np.zeros(n, dtype=int)
    n_rej = np.zeros(n, dtype=int)
    last_rejected = np.zeros(n, dtype=bool)

    rows = np.flatnonzero(~done)
    nfev = 0
    fsal = np.empty((n, m))
    if rows.size:
        fsal[rows] = rhs(t[rows], y[rows], rows)
        nfev += 1
    k = np.empty((_NS + 1, n, m))

    while rows.size:
        tr, yr, hr = t[rows], y[rows], h[rows]
        # clip the final step onto the end time exactly
        remaining = t_end[rows] - tr
        hr = np.minimum(hr, remaining)
        ks = k[:, : rows.size]
        ks[0] = fsal[rows]
        for s in range(1, _NS):
            dy = np.zeros_like(yr)
            for j in range(s):
                if _A[s, j] != 0.0:
                    dy += _A[s, j] * ks[j]
            ks[s] = rhs(tr + _C[s] * hr, yr + hr[:, None] * dy, rows)
        acc = np.zeros_like(yr)
        for j in range(_NS):
            if _B[j] != 0.0:
                acc += _B[j] * ks[j]
        y_new = yr + hr[:, None] * acc
        t_new = tr + hr
        f_new = rhs(t_new, y_new, rows)
        ks[_NS] = f_new
        nfev += _NS

        scale = atol + np.maximum(np.abs(yr), np.abs(y_new)) * rtol
        e5 = np.zeros_like(yr)
        e3 = np.zeros_like(yr)
        for j in range(_NS + 1):
            if _E5[j] != 0.0:
                e5 += _E5[j] * ks[j]
            if _E3[j] != 0.0:
                e3 += _E3[j] * ks[j]
        e5 /= scale
        e3 /= scale
        e5n = np.sum(e5 * e5, axis=1)
        e3n = np.sum(e3 * e3, axis=1)
        denom = e5n + 0.01 * e3n
        with np.errstate(invalid="ignore", divide="ignore"):
            err = np.where(denom > 0.0, np.abs(hr) * e5n / np.sqrt(denom * m), 0.0)

        finite = np.isfinite(err) & np.isfinite(y_new).all(axis=1)
        accept = finite & (err < 1.0)
        with np.errstate(divide="ignore"):
            grow = np.where(err == 0.0, _MAX_FACTOR,
                            np.minimum(_MAX_FACTOR, _SAFETY * err ** _EXPONENT))
            shrink = np.where(finite, np.maximum(_MIN_FACTOR, _SAFETY * err ** _EXPONENT),
                              _MIN_FACTOR)
        grow = np.where(last_rejected[rows], np.minimum(1.0, grow), grow)

        acc_rows = rows[accept]
        y[acc_rows] = y_new[accept]
        reached = t_new[accept] >= t_end[acc_rows]
        t[acc_rows] = np.where(reached, t_end[acc_rows], t_new[accept])
        fsal[acc_rows] = f_new[accept]
        h[acc_rows] = hr[accept] * grow[accept]
        n_steps[acc_rows] += 1
        last_rejected[acc_rows] = False
        done[acc_rows[reached]] = True

        rej_rows = rows[~accept]
        h[rej_rows] = hr[~accept] * shrink[~accept]
        n_rej[rej_rows] += 1
        last_rejected[rej_rows] = True

        tiny = 10.0 * np.spacing(np.maximum(np.abs(t[rows]), 1.0))
        bad = (h[rows] < tiny) & ~done[rows]
        bad |= (n_steps[rows] + n_rej[rows]) >= max_steps
        bad |= ~np.isfinite(fsal[rows]).all(axis=1) & ~done[rows]
        if np.any(bad):
            bad_rows = rows[bad]
            failed[bad_rows] = True
            done[bad_rows] = True
            y[bad_rows] = np.nan
        rows = rows[~done[rows]]

    return BatchResult(y, failed, n_steps, n_rej, nfev)
