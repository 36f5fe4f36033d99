"""Pure numpy versions of the hot kernels.

Every function here has a drop-in twin in ``_ckernels.pyx``. Arrays are
batched over a leading axis of length N (one row per trajectory segment).
Outputs are written into caller-supplied buffers so both backends share the
same calling convention.
"""

import numpy as np

# layout of the augmented discretization state (per row)
N_X = 6
OFF_PHI = 6
OFF_B = 42
OFF_C = 60
OFF_D = 78
OFF_E = 84
N_DISC = 90
N_STT = 216

_CORIOLIS = np.array([[0.0, 2.0, 0.0], [-2.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
_EYE3 = np.eye(3)
_XY = np.diag([1.0, 1.0, 0.0])


def cr3bp_derivs(x, mu, order, drift, jac, hess):
    """Drift field of the CR3BP and its first/second state derivatives.

    Fills ``drift`` (N,6) always, ``jac`` (N,6,6) if ``order >= 1`` and
    ``hess`` (N,6,6,6) if ``order >= 2``. Derivatives are of the undilated
    drift, i.e. without the time-dilation factor.
    """
    r = x[:, :3]
    v = x[:, 3:]
    rho1 = r.copy()
    rho1[:, 0] += mu
    rho2 = r.copy()
    rho2[:, 0] += mu - 1.0
    l1sq = np.einsum("ni,ni->n", rho1, rho1)
    l2sq = np.einsum("ni,ni->n", rho2, rho2)
    l1 = np.sqrt(l1sq)
    l2 = np.sqrt(l2sq)
    m1 = 1.0 - mu
    m2 = mu
    i3_1 = m1 / (l1sq * l1)
    i3_2 = m2 / (l2sq * l2)

    drift[:, :3] = v
    drift[:, 3:] = r @ _XY - i3_1[:, None] * rho1 - i3_2[:, None] * rho2
    drift[:, 3] += 2.0 * v[:, 1]
    drift[:, 4] -= 2.0 * v[:, 0]
    if order < 1:
        return

    i5_1 = 3.0 * m1 / (l1sq * l1sq * l1)
    i5_2 = 3.0 * m2 / (l2sq * l2sq * l2)
    jac[:] = 0.0
    jac[:, 0:3, 3:6] = _EYE3
    grav = (
        _XY
        - (i3_1 + i3_2)[:, None, None] * _EYE3
        + i5_1[:, None, None] * np.einsum("ni,nj->nij", rho1, rho1)
        + i5_2[:, None, None] * np.einsum("ni,nj->nij", rho2, rho2)
    )
    jac[:, 3:6, 0:3] = grav
    jac[:, 3:6, 3:6] = _CORIOLIS
    if order < 2:
        return

    hess[:] = 0.0
    block = np.zeros((x.shape[0], 3, 3, 3))
    for rho, c5, lsq in ((rho1, i5_1, l1sq), (rho2, i5_2, l2sq)):
        # m*(3*(d_ij p_k + d_ik p_j + d_jk p_i)/l^5 - 15 p_i p_j p_k / l^7)
        sym = (
            np.einsum("ij,nk->nijk", _EYE3, rho)
            + np.einsum("ik,nj->nijk", _EYE3, rho)
            + np.einsum("jk,ni->nijk", _EYE3, rho)
        )
        cube = np.einsum("ni,nj,nk->nijk", rho, rho, rho)
        block += c5[:, None, None, None] * sym
        block -= (5.0 * c5 / lsq)[:, None, None, None] * cube
    hess[:, 3:6, 0:3, 0:3] = block


def disc_rhs(y, a_mat, b_mat, d_vec, f_vec, t_ctl, s, alpha, beta, hess, out):
    """Right-hand side of the augmented discretization ODE.

    Layout of ``y`` per row: x(6), Phi(36), Bbar(18), Cbar(18), dbar(6),
    ebar(6) and, when ``hess`` is given, Lambda(216).

    Phi' = A Phi, Bbar' = A Bbar + B alpha, Cbar' = A Cbar + B beta,
    dbar' = A dbar + d, ebar' = A ebar + e with
    e = f - A x - B T - d s, and Lambda' = H:Phi:Phi + A Lambda.
    """
    n = y.shape[0]
    x = y[:, :N_X]
    out[:, :N_X] = f_vec
    phi = y[:, OFF_PHI:OFF_B].reshape(n, 6, 6)
    out[:, OFF_PHI:OFF_B] = (a_mat @ phi).reshape(n, 36)
    bb = y[:, OFF_B:OFF_C].reshape(n, 6, 3)
    out[:, OFF_B:OFF_C] = (a_mat @ bb + b_mat * alpha[:, None, None]).reshape(n, 18)
    cb = y[:, OFF_C:OFF_D].reshape(n, 6, 3)
    out[:, OFF_C:OFF_D] = (a_mat @ cb + b_mat * beta[:, None, None]).reshape(n, 18)
    db = y[:, OFF_D:OFF_E]
    out[:, OFF_D:OFF_E] = (a_mat @ db[:, :, None])[:, :, 0] + d_vec
    eb = y[:, OFF_E:N_DISC]
    e_vec = (
        f_vec
        - (a_mat @ x[:, :, None])[:, :, 0]
        - (b_mat @ t_ctl[:, :, None])[:, :, 0]
        - d_vec * s[:, None]
    )
    out[:, OFF_E:N_DISC] = (a_mat @ eb[:, :, None])[:, :, 0] + e_vec
    if hess is not None:
        lam = y[:, N_DISC:N_DISC + N_STT].reshape(n, 6, 6, 6)
        out[:, N_DISC:N_DISC + N_STT] = stt_dot(a_mat, hess, phi, lam).reshape(n, N_STT)


def stt_rhs(y, f_vec, a_mat, hess, out):
    """Right-hand side for state + STM + STT (layout x(6), Phi(36), Lambda(216))."""
    n = y.shape[0]
    out[:, :N_X] = f_vec
    phi = y[:, 6:42].reshape(n, 6, 6)
    out[:, 6:42] = (a_mat @ phi).reshape(n, 36)
    lam = y[:, 42:258].reshape(n, 6, 6, 6)
    out[:, 42:258] = stt_dot(a_mat, hess, phi, lam).reshape(n, N_STT)


def stt_dot(a_mat, hess, phi, lam):
    """Lambda'_{IJK} = H_{IDE} Phi_{EK} Phi_{DJ} + A_{ID} Lambda_{DJK}, batched."""
    n = a_mat.shape[0]
    # (H_{I D E} Phi_{E K}) -> T_{I D K}; then Phi_{D J} T_{I D K} -> (I J K)
    hp = hess.reshape(n, 36, 6) @ phi
    hp = hp.reshape(n, 6, 6, 6)
    first = np.swapaxes(phi, 1, 2)[:, None, :, :] @ hp
    second = (a_mat @ lam.reshape(n, 6, 36)).reshape(n, 6, 6, 6)
    return first + second
