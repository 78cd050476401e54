"""Pure numpy implementation of the hot kernels (used when the extension is absent)."""

from __future__ import annotations

import math

import numpy as np

# consts layout shared with the compiled core
TS, W_COMM, W_SAFE, MU, D_MIN, WAVENUMBER, GAMMA, SNR0, BANDWIDTH, N_ULA, KAPPA, SIGMA, FOV = range(13)
N_CONSTS = 13
BARRIER_FLOOR = 1e-6
LN2 = math.log(2.0)


def _wrap(a):
    w = np.mod(a + np.pi, 2.0 * np.pi)
    return np.where(w <= 0.0, w + 2.0 * np.pi, w) - np.pi


def comm_value_grad(pos, yaw, nbr, consts, offsets):
    """Surrogate capacity summed over neighbours, per stage.

    pos (K,3), yaw (K,), nbr (K,J,3), offsets (M,3). Returns value (K,) in bit/s,
    position gradient (K,3) and yaw gradient (K,).
    """
    K = pos.shape[0]
    J = nbr.shape[1]
    if J == 0:
        return np.zeros(K), np.zeros((K, 3)), np.zeros(K)
    k = consts[WAVENUMBER]
    g = consts[GAMMA]
    sig2 = consts[SIGMA] ** 2
    fov = consts[FOV]
    kappa = consts[KAPPA]
    n_ula = consts[N_ULA]
    M = offsets.shape[0]

    q = pos[:, None, None, :] + offsets[None, None, :, :]          # (K,1,M,3)
    nb = nbr[:, :, None, :]                                         # (K,J,1,3)
    los = q - nb                                                    # (K,J,M,3)
    ref = los.copy()
    ref[..., 2] = q[..., 2] + nb[..., 2]
    d1 = np.sqrt(np.einsum("...i,...i->...", los, los))
    d2 = np.sqrt(np.einsum("...i,...i->...", ref, ref))
    phase = k * (d2 - d1)
    c = np.cos(phase)
    s = np.sin(phase)
    power = 1.0 / d1**2 + g * g / d2**2 + 2.0 * g * c / (d1 * d2)
    dP1 = -2.0 / d1**3 + 2.0 * g * (k * s / (d1 * d2) - c / (d1 * d1 * d2))
    dP2 = -2.0 * g * g / d2**3 + 2.0 * g * (-k * s / (d1 * d2) - c / (d1 * d2 * d2))
    dpower = (dP1 / d1)[..., None] * los + (dP2 / d2)[..., None] * ref

    dx = -los[..., 0]
    dy = -los[..., 1]
    r2 = dx * dx + dy * dy
    safe_r2 = np.where(r2 > 0.0, r2, 1.0)
    dpsi = _wrap(np.arctan2(dy, dx) - yaw[:, None, None])
    inside = np.abs(dpsi) <= fov
    elec = np.clip(dpsi, -fov, fov)
    res = dpsi - elec
    gain = n_ula * np.cos(elec) ** kappa * np.exp(-res * res / (2.0 * sig2))
    slope = np.where(inside, -kappa * np.tan(elec), -res / sig2) * gain
    slope = np.where(r2 > 0.0, slope, 0.0)
    dgain = np.stack([slope * dy / safe_r2, -slope * dx / safe_r2, np.zeros_like(slope)], axis=-1)

    p_bar = power.mean(axis=2)                                      # (K,J)
    g_bar = gain.mean(axis=2)
    dp_bar = dpower.mean(axis=2)                                    # (K,J,3)
    dg_bar = dgain.mean(axis=2)
    dg_yaw = -slope.mean(axis=2)

    snr = consts[SNR0] * p_bar * g_bar
    W = consts[BANDWIDTH]
    value = (W * np.log2(1.0 + snr)).sum(axis=1)
    w = W / LN2 / (1.0 + snr) * consts[SNR0]
    grad_p = (w[..., None] * (g_bar[..., None] * dp_bar + p_bar[..., None] * dg_bar)).sum(axis=1)
    grad_yaw = (w * p_bar * dg_yaw).sum(axis=1)
    return value, grad_p, grad_yaw


def safety_value_grad(pos, nbr, consts):
    """Relaxed inverse barrier per stage, with a linear continuation below the floor."""
    K = pos.shape[0]
    if nbr.shape[1] == 0:
        return np.zeros(K), np.zeros((K, 3))
    w = consts[W_SAFE]
    diff = pos[:, None, :] - nbr                                    # (K,J,3)
    den = np.einsum("kji,kji->kj", diff, diff) - consts[D_MIN] ** 2 + consts[MU]
    ok = den > BARRIER_FLOOR
    den_safe = np.where(ok, den, BARRIER_FLOOR)
    val = np.where(ok, w / den_safe, w / BARRIER_FLOOR + w / BARRIER_FLOOR**2 * (BARRIER_FLOOR - den))
    dval_dden = -w / den_safe**2
    grad = (2.0 * dval_dden)[..., None] * diff
    return val.sum(axis=1), grad.sum(axis=1)


def horizon_eval(x0, U, refs, comm_nbr, safe_nbr, qpos, rdiag, consts, offsets):
    """Total horizon cost and its gradient w.r.t. the (N,4) input array.

    Stage ``k`` pairs input ``u(k)`` with the predicted state ``x(k+1)``; the
    gradient is back-propagated through the double integrator by an adjoint
    recursion.
    """
    Ts = consts[TS]
    N = U.shape[0]
    acc = U[:, :3]
    vel = x0[3:6] + Ts * np.cumsum(acc, axis=0)
    vel_prev = np.vstack([x0[3:6], vel[:-1]])
    pos = x0[0:3] + np.cumsum(vel_prev * Ts + 0.5 * acc * Ts * Ts, axis=0)
    yaw = x0[6] + Ts * np.cumsum(U[:, 3])

    err = pos - refs
    qerr = err @ qpos.T
    f = float(np.sum(err * qerr)) + float(np.sum(U * U * rdiag))
    gp = qerr + err @ qpos  # d/dp of err^T Q err (Q need not be symmetric here)
    gy = np.zeros(N)

    sv, sg = safety_value_grad(pos, safe_nbr, consts)
    f += float(sv.sum())
    gp = gp + sg

    if consts[W_COMM] != 0.0 and comm_nbr.shape[1] > 0:
        cv, cg, cy = comm_value_grad(pos, _wrap(yaw), comm_nbr, consts, offsets)
        f -= consts[W_COMM] * float(cv.sum())
        gp = gp - consts[W_COMM] * cg
        gy = gy - consts[W_COMM] * cy

    grad = 2.0 * U * rdiag
    lam_p = np.zeros(3)
    lam_v = np.zeros(3)
    lam_y = 0.0
    for k in range(N - 1, -1, -1):
        lam_p = lam_p + gp[k]
        lam_y = lam_y + gy[k]
        grad[k, :3] += 0.5 * Ts * Ts * lam_p + Ts * lam_v
        grad[k, 3] += Ts * lam_y
        lam_v = lam_v + Ts * lam_p
    return f, grad
