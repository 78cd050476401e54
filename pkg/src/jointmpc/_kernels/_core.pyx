# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: smoothed link surrogate, barrier, and the horizon adjoint.

Signatures and the ``consts`` layout match :mod:`jointmpc._kernels._fallback`.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, cos, sin, tan, exp, atan2, fmod, log, pow, fabs, M_PI

cnp.import_array()

cdef enum:
    TS = 0
    W_COMM = 1
    W_SAFE = 2
    MU = 3
    D_MIN = 4
    WAVENUMBER = 5
    GAMMA = 6
    SNR0 = 7
    BANDWIDTH = 8
    N_ULA = 9
    KAPPA = 10
    SIGMA = 11
    FOV = 12

cdef double BARRIER_FLOOR = 1e-6
cdef double LN2 = 0.6931471805599453


cdef inline double _wrap(double a) nogil:
    cdef double w = fmod(a + M_PI, 2.0 * M_PI)
    if w <= 0.0:
        w += 2.0 * M_PI
    return w - M_PI


cdef void _comm_stage(double px, double py, double pz, double yaw,
                      const double[:, :] nbr, const double[:] c, const double[:, :] offs,
                      double* value, double* gx, double* gy, double* gz, double* gyaw) noexcept nogil:
    """Accumulate surrogate capacity and gradient for one stage over all neighbours."""
    cdef Py_ssize_t J = nbr.shape[0]
    cdef Py_ssize_t M = offs.shape[0]
    cdef Py_ssize_t j, m
    cdef double k = c[WAVENUMBER], g = c[GAMMA], sig2 = c[SIGMA] * c[SIGMA]
    cdef double fov = c[FOV], kappa = c[KAPPA], n_ula = c[N_ULA]
    cdef double snr0 = c[SNR0], W = c[BANDWIDTH]
    cdef double qx, qy, qz, lx, ly, lz, rz, d1, d2, ph, cs, sn, dP1, dP2, a1, a2
    cdef double dx, dy, r2, dpsi, elec, res, gain, slope
    cdef double pbar, gbar, dpx, dpy, dpz, dgx, dgy, dgyaw, snr, w, inv_m
    inv_m = 1.0 / M
    for j in range(J):
        pbar = 0.0; gbar = 0.0
        dpx = 0.0; dpy = 0.0; dpz = 0.0
        dgx = 0.0; dgy = 0.0; dgyaw = 0.0
        for m in range(M):
            qx = px + offs[m, 0]
            qy = py + offs[m, 1]
            qz = pz + offs[m, 2]
            lx = qx - nbr[j, 0]
            ly = qy - nbr[j, 1]
            lz = qz - nbr[j, 2]
            rz = qz + nbr[j, 2]
            d1 = sqrt(lx * lx + ly * ly + lz * lz)
            d2 = sqrt(lx * lx + ly * ly + rz * rz)
            ph = k * (d2 - d1)
            cs = cos(ph)
            sn = sin(ph)
            pbar += 1.0 / (d1 * d1) + g * g / (d2 * d2) + 2.0 * g * cs / (d1 * d2)
            dP1 = -2.0 / (d1 * d1 * d1) + 2.0 * g * (k * sn / (d1 * d2) - cs / (d1 * d1 * d2))
            dP2 = -2.0 * g * g / (d2 * d2 * d2) + 2.0 * g * (-k * sn / (d1 * d2) - cs / (d1 * d2 * d2))
            a1 = dP1 / d1
            a2 = dP2 / d2
            dpx += a1 * lx + a2 * lx
            dpy += a1 * ly + a2 * ly
            dpz += a1 * lz + a2 * rz

            dx = -lx
            dy = -ly
            r2 = dx * dx + dy * dy
            dpsi = _wrap(atan2(dy, dx) - yaw)
            if dpsi > fov:
                elec = fov
            elif dpsi < -fov:
                elec = -fov
            else:
                elec = dpsi
            res = dpsi - elec
            gain = n_ula * pow(cos(elec), kappa) * exp(-res * res / (2.0 * sig2))
            gbar += gain
            if r2 > 0.0:
                if fabs(dpsi) <= fov:
                    slope = -kappa * tan(elec) * gain
                else:
                    slope = -res / sig2 * gain
                dgx += slope * dy / r2
                dgy += -slope * dx / r2
                dgyaw += -slope
        pbar *= inv_m; gbar *= inv_m
        dpx *= inv_m; dpy *= inv_m; dpz *= inv_m
        dgx *= inv_m; dgy *= inv_m; dgyaw *= inv_m
        snr = snr0 * pbar * gbar
        value[0] += W * log(1.0 + snr) / LN2
        w = W / LN2 / (1.0 + snr) * snr0
        gx[0] += w * (gbar * dpx + pbar * dgx)
        gy[0] += w * (gbar * dpy + pbar * dgy)
        gz[0] += w * (gbar * dpz)
        gyaw[0] += w * pbar * dgyaw


def comm_value_grad(const double[:, :] pos, const double[:] yaw, const double[:, :, :] nbr,
                    const double[:] consts, const double[:, :] offsets):
    cdef Py_ssize_t K = pos.shape[0], kk
    value = np.zeros(K)
    grad_p = np.zeros((K, 3))
    grad_yaw = np.zeros(K)
    cdef double[:] v = value
    cdef double[:, :] gp = grad_p
    cdef double[:] gy = grad_yaw
    if nbr.shape[1] == 0:
        return value, grad_p, grad_yaw
    with nogil:
        for kk in range(K):
            _comm_stage(pos[kk, 0], pos[kk, 1], pos[kk, 2], yaw[kk], nbr[kk], consts, offsets,
                        &v[kk], &gp[kk, 0], &gp[kk, 1], &gp[kk, 2], &gy[kk])
    return value, grad_p, grad_yaw


cdef double _safety_stage(double px, double py, double pz, const double[:, :] nbr,
                          const double[:] c, double* gx, double* gy, double* gz) noexcept nogil:
    cdef Py_ssize_t j
    cdef double w = c[W_SAFE], total = 0.0, dx, dy, dz, den, dv
    cdef double shift = c[MU] - c[D_MIN] * c[D_MIN]
    for j in range(nbr.shape[0]):
        dx = px - nbr[j, 0]
        dy = py - nbr[j, 1]
        dz = pz - nbr[j, 2]
        den = dx * dx + dy * dy + dz * dz + shift
        if den > BARRIER_FLOOR:
            total += w / den
            dv = -w / (den * den)
        else:
            total += w / BARRIER_FLOOR + w / (BARRIER_FLOOR * BARRIER_FLOOR) * (BARRIER_FLOOR - den)
            dv = -w / (BARRIER_FLOOR * BARRIER_FLOOR)
        gx[0] += 2.0 * dv * dx
        gy[0] += 2.0 * dv * dy
        gz[0] += 2.0 * dv * dz
    return total


def safety_value_grad(const double[:, :] pos, const double[:, :, :] nbr, const double[:] consts):
    cdef Py_ssize_t K = pos.shape[0], kk
    value = np.zeros(K)
    grad = np.zeros((K, 3))
    cdef double[:] v = value
    cdef double[:, :] g = grad
    with nogil:
        for kk in range(K):
            v[kk] = _safety_stage(pos[kk, 0], pos[kk, 1], pos[kk, 2], nbr[kk], consts,
                                  &g[kk, 0], &g[kk, 1], &g[kk, 2])
    return value, grad


def horizon_eval(const double[:] x0, const double[:, :] U, const double[:, :] refs,
                 const double[:, :, :] comm_nbr, const double[:, :, :] safe_nbr,
                 const double[:, :] qpos, const double[:] rdiag, const double[:] consts,
                 const double[:, :] offsets):
    cdef Py_ssize_t N = U.shape[0], k, a, b
    cdef double Ts = consts[TS], wc = consts[W_COMM]
    cdef double px = x0[0], py = x0[1], pz = x0[2]
    cdef double vx = x0[3], vy = x0[4], vz = x0[5], yw = x0[6]
    cdef double f = 0.0, e[3], cv
    cdef bint use_comm = wc != 0.0 and comm_nbr.shape[1] > 0
    grad_arr = np.zeros((N, 4))
    cdef double[:, :] grad = grad_arr
    cdef double[:, :] gp = np.zeros((N, 3))
    cdef double[:] gyaw = np.zeros(N)
    cdef double lam_px = 0.0, lam_py = 0.0, lam_pz = 0.0
    cdef double lam_vx = 0.0, lam_vy = 0.0, lam_vz = 0.0, lam_y = 0.0
    cdef double hTs2 = 0.5 * Ts * Ts
    cdef double cgx, cgy, cgz, cgyaw
    with nogil:
        for k in range(N):
            px += vx * Ts + hTs2 * U[k, 0]
            py += vy * Ts + hTs2 * U[k, 1]
            pz += vz * Ts + hTs2 * U[k, 2]
            vx += Ts * U[k, 0]
            vy += Ts * U[k, 1]
            vz += Ts * U[k, 2]
            yw += Ts * U[k, 3]
            e[0] = px - refs[k, 0]
            e[1] = py - refs[k, 1]
            e[2] = pz - refs[k, 2]
            for a in range(3):
                for b in range(3):
                    f += e[a] * qpos[a, b] * e[b]
                    gp[k, a] += (qpos[a, b] + qpos[b, a]) * e[b]
            for a in range(4):
                f += rdiag[a] * U[k, a] * U[k, a]
                grad[k, a] = 2.0 * rdiag[a] * U[k, a]
            f += _safety_stage(px, py, pz, safe_nbr[k], consts, &gp[k, 0], &gp[k, 1], &gp[k, 2])
            if use_comm:
                cv = 0.0
                cgx = 0.0; cgy = 0.0; cgz = 0.0; cgyaw = 0.0
                _comm_stage(px, py, pz, _wrap(yw), comm_nbr[k], consts, offsets,
                            &cv, &cgx, &cgy, &cgz, &cgyaw)
                f -= wc * cv
                gp[k, 0] -= wc * cgx
                gp[k, 1] -= wc * cgy
                gp[k, 2] -= wc * cgz
                gyaw[k] -= wc * cgyaw
        for k in range(N - 1, -1, -1):
            lam_px += gp[k, 0]
            lam_py += gp[k, 1]
            lam_pz += gp[k, 2]
            lam_y += gyaw[k]
            grad[k, 0] += hTs2 * lam_px + Ts * lam_vx
            grad[k, 1] += hTs2 * lam_py + Ts * lam_vy
            grad[k, 2] += hTs2 * lam_pz + Ts * lam_vz
            grad[k, 3] += Ts * lam_y
            lam_vx += Ts * lam_px
            lam_vy += Ts * lam_py
            lam_vz += Ts * lam_pz
    return f, grad_arr
