"""Reference computations that share no code with the package under test."""

from __future__ import annotations

import cmath
import math

import numpy as np

C = 299792458.0


def two_ray_power(pi, pj, carrier_hz=60e9, gamma=-1.0):
    """|h|^2 by summing the two complex phasors directly (image at z -> -z)."""
    pi = [float(v) for v in pi]
    pj = [float(v) for v in pj]
    d1 = math.dist(pi, pj)
    d2 = math.dist(pi, [pj[0], pj[1], -pj[2]])
    k = 2 * math.pi * carrier_hz / C
    h = cmath.exp(-1j * k * d1) / d1 + gamma * cmath.exp(-1j * k * d2) / d2
    return abs(h) ** 2


def hybrid_gain(dpsi, n_ula=16.0, fov=math.radians(60), kappa=1.3, hpbw=math.radians(6.4)):
    """Electronic steering clipped to the FoV, Gaussian roll-off on the remainder."""
    dpsi = math.remainder(dpsi, 2 * math.pi)
    sigma = hpbw / math.sqrt(8 * math.log(2))
    elec = max(-fov, min(fov, dpsi))
    res = dpsi - elec
    return n_ula * math.cos(elec) ** kappa * math.exp(-0.5 * (res / sigma) ** 2)


def central_diff(f, x, h):
    """Central-difference gradient of a scalar function of a vector."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def rel_err(a, b, floor=1e-12):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), floor))


def lq_tracking_solution(x0, refs, q_pos, r_diag, Ts):
    """Unconstrained minimiser of sum_k |p(k+1) - r_k|_Q^2 + u_k' R u_k.

    Built from the state-space matrices by repeated multiplication; the yaw rate
    only meets its own weight, so its optimum is zero.
    """
    N = len(refs)
    A = np.eye(6)
    A[0:3, 3:6] = Ts * np.eye(3)
    B = np.vstack([0.5 * Ts**2 * np.eye(3), Ts * np.eye(3)])
    Cp = np.hstack([np.eye(3), np.zeros((3, 3))])
    # p(k+1) = Cp A^(k+1) x0 + sum_{j<=k} Cp A^(k-j) B u_j
    S = np.zeros((3 * N, 3 * N))
    free = np.zeros(3 * N)
    x = np.asarray(x0[:6], dtype=float)
    powers = [np.eye(6)]
    for _ in range(N):
        powers.append(powers[-1] @ A)
    for k in range(N):
        free[3 * k:3 * k + 3] = Cp @ powers[k + 1] @ x
        for j in range(k + 1):
            S[3 * k:3 * k + 3, 3 * j:3 * j + 3] = Cp @ powers[k - j] @ B
    Qbar = np.kron(np.eye(N), q_pos)
    Rbar = np.kron(np.eye(N), np.diag(r_diag[:3]))
    r = np.asarray(refs, dtype=float).reshape(-1)
    H = S.T @ Qbar @ S + Rbar
    acc = np.linalg.solve(H, -S.T @ Qbar @ (free - r))
    U = np.zeros((N, 4))
    U[:, :3] = acc.reshape(N, 3)
    return U


def ball_average(f, p, eps, n=40):
    """Uniform-ball mean of f around p by a product midpoint rule in (r^3, cos t, phi).

    Substituting u = r^3 makes the radial Jacobian constant, so every node has
    equal weight. Independent of the package's own (r, cos t, phi) rule.
    """
    u = (np.arange(n) + 0.5) / n
    r = u ** (1.0 / 3.0)
    mu = -1 + 2 * (np.arange(n) + 0.5) / n
    phi = 2 * np.pi * (np.arange(n) + 0.5) / n
    R, M, P = np.meshgrid(r, mu, phi, indexing="ij")
    s = np.sqrt(1 - M**2)
    pts = np.stack([R * s * np.cos(P), R * s * np.sin(P), R * M], -1).reshape(-1, 3)
    return float(np.mean(f(np.asarray(p) + eps * pts)))


def surrogate_capacity_mp(pi, yaw, neighbors, eps, carrier_hz=60e9, bandwidth=2.16e9, snr0=91.6529,
                          n_ula=16, fov_deg=60, kappa=1.3, hpbw_deg=6.4, gamma=-1, dps=40):
    """Sum over links of W log2(1 + snr0 * mean|h|^2 * mean G) at high precision.

    Means are over the centre and the six points +-eps along each axis.
    """
    import mpmath as mp

    with mp.workdps(dps):
        k = 2 * mp.pi * mp.mpf(carrier_hz) / C
        fov = mp.radians(fov_deg)
        sigma = mp.radians(hpbw_deg) / (2 * mp.sqrt(2 * mp.log(2)))
        pi = [mp.mpf(v) for v in pi]
        yaw = mp.mpf(yaw)
        eps = mp.mpf(eps)
        offs = [(0, 0, 0)]
        for a in range(3):
            for s in (1, -1):
                o = [0, 0, 0]
                o[a] = s * eps
                offs.append(tuple(o))
        total = mp.mpf(0)
        for pj in neighbors:
            pj = [mp.mpf(v) for v in pj]
            pw = mp.mpf(0)
            gn = mp.mpf(0)
            for o in offs:
                q = [pi[a] + o[a] for a in range(3)]
                d1 = mp.sqrt(sum((q[a] - pj[a]) ** 2 for a in range(3)))
                d2 = mp.sqrt((q[0] - pj[0]) ** 2 + (q[1] - pj[1]) ** 2 + (q[2] + pj[2]) ** 2)
                h = mp.expj(-k * d1) / d1 + gamma * mp.expj(-k * d2) / d2
                pw += abs(h) ** 2
                dpsi = mp.atan2(pj[1] - q[1], pj[0] - q[0]) - yaw
                dpsi = dpsi - 2 * mp.pi * mp.floor((dpsi + mp.pi) / (2 * mp.pi))
                elec = max(-fov, min(fov, dpsi))
                res = dpsi - elec
                gn += n_ula * mp.cos(elec) ** kappa * mp.exp(-res**2 / (2 * sigma**2))
            snr = snr0 * (pw / 7) * (gn / 7)
            total += bandwidth * mp.log(1 + snr) / mp.log(2)
        return total


def central_diff_mp(f, x, h=1e-12, dps=40):
    """Central difference of an mpmath-valued function; returns float64."""
    import mpmath as mp

    with mp.workdps(dps):
        out = []
        for i in range(len(x)):
            xp = [mp.mpf(v) for v in x]
            xm = list(xp)
            xp[i] += h
            xm[i] -= h
            out.append(float((f(xp) - f(xm)) / (2 * mp.mpf(h))))
    return np.array(out)
