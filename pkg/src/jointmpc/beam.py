"""Directional gain of a body-fixed phased array with limited electronic scan.

Angles follow one frame throughout: x east, y north, azimuth measured
counter-clockwise from +x. Yaw uses the same frame, and every angular
difference is wrapped into ``(-pi, pi]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import LinkBudget
from .dynamics import wrap_angle


@dataclass(frozen=True)
class BeamAlignment:
    los_azimuth: float
    mech_misalign: float
    elec_angle: float
    residual: float


def los_azimuth(pi, pj) -> float:
    dx = float(pj[0] - pi[0])
    dy = float(pj[1] - pi[1])
    if dx == 0.0 and dy == 0.0:
        raise ValueError("azimuth undefined for zero horizontal separation")
    return wrap_angle(math.atan2(dy, dx))


def gaussian_gain(yaw: float, azimuth: float, budget: LinkBudget) -> float:
    """Main-lobe Gaussian proxy of the array factor (mechanical pointing only)."""
    err = wrap_angle(yaw - azimuth)
    return budget.n_ula * math.exp(-err * err / (2.0 * budget.sigma_rad**2))


def electronic_steer(mech_misalign: float, budget: LinkBudget) -> float:
    return min(max(mech_misalign, -budget.fov_rad), budget.fov_rad)


def alignment(yaw: float, pi, pj, budget: LinkBudget) -> BeamAlignment:
    phi = los_azimuth(pi, pj)
    dpsi = wrap_angle(phi - yaw)
    elec = electronic_steer(dpsi, budget)
    return BeamAlignment(phi, dpsi, elec, dpsi - elec)


def hybrid_gain(mech_misalign: float, budget: LinkBudget) -> float:
    dpsi = wrap_angle(mech_misalign)
    elec = electronic_steer(dpsi, budget)
    res = dpsi - elec
    return (budget.n_ula * math.cos(elec) ** budget.kappa
            * math.exp(-res * res / (2.0 * budget.sigma_rad**2)))


def hybrid_gain_slope(mech_misalign: float, budget: LinkBudget) -> float:
    """dG/d(misalignment). At ``|dpsi| == fov`` the interior (scan-loss) branch is used."""
    dpsi = wrap_angle(mech_misalign)
    gain = hybrid_gain(dpsi, budget)
    if abs(dpsi) <= budget.fov_rad:
        return -budget.kappa * math.tan(dpsi) * gain
    res = dpsi - math.copysign(budget.fov_rad, dpsi)
    return -res / budget.sigma_rad**2 * gain


def hybrid_gain_gradient(yaw: float, pi, pj, budget: LinkBudget) -> tuple[float, np.ndarray]:
    """Gradient of ``hybrid_gain(wrap(azimuth(pi, pj) - yaw))`` w.r.t. yaw and ``pi``."""
    dx = float(pj[0] - pi[0])
    dy = float(pj[1] - pi[1])
    r2 = dx * dx + dy * dy
    if r2 == 0.0:
        raise ValueError("azimuth undefined for zero horizontal separation")
    dpsi = wrap_angle(math.atan2(dy, dx) - yaw)
    slope = hybrid_gain_slope(dpsi, budget)
    dphi_dpi = np.array([dy / r2, -dx / r2, 0.0])
    return -slope, slope * dphi_dpi


def link_capacity(snr: float, budget: LinkBudget) -> float:
    """Shannon rate in bit/s."""
    if snr < 0:
        raise ValueError(f"snr must be non-negative, got {snr}")
    return budget.bandwidth_hz * math.log2(1.0 + snr)
