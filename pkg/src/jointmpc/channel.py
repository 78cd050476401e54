"""Two-ray ground-reflection channel between two airborne agents.

The reflected path is built with the ground-image method: the receiver is
mirrored through the ``z = 0`` plane and the reflected path length is the
distance from the transmitter to that image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299792458.0


def hpbw_to_sigma(hpbw_rad: float) -> float:
    """Gaussian standard deviation whose half-power width equals ``hpbw_rad``."""
    return hpbw_rad / (2.0 * math.sqrt(2.0 * math.log(2.0)))


@dataclass(frozen=True)
class LinkBudget:
    carrier_hz: float = 60e9
    bandwidth_hz: float = 2.16e9
    n_ula: float = 16.0
    hpbw_rad: float = math.radians(6.4)
    fov_rad: float = math.radians(60.0)
    kappa: float = 1.3
    snr0: float = 91.6529
    gamma_refl: float = -1.0
    wavelength_m: float = field(init=False)
    sigma_rad: float = field(init=False)

    def __post_init__(self):
        if not self.carrier_hz > 0:
            raise ValueError("link.carrier_hz must be > 0")
        if not self.bandwidth_hz > 0:
            raise ValueError("link.bandwidth_hz must be > 0")
        if not self.n_ula >= 1:
            raise ValueError("link.n_ula must be >= 1")
        if not self.hpbw_rad > 0:
            raise ValueError("link.hpbw_rad must be > 0")
        if not (0 < self.fov_rad <= math.pi / 2):
            raise ValueError("link.fov_rad must lie in (0, pi/2]")
        if not self.kappa > 0:
            raise ValueError("link.kappa must be > 0")
        if not self.snr0 > 0:
            raise ValueError("link.snr0 must be > 0")
        object.__setattr__(self, "wavelength_m", SPEED_OF_LIGHT / self.carrier_hz)
        object.__setattr__(self, "sigma_rad", hpbw_to_sigma(self.hpbw_rad))


@dataclass(frozen=True)
class LinkGeometry:
    d_los: float
    d_ref: float
    grazing_angle: float
    horizontal_dist: float


def _mirror(p: np.ndarray) -> np.ndarray:
    return np.array([p[0], p[1], -p[2]])


def link_geometry(pi, pj) -> LinkGeometry:
    pi = np.asarray(pi, dtype=float)
    pj = np.asarray(pj, dtype=float)
    if pi[2] <= 0 or pj[2] <= 0:
        raise ValueError("link_geometry requires strictly positive altitudes")
    d_los = float(np.linalg.norm(pi - pj))
    if d_los == 0.0:
        raise ValueError("link_geometry requires distinct positions")
    d_ref = float(np.linalg.norm(pi - _mirror(pj)))
    horizontal = float(math.hypot(pi[0] - pj[0], pi[1] - pj[1]))
    if horizontal == 0.0:
        grazing = math.pi / 2
    else:
        grazing = math.atan((pi[2] + pj[2]) / horizontal)
    return LinkGeometry(d_los, d_ref, grazing, horizontal)


def _distances(pi, pj):
    pi = np.asarray(pi, dtype=float)
    pj = np.asarray(pj, dtype=float)
    los = pi - pj
    ref = pi - _mirror(pj)
    d1 = float(np.linalg.norm(los))
    d2 = float(np.linalg.norm(ref))
    if d1 == 0.0:
        raise ValueError("channel undefined for coincident positions")
    return los, ref, d1, d2


def channel_gain(pi, pj, budget: LinkBudget) -> complex:
    """Complex baseband gain of the LoS ray plus the ground-reflected ray."""
    _, _, d1, d2 = _distances(pi, pj)
    k = 2.0 * math.pi / budget.wavelength_m
    # reduce phases modulo 2*pi before exp() to keep precision at ~1e4 rad
    ph1 = math.fmod(k * d1, 2.0 * math.pi)
    ph2 = math.fmod(k * d2, 2.0 * math.pi)
    return complex(np.exp(-1j * ph1) / d1 + budget.gamma_refl * np.exp(-1j * ph2) / d2)


def channel_power(pi, pj, budget: LinkBudget) -> float:
    """``|h|^2`` in closed form (avoids the cancellation of summing complex phasors)."""
    _, _, d1, d2 = _distances(pi, pj)
    g = budget.gamma_refl
    k = 2.0 * math.pi / budget.wavelength_m
    return 1.0 / d1**2 + g * g / d2**2 + 2.0 * g * math.cos(k * (d2 - d1)) / (d1 * d2)


def channel_power_gradient(pi, pj, budget: LinkBudget) -> np.ndarray:
    """Analytic gradient of ``|h|^2`` with respect to ``pi``."""
    los, ref, d1, d2 = _distances(pi, pj)
    g = budget.gamma_refl
    k = 2.0 * math.pi / budget.wavelength_m
    c = math.cos(k * (d2 - d1))
    s = math.sin(k * (d2 - d1))
    dP_dd1 = -2.0 / d1**3 + 2.0 * g * (k * s / (d1 * d2) - c / (d1 * d1 * d2))
    dP_dd2 = -2.0 * g * g / d2**3 + 2.0 * g * (-k * s / (d1 * d2) - c / (d1 * d2 * d2))
    return dP_dd1 * los / d1 + dP_dd2 * ref / d2
