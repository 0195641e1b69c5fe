"""J2-averaged relative-motion coefficients and drift-center kinematics.

Relative motion about the averaged reference orbit splits into a drift center
``[2*C1, C4 - eps2*C1*t]`` plus a bounded ellipse.  Only the in-plane drift
center is modelled here; the out-of-plane channel is not needed by the
planar safety analysis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidRegime

J2_EARTH = 1.0826e-3


def k_j2_from_j2(j2: float, mu_g: float, r_e: float) -> float:
    """Scale constant making ``s_J2`` equal the mean-J2 parameter
    ``(3 J2 Re^2 / 8 r^2)(1 + 3 cos 2i)``."""
    return 1.5 * j2 * mu_g * r_e**2


@dataclass(frozen=True)
class OrbitModel:
    mu_g: float
    r_ref: float
    i_ref: float
    k_J2: float
    s_J2: float
    c_plus: float
    c_minus: float
    omega_xy: float
    epsilon_2: float
    k_0: float
    Gamma: float
    K_eps: float

    @property
    def mean_motion(self) -> float:
        return math.sqrt(self.mu_g / self.r_ref**3)

    @property
    def orbital_speed(self) -> float:
        return self.mean_motion * self.r_ref

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.mean_motion


def derive_coefficients(mu_g: float, r_ref: float, i_ref: float, k_J2: float) -> OrbitModel:
    if mu_g <= 0 or r_ref <= 0:
        raise ValueError("mu_g and r_ref must be positive")
    if not (0.0 <= i_ref <= math.pi):
        raise ValueError("i_ref must lie in [0, pi]")
    s = k_J2 * (1.0 + 3.0 * math.cos(2.0 * i_ref)) / (4.0 * mu_g * r_ref**2)
    if not (-1.0 < s < 1.0):
        raise InvalidRegime(f"s_J2 = {s} outside (-1, 1)")
    cp = math.sqrt(1.0 + s)
    cm = math.sqrt(1.0 - s)
    w = cm * math.sqrt(mu_g / r_ref**3)
    eps2 = (3.0 + 5.0 * s) / (cp * cm) * w
    k0 = 2.0 * cp / (w * cm)
    return OrbitModel(
        mu_g=mu_g, r_ref=r_ref, i_ref=i_ref, k_J2=k_J2, s_J2=s,
        c_plus=cp, c_minus=cm, omega_xy=w, epsilon_2=eps2,
        k_0=k0, Gamma=k0, K_eps=0.5 * eps2 * k0,
    )


@dataclass(frozen=True)
class InPlaneState:
    """Curvilinear LVLH in-plane state: x radial, y along-track [m, m/s]."""

    x: float = 0.0
    y: float = 0.0
    xdot: float = 0.0
    ydot: float = 0.0


@dataclass(frozen=True)
class InPlaneElements:
    C1: float
    C4: float
    C2: float
    C3: float


@dataclass(frozen=True)
class DriftCenterState:
    """Drift center carried as ``(C1p, C4p)``; position is ``[2 C1p, C4p - eps2 C1p t]``."""

    C1p: float
    C4p: float

    def vector(self) -> np.ndarray:
        """The ``[2 C1p, C4p]`` representation acted on by ``Psi(t)``."""
        return np.array([2.0 * self.C1p, self.C4p])

    @classmethod
    def from_vector(cls, v) -> "DriftCenterState":
        return cls(C1p=0.5 * float(v[0]), C4p=float(v[1]))

    @classmethod
    def from_elements(cls, e: InPlaneElements) -> "DriftCenterState":
        return cls(C1p=e.C1, C4p=e.C4)


def elements_from_state(model: OrbitModel, s: InPlaneState) -> InPlaneElements:
    cp, cm, w = model.c_plus, model.c_minus, model.omega_xy
    xb, yb = cp * s.x, cm * s.y
    xbd, ybd = cp * s.xdot, cm * s.ydot
    c1 = cp / cm**2 * (2.0 * xb + ybd / w)
    c4 = (yb - 2.0 * xbd / w) / cm
    return InPlaneElements(C1=c1, C4=c4, C2=0.5 * (yb - cm * c4), C3=xb - 2.0 * cp * c1)


def drift_center_at(model: OrbitModel, dc: DriftCenterState, t: float) -> np.ndarray:
    return np.array([2.0 * dc.C1p, dc.C4p - model.epsilon_2 * dc.C1p * t])


def free_drift_transition(model: OrbitModel, t: float) -> np.ndarray:
    """Drift-center state-transition matrix ``Psi(t)`` on ``[2 C1p, C4p]``."""
    return np.array([[1.0, 0.0], [-0.5 * model.epsilon_2 * t, 1.0]])
