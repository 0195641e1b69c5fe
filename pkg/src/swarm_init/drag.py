"""Drag forcing under tip-off spin and the drift-center increments it induces.

A spinning cube presents an along-track area proportional to
``|cos(nu t + phi)| + |sin(nu t + phi)|``.  Its Fourier series has a DC term
and the harmonics ``4 m nu`` only.  The DC part is common to identical
satellites and cancels in relative coordinates, so only the harmonics feed
the increments ``(C1_air, C4_air)``.

The closed-form particular solutions in :func:`forced_particular_solution`
solve the forced in-plane system

    xbar'' - (2 w + beta) ybar' - (3 w^2 + alpha) xbar = 0
    ybar'' + 2 w xbar'                                  = -c_minus * F_air(t)

exactly, including the slight shift of the natural frequency that the J2
terms ``alpha, beta`` introduce.  They serve as the oracle that the
production increments are checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ResonantSpin, ZeroSpinRate
from .orbit import DriftCenterState, OrbitModel

RESONANCE_TOL = 1e-3


def harmonic_ratio(m: int) -> Fraction:
    """Exact decay ratio ``1 / (16 m^2 - 1)`` of the m-th forcing harmonic."""
    return Fraction(1, 16 * m * m - 1)


def tipoff_spin_rate(dv: float, d_off: float, ell: float) -> float:
    """Spin rate of a cube (inertia ``m ell^2 / 6``) after an impulse ``dv``
    whose line of action misses the center of mass by ``d_off``."""
    return 6.0 * dv * d_off / ell**2


def drag_constant(rho: float, c_d: float, v_rel: float) -> float:
    """``k_air = rho * C_d * v_rel^2`` so that ``F_air`` is the usual ``0.5 rho C_d (A/m) v^2``."""
    return rho * c_d * v_rel**2


@dataclass(frozen=True)
class DragForcing:
    k_air: float
    a: float
    m_sat: float
    nu: float
    phi: float
    M_trunc: int
    F_ref: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "F_ref", 8.0 / math.pi**2 * self.k_air * self.a**2 / self.m_sat)

    @property
    def F_DC(self) -> float:
        return 0.25 * math.pi * self.F_ref

    @property
    def orders(self) -> np.ndarray:
        return np.arange(1, self.M_trunc + 1)

    @property
    def Fhat(self) -> np.ndarray:
        m = self.orders
        return 0.5 * math.pi * self.F_ref / (16.0 * m**2 - 1.0)

    @property
    def nu_m(self) -> np.ndarray:
        return 4.0 * self.orders * self.nu

    @property
    def psi_m(self) -> np.ndarray:
        return 4.0 * self.orders * self.phi

    def series(self, t, harmonics_only: bool = False) -> np.ndarray:
        """Truncated Fourier series of the forcing at times ``t``."""
        t = np.asarray(t, dtype=float)
        h = -np.tensordot(np.cos(np.multiply.outer(t, self.nu_m) + self.psi_m), self.Fhat, axes=1)
        return h if harmonics_only else h + self.F_DC

    def exact(self, t) -> np.ndarray:
        th = self.nu * np.asarray(t, dtype=float) + self.phi
        return 0.5 * self.k_air * self.a**2 / self.m_sat * (np.abs(np.cos(th)) + np.abs(np.sin(th)))


def forcing_series(k_air: float, a: float, m_sat: float, nu: float, phi: float, M_trunc: int = 5) -> DragForcing:
    if m_sat <= 0 or a < 0:
        raise ValueError("need a >= 0 and m_sat > 0")
    if M_trunc < 1:
        raise ValueError("M_trunc must be >= 1")
    if nu == 0.0:
        raise ZeroSpinRate("spin rate is zero; harmonic increments are undefined")
    return DragForcing(k_air=k_air, a=a, m_sat=m_sat, nu=nu, phi=phi, M_trunc=int(M_trunc))


@dataclass(frozen=True)
class DragIncrements:
    C1_air: float
    C4_air: float


def check_nonresonant(model: OrbitModel, f: DragForcing, resonance_tol: float = RESONANCE_TOL) -> None:
    gap = np.abs(np.abs(f.nu_m) - model.omega_xy)
    if np.any(gap < resonance_tol * model.omega_xy):
        m = int(f.orders[np.argmin(gap)])
        raise ResonantSpin(f"harmonic m={m} (nu_m={f.nu_m[m - 1]:.6g}) within tolerance of omega_xy={model.omega_xy:.6g}")


def drag_increments(model: OrbitModel, f: DragForcing, resonance_tol: float = RESONANCE_TOL) -> DragIncrements:
    """Secular drift-center increments from the nonresonant drag harmonics.

    ``C1_air`` is the constant radial offset and ``-(eps2/2) C1_air`` the
    along-track drift rate; ``(eps2/2) C4_air`` is the along-track offset.
    Both carry the gain ``c_minus * Gamma`` of the forced response.
    """
    check_nonresonant(model, f, resonance_tol)
    gain = -model.c_minus * model.Gamma
    nu_m = f.nu_m
    c1 = gain * float(np.sum(f.Fhat * np.sin(f.psi_m) / nu_m))
    c4 = gain * float(np.sum(f.Fhat * np.cos(f.psi_m) / nu_m**2))
    return DragIncrements(C1_air=c1, C4_air=c4)


def corrected_drift_center(model: OrbitModel, base: DriftCenterState, inc: DragIncrements) -> DriftCenterState:
    return DriftCenterState(
        C1p=base.C1p + 0.5 * inc.C1_air,
        C4p=base.C4p + 0.5 * model.epsilon_2 * inc.C4_air,
    )


def increment_drift(model: OrbitModel, inc: DragIncrements, t) -> tuple[np.ndarray, np.ndarray]:
    """Secular ``(xbar, ybar)`` implied by the increments at times ``t``."""
    t = np.asarray(t, dtype=float)
    e = 0.5 * model.epsilon_2
    return np.full_like(t, inc.C1_air), e * inc.C4_air - e * inc.C1_air * t


# -- verification oracle ------------------------------------------------------------

@dataclass(frozen=True)
class PlaneConstants:
    omega: float
    alpha: float
    beta_coeff: float

    @property
    def g(self) -> float:
        return 2.0 * self.omega + self.beta_coeff

    @property
    def K(self) -> float:
        return 3.0 * self.omega**2 + self.alpha

    @property
    def Omega(self) -> float:
        """True natural frequency of the forced system."""
        return math.sqrt(2.0 * self.omega * self.g - self.K)


def plane_constants(model: OrbitModel) -> PlaneConstants:
    w, s, cm = model.omega_xy, model.s_J2, model.c_minus
    return PlaneConstants(omega=w, alpha=4.0 * w**2 * s / cm**2, beta_coeff=4.0 * w * s / cm**2)


@dataclass(frozen=True)
class ForcedResponse:
    t: np.ndarray
    xbar: np.ndarray
    ybar: np.ndarray
    alpha: float
    beta_coeff: float


def dc_response(pc: PlaneConstants, u0: float, t) -> tuple[np.ndarray, np.ndarray]:
    """Zero-state response to a constant along-track input ``u0``."""
    t = np.asarray(t, dtype=float)
    W, K, g = pc.Omega, pc.K, pc.g
    x = g * u0 / W**2 * (t - np.sin(W * t) / W)
    y = u0 * (-0.5 * K / W**2 * t**2 + (K + W**2) / W**4 * (1.0 - np.cos(W * t)))
    return x, y


def harmonic_response(pc: PlaneConstants, amp: float, nu: float, psi: float, t,
                      resonance_rtol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Zero-state response to ``amp * cos(nu t + psi)`` on the along-track channel.

    Uses the resonant branch when ``nu`` equals the natural frequency to
    within ``resonance_rtol``.
    """
    t = np.asarray(t, dtype=float)
    W, K, g, w = pc.Omega, pc.K, pc.g, pc.omega
    cps, sps = math.cos(psi), math.sin(psi)
    cW, sW = np.cos(W * t), np.sin(W * t)
    if abs(nu - W) <= resonance_rtol * W:
        x = (amp * g / (2 * W**2) * t * (-cps * cW + sps * sW)
             - amp * sps * g / W**3
             + amp * g / W**3 * (sps * cW + 0.5 * cps * sW))
        y = (amp * g * w / W**3 * t * (sps * cW + cps * sW)
             + amp * K * cps / W**4 * (cW - 1.0)
             - amp * sps * (3 * K + W**2) / (2 * W**4) * sW
             + amp * K * sps / W**3 * t)
        return x, y
    th = nu * t + psi
    d = W**2 - nu**2
    b = amp * g / (nu * d)
    c = amp * (nu**2 + K) / (nu**2 * d)
    c0 = -amp * g * sps / (nu * W**2)
    A = -c0 - b * sps
    B = -b * nu * cps / W
    d0 = -amp * K * cps / (W**2 * nu**2)
    x = c0 + A * cW + B * sW + b * np.sin(th)
    y = d0 - K * c0 / g * t - (2 * w / W) * (A * sW - B * cW) + c * np.cos(th)
    return x, y


def forced_particular_solution(model: OrbitModel, f: DragForcing, t_grid,
                               include_dc: bool = True) -> ForcedResponse:
    """Superposed closed-form response to the truncated drag series."""
    pc = plane_constants(model)
    t = np.asarray(t_grid, dtype=float)
    x = np.zeros_like(t)
    y = np.zeros_like(t)
    cm = model.c_minus
    if include_dc:
        dx, dy = dc_response(pc, -cm * f.F_DC, t)
        x += dx
        y += dy
    # harmonic part of F_air is -Fhat cos(.), and the input is -c_minus * F_air
    for fh, nu, psi in zip(f.Fhat, f.nu_m, f.psi_m):
        hx, hy = harmonic_response(pc, cm * fh, float(nu), float(psi), t)
        x += hx
        y += hy
    return ForcedResponse(t=t, xbar=x, ybar=y, alpha=pc.alpha, beta_coeff=pc.beta_coeff)


def integrate_forced(model: OrbitModel, forcings, t_end: float, step: float = 0.1,
                     harmonics_only: bool = False, sample_every: int = 1):
    """Fixed-step RK4 integration of the forced in-plane system from rest.

    ``forcings`` is a sequence of :class:`DragForcing`; all are integrated
    together as one batch.  Returns ``(t, xbar, ybar)`` with arrays of shape
    ``(n_samples, batch)``.
    """
    pc = plane_constants(model)
    g, K, w = pc.g, pc.K, pc.omega
    cm = model.c_minus
    n = int(round(t_end / step))
    h = t_end / n
    fs = list(forcings)
    nb = len(fs)
    # stack the harmonics of every forcing so one vectorised cos() evaluates all
    nu = np.stack([f.nu_m for f in fs])
    psi = np.stack([f.psi_m for f in fs])
    fhat = np.stack([f.Fhat for f in fs])
    fdc = np.array([0.0 if harmonics_only else f.F_DC for f in fs])

    def u(tt):
        return -cm * (fdc - np.sum(fhat * np.cos(nu * tt + psi), axis=1))

    def rhs(tt, z):
        x, xd, y, yd = z
        return np.stack([xd, g * yd + K * x, yd, -2.0 * w * xd + u(tt)])

    z = np.zeros((4, nb))
    ts, xs, ys = [0.0], [z[0].copy()], [z[2].copy()]
    for i in range(n):
        tt = i * h
        k1 = rhs(tt, z)
        k2 = rhs(tt + 0.5 * h, z + 0.5 * h * k1)
        k3 = rhs(tt + 0.5 * h, z + 0.5 * h * k2)
        k4 = rhs(tt + h, z + h * k3)
        z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if (i + 1) % sample_every == 0:
            ts.append((i + 1) * h)
            xs.append(z[0].copy())
            ys.append(z[2].copy())
    return np.array(ts), np.array(xs), np.array(ys)
