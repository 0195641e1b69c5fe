import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from conftest import ALT, INC, MU, R_E, reference_model
from swarm_init.drag import plane_constants
from swarm_init.errors import InvalidRegime
from swarm_init.orbit import (J2_EARTH, DriftCenterState, InPlaneElements, InPlaneState, derive_coefficients,
                              drift_center_at, elements_from_state, free_drift_transition, k_j2_from_j2)


def test_table1_coefficients(model):
    # independent evaluation of the mean-J2 parameter
    r = R_E + ALT
    s = 3 * J2_EARTH * R_E**2 / (8 * r**2) * (1 + 3 * math.cos(2 * INC))
    n = math.sqrt(MU / r**3)
    assert math.isclose(model.s_J2, s, rel_tol=1e-12)
    assert math.isclose(model.s_J2, 1.0954e-4, rel_tol=1e-4)
    assert math.isclose(model.omega_xy, n * math.sqrt(1 - s), rel_tol=1e-12)
    assert math.isclose(model.omega_xy, 1.13391e-3, rel_tol=1e-5)
    assert math.isclose(model.epsilon_2, 3.40236e-3, rel_tol=1e-5)
    assert math.isclose(model.k_0, 1763.997, rel_tol=1e-6)
    assert model.Gamma == model.k_0


def test_no_j2_limit():
    m = derive_coefficients(MU, R_E + ALT, INC, 0.0)
    n = math.sqrt(MU / (R_E + ALT) ** 3)
    assert m.c_plus == m.c_minus == 1.0
    assert math.isclose(m.epsilon_2, 3 * n, rel_tol=1e-14)
    assert math.isclose(m.k_0, 2 / n, rel_tol=1e-14)


def test_invalid_regime():
    with pytest.raises(InvalidRegime):
        derive_coefficients(MU, 1.0, 0.0, k_j2_from_j2(J2_EARTH, MU, R_E))
    with pytest.raises(ValueError):
        derive_coefficients(-1.0, R_E, 0.0, 0.0)


def test_psi_semigroup_and_inverse(model):
    for t1, t2 in [(1.0, 2.0), (4.0, 8.0), (-3.0, 7.5)]:
        assert np.allclose(free_drift_transition(model, t1) @ free_drift_transition(model, t2),
                           free_drift_transition(model, t1 + t2), atol=1e-15)
    assert np.array_equal(free_drift_transition(model, 0.0), np.eye(2))
    assert np.allclose(free_drift_transition(model, 5.0) @ free_drift_transition(model, -5.0), np.eye(2))


def test_drift_center_transition_matches_position(model):
    dc = DriftCenterState(C1p=0.7, C4p=-1.2)
    for t in (0.0, 3.0, 100.0):
        assert np.allclose(free_drift_transition(model, t) @ dc.vector(), drift_center_at(model, dc, t))
    assert DriftCenterState.from_vector(dc.vector()) == dc
    assert DriftCenterState.from_elements(InPlaneElements(0.7, -1.2, 0.0, 0.0)) == dc


def test_elements_zero_state(model):
    el = elements_from_state(model, InPlaneState())
    assert el == InPlaneElements(0.0, 0.0, 0.0, 0.0)


def test_elements_are_linear(model):
    a, b = InPlaneState(0.1, 0.2, 1e-3, -2e-3), InPlaneState(-0.3, 0.05, 4e-4, 1e-3)
    s = InPlaneState(a.x + b.x, a.y + b.y, a.xdot + b.xdot, a.ydot + b.ydot)
    ea, eb, es = (elements_from_state(model, v) for v in (a, b, s))
    for f in ("C1", "C2", "C3", "C4"):
        assert math.isclose(getattr(es, f), getattr(ea, f) + getattr(eb, f), rel_tol=1e-12, abs_tol=1e-15)


def test_drift_center_against_integration():
    """Mean radial offset and along-track drift rate of the integrated motion."""
    m = reference_model()
    pc = plane_constants(m)
    s = InPlaneState(0.3, -0.2, 0.001, 0.001)
    el = elements_from_state(m, s)
    z0 = [m.c_plus * s.x, m.c_plus * s.xdot, m.c_minus * s.y, m.c_minus * s.ydot]

    def f(t, z):
        return [z[1], pc.g * z[3] + pc.K * z[0], z[3], -2 * pc.omega * z[1]]

    T = 3 * m.period
    sol = solve_ivp(f, (0, T), z0, rtol=1e-12, atol=1e-14, dense_output=True)
    t = np.linspace(0, T, 20001)
    xb, _, yb, _ = sol.sol(t)
    basis = np.column_stack([np.ones_like(t), t, np.cos(pc.Omega * t), np.sin(pc.Omega * t)])
    cx = np.linalg.lstsq(basis, xb / m.c_plus, rcond=None)[0]
    cy = np.linalg.lstsq(basis, yb / m.c_minus, rcond=None)[0]
    # agreement is limited by O(s_J2) differences between the averaged model and the exact plane
    assert math.isclose(cx[0], 2 * el.C1, rel_tol=1e-3)
    assert math.isclose(cy[0], el.C4, rel_tol=1e-3)
    assert math.isclose(cy[1], -m.epsilon_2 * el.C1, rel_tol=1e-3)
