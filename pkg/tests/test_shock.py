import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from reflectlab.errors import DegenerateShockError, DomainError
from reflectlab.gas import GasConstants, ThermoState, pi_fn, sound_speed
from reflectlab.polar import critical_angle, deflection_solve, polar_point
from reflectlab.shock import (
    UpstreamPotential,
    classify_type,
    downstream_from_normal_velocity,
    g_gradient_v,
    g_residual,
    normal_from_jump,
    oblique_shock,
    rot90,
    type_indicator,
    upstream_from_downstream,
)

# oracle value at gamma = 1.4, rho_u = c_u = 1, vn_u = 2 (40-digit bisection)
RHO_D_M2 = 4.0597700475458150803
VN_D_M2 = 0.49263873977518174115


def test_sonic_upstream_is_vanishing():
    c = float(sound_speed(1.0))
    jump = downstream_from_normal_velocity(1.0, c)
    assert jump.vanishing
    assert (jump.rho, jump.vn) == (1.0, c)


def test_normal_shock_against_frozen_oracle():
    jump = downstream_from_normal_velocity(1.0, 2.0, 0.0, GasConstants(1.4))
    assert not jump.vanishing
    assert jump.rho == pytest.approx(RHO_D_M2, rel=1e-13)
    assert jump.vn == pytest.approx(VN_D_M2, rel=1e-13)
    rho, v = oracles.normal_shock(1.4, 1, 2)
    assert float(rho) == pytest.approx(RHO_D_M2, rel=1e-15)


def test_normal_shock_residual():
    g = GasConstants(1.4)
    jump = downstream_from_normal_velocity(1.0, 2.0, 0.0, g)
    mass = 2.0 - jump.rho * jump.vn
    energy = pi_fn(1.0, g) + 2.0 - pi_fn(jump.rho, g) - 0.5 * jump.vn**2
    assert abs(mass) < 1e-12 and abs(energy) < 1e-12


def test_tangential_speed_is_ignored():
    a = downstream_from_normal_velocity(1.0, 2.0, 0.0)
    b = downstream_from_normal_velocity(1.0, 2.0, 7.0)
    assert a == b


def test_inverse_normal_shock_round_trip():
    jump = downstream_from_normal_velocity(1.3, 2.5)
    back = upstream_from_downstream(jump.rho, jump.vn)
    assert back.rho == pytest.approx(1.3, rel=1e-12)
    assert back.vn == pytest.approx(2.5, rel=1e-12)


@given(st.floats(1.1, 5 / 3), st.floats(1.0 + 1e-6, 5.0), st.floats(0.1, 10.0))
def test_admissibility_ordering(g, mach_n, rho_u):
    consts = GasConstants(g)
    vn = mach_n * float(sound_speed(rho_u, consts))
    jump = downstream_from_normal_velocity(rho_u, vn, 0.0, consts)
    assert jump.vn <= vn
    assert jump.rho >= rho_u
    assert jump.rho * jump.vn == pytest.approx(rho_u * vn, rel=1e-12)
    # the downstream normal speed is subsonic
    assert jump.vn <= float(sound_speed(jump.rho, consts)) * (1 + 1e-12)


def test_normal_from_jump_examples():
    assert np.allclose(normal_from_jump((2, 0), (1, 0)), (1, 0))
    assert np.allclose(normal_from_jump((1, 1), (0, 0)), (math.sqrt(0.5), math.sqrt(0.5)))
    with pytest.raises(DegenerateShockError):
        normal_from_jump((1, 2), (1, 2))


@given(st.floats(-math.pi, math.pi), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_normal_from_jump_equivariance(omega, a, b, c, d):
    vu, vd = np.array([a, b]), np.array([c, d])
    if np.hypot(*(vu - vd)) < 1e-3:
        return
    rot = np.array([[math.cos(omega), -math.sin(omega)], [math.sin(omega), math.cos(omega)]])
    assert np.allclose(normal_from_jump(rot @ vu, rot @ vd), rot @ normal_from_jump(vu, vd), atol=1e-12)


def _self_similar_shock(consts=GasConstants(1.4)):
    up = ThermoState(0.8, (2.4, 0.3), consts)
    loc = np.array([-0.4, 0.7])
    sh = oblique_shock(up, (math.cos(0.3), math.sin(0.3)), loc)
    pot = UpstreamPotential.from_state(up)
    zd = sh.z_d
    psi = -pi_fn(sh.downstream.rho, consts) - 0.5 * zd @ zd + 0.5 * loc @ loc
    return sh, pot, psi


def test_shock_invariants():
    sh, pot, psi = _self_similar_shock()
    assert np.hypot(*sh.normal) == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(sh.tangent, rot90(sh.normal))
    assert abs(sh.z_u @ sh.tangent - sh.z_d @ sh.tangent) < 1e-12
    assert sh.upstream.rho * sh.zn_u == pytest.approx(sh.downstream.rho * sh.zn_d, rel=1e-10)
    assert sh.admissible
    # psi is continuous across the shock
    assert pot.psi(sh.location) == pytest.approx(psi, rel=1e-13)


def test_g_residual_vanishes_on_constructed_shock():
    sh, pot, psi = _self_similar_shock()
    assert abs(g_residual(sh.downstream.velocity, psi, sh.location, pot)) < 1e-10


def test_g_residual_zero_jump_is_degenerate():
    sh, pot, psi = _self_similar_shock()
    with pytest.raises(DegenerateShockError):
        g_residual(pot.velocity, psi, sh.location, pot)


def test_g_residual_density_perturbation_sign():
    consts = GasConstants(1.4)
    sh, pot, psi = _self_similar_shock(consts)
    rho = sh.downstream.rho

    def g_of(r):
        # same velocity, density r: shift psi by the change of pi
        return g_residual(sh.downstream.velocity, psi - (pi_fn(r, consts) - pi_fn(rho, consts)), sh.location, pot)

    h = 1e-6 * rho
    slope = (g_of(rho + h) - g_of(rho - h)) / (2 * h)
    assert slope != 0
    assert np.sign(g_of(1.01 * rho)) == np.sign(slope)


def test_g_gradient_matches_finite_differences():
    sh, pot, psi = _self_similar_shock()
    gv = g_gradient_v(sh)
    v = sh.downstream.velocity
    h = 1e-6
    fd = []
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        fd.append((g_residual(v + e, psi, sh.location, pot) - g_residual(v - e, psi, sh.location, pot)) / (2 * h))
    assert np.allclose(fd, gv, rtol=1e-6, atol=1e-6 * np.hypot(*gv))


def test_g_gradient_normal_shock_parallel_to_normal():
    up = ThermoState(1.0, (2.0, 0.0))
    sh = oblique_shock(up, (1.0, 0.0))
    gv = g_gradient_v(sh)
    assert abs(gv @ sh.tangent) < 1e-14
    assert gv @ sh.normal > 0


@given(st.floats(1.05, 5.0), st.floats(-0.99, 0.99))
def test_transonic_shock_has_positive_normal_coefficient(mach, frac):
    sample = polar_point(mach, frac * math.acos(1 / mach))
    sh = sample.shock
    if sh.transonic:
        assert g_gradient_v(sh) @ sh.normal > 0


def test_g_gradient_zero_normal_speed():
    from reflectlab.shock import g_gradient_v_raw

    with pytest.raises(DomainError):
        g_gradient_v_raw(1.0, 1.0, np.array([1.0, 0.0]), 0.0, 0.0, 0.0)


@pytest.mark.parametrize("mach", [1.2, 2.0, 5.0])
def test_classification_of_polar_roots(mach):
    roots = deflection_solve(mach, -0.6 * critical_angle(mach)[0])
    assert classify_type(roots.weak.shock) == "weak"
    assert classify_type(roots.strong.shock) == "strong"


def test_supersonic_downstream_is_weak():
    s = polar_point(3.0, 0.9 * math.acos(1 / 3.0))
    assert s.mach_d > 1
    assert classify_type(s.shock) == "weak"


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_galilean_invariance(wx, wy):
    sh, _, _ = _self_similar_shock()
    w = np.array([wx, wy])
    moved = oblique_shock(
        ThermoState(sh.upstream.rho, sh.upstream.velocity + w), sh.normal, sh.location + w
    )
    assert np.allclose(moved.z_d, sh.z_d, atol=1e-12)
    assert np.allclose(g_gradient_v(moved), g_gradient_v(sh), atol=1e-12)
    assert abs(type_indicator(moved) - type_indicator(sh)) < 1e-12
    assert classify_type(moved) == classify_type(sh)


@given(st.floats(1.05, 5.0), st.floats(0.0, 0.999))
def test_transonic_flag_matches_mach(mach, frac):
    s = polar_point(mach, frac * math.acos(1 / mach))
    assert s.shock.transonic == (s.mach_d < 1)
