"""Oblique shocks of (self-similar) potential flow.

Only mass and Bernoulli are conserved across a potential-flow shock:

    rho_u z^n_u = rho_d z^n_d,    pi(rho_u) + (z^n_u)^2/2 = pi(rho_d) + (z^n_d)^2/2,

with the tangential component z^t continuous. ``z = grad(psi) - xi`` is the
pseudo-velocity; for steady shocks (xi = 0) it is the velocity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .errors import DegenerateShockError, DomainError, SolverError
from .gas import DEFAULT_GAS, GasConstants, ThermoState, density_from_chi, pi_fn, pi_inv, sound_speed

CRITICAL_TOL = 1e-10


def rot90(v):
    """Rotate 2-vectors (last axis) by 90 degrees counterclockwise."""
    v = np.asarray(v)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


class NormalJump(NamedTuple):
    rho: float
    vn: float
    vanishing: bool


def _jump_function(m, energy, consts):
    def f(rho):
        return pi_fn(rho, consts) + 0.5 * (m / rho) ** 2 - energy

    def fprime(rho):
        return (sound_speed(rho, consts) ** 2 - (m / rho) ** 2) / rho

    return f, fprime


def _sonic_density(m, consts):
    # density at which the normal speed m/rho equals the sound speed (minimum of f)
    g = consts.gamma
    return (m**2 * consts.rho0 ** (g - 1.0) / consts.c0**2) ** (1.0 / (g + 1.0))


def _polish(f, fprime, rho, lo, hi):
    for _ in range(3):
        d = fprime(rho)
        if d == 0:
            break
        trial = rho - f(rho) / d
        if not lo <= trial <= hi:
            break
        rho = trial
    return rho


def downstream_from_normal_velocity(rho_u, vn_u, vt=0.0, consts: GasConstants = DEFAULT_GAS) -> NormalJump:
    """Compressive downstream state behind a shock with upstream normal speed ``vn_u``.

    ``vt`` is carried through unchanged and does not enter the jump. If the
    upstream normal speed is not supersonic the vanishing shock is returned
    with ``vanishing=True``.
    """
    if rho_u <= 0 or vn_u <= 0:
        raise DomainError("need positive upstream density and normal speed")
    c_u = sound_speed(rho_u, consts)
    if vn_u <= c_u:
        return NormalJump(float(rho_u), float(vn_u), True)
    m = rho_u * vn_u
    energy = pi_fn(rho_u, consts) + 0.5 * vn_u**2
    f, fprime = _jump_function(m, energy, consts)
    lo = _sonic_density(m, consts)
    hi = pi_inv(energy, consts)  # stagnation bound: pi(rho_d) <= energy
    if not f(hi) > 0:
        raise SolverError(f"compressive root not bracketed on ({lo}, {hi}]")
    if f(lo) >= 0:
        # infinitesimally weak shock: f is locally symmetric about its minimum
        rho_d = _polish(f, fprime, 2.0 * lo - rho_u, lo, hi)
    else:
        rho_d = brentq(f, lo, hi, xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps, maxiter=500)
        rho_d = _polish(f, fprime, rho_d, lo, hi)
    return NormalJump(float(rho_d), float(m / rho_d), False)


def upstream_from_downstream(rho_d, vn_d, consts: GasConstants = DEFAULT_GAS) -> NormalJump:
    """Inverse normal shock: the supersonic upstream state for a given subsonic downstream."""
    if rho_d <= 0 or vn_d <= 0:
        raise DomainError("need positive downstream density and normal speed")
    c_d = sound_speed(rho_d, consts)
    if vn_d >= c_d:
        return NormalJump(float(rho_d), float(vn_d), True)
    m = rho_d * vn_d
    energy = pi_fn(rho_d, consts) + 0.5 * vn_d**2
    f, fprime = _jump_function(m, energy, consts)
    hi = _sonic_density(m, consts)
    lo = 0.5 * hi
    while f(lo) <= 0:
        lo *= 0.5
        if lo < 1e-300:
            raise SolverError("upstream root not bracketed")
    if f(hi) >= 0:
        rho_u = _polish(f, fprime, max(2.0 * hi - rho_d, lo), lo, hi)
    else:
        rho_u = brentq(f, lo, hi, xtol=1e-16 * hi, rtol=4 * np.finfo(float).eps, maxiter=500)
        rho_u = _polish(f, fprime, rho_u, lo, hi)
    return NormalJump(float(rho_u), float(m / rho_u), False)


def normal_from_jump(v_u, v_d):
    """Unit shock normal (v_u - v_d)/|v_u - v_d|."""
    jump = np.asarray(v_u, dtype=float) - np.asarray(v_d, dtype=float)
    size = np.hypot(jump[0], jump[1])
    if size == 0:
        raise DegenerateShockError("zero velocity jump")
    return jump / size


@dataclass(frozen=True)
class ObliqueShock:
    """A shock at ``location`` with normal oriented so that ``zn_u > 0``."""

    upstream: ThermoState
    downstream: ThermoState
    normal: np.ndarray
    location: np.ndarray

    @property
    def tangent(self):
        return rot90(self.normal)

    @property
    def z_u(self):
        return self.upstream.velocity - self.location

    @property
    def z_d(self):
        return self.downstream.velocity - self.location

    @property
    def zn_u(self) -> float:
        return float(self.z_u @ self.normal)

    @property
    def zn_d(self) -> float:
        return float(self.z_d @ self.normal)

    @property
    def zt(self) -> float:
        return float(self.z_u @ self.tangent)

    @property
    def admissible(self) -> bool:
        return self.zn_u >= self.zn_d

    @property
    def transonic(self) -> bool:
        """Downstream pseudo-Mach number below one."""
        return float(np.hypot(*self.z_d)) < self.downstream.c

    @property
    def downstream_pseudo_mach(self) -> float:
        return float(np.hypot(*self.z_d)) / self.downstream.c


def oblique_shock(upstream: ThermoState, normal, location=(0.0, 0.0)) -> ObliqueShock:
    """Shock through ``location`` with the given normal direction.

    The normal is flipped if needed so the upstream normal pseudo-velocity is
    positive. Raises ``DomainError`` if that component is not supersonic.
    """
    consts = upstream.consts
    normal = np.asarray(normal, dtype=float)
    normal = normal / np.hypot(*normal)
    location = np.asarray(location, dtype=float)
    z_u = upstream.velocity - location
    zn_u = z_u @ normal
    if zn_u < 0:
        normal = -normal
        zn_u = -zn_u
    tangent = rot90(normal)
    zt = z_u @ tangent
    jump = downstream_from_normal_velocity(upstream.rho, zn_u, zt, consts)
    if jump.vanishing:
        raise DomainError("upstream normal pseudo-velocity is not supersonic")
    v_d = jump.vn * normal + zt * tangent + location
    return ObliqueShock(upstream, ThermoState(jump.rho, v_d, consts), normal, location)


@dataclass(frozen=True)
class UpstreamPotential:
    """Constant upstream state as an affine potential psi(xi) = psi_origin + velocity . xi."""

    velocity: np.ndarray
    psi_origin: float
    consts: GasConstants = DEFAULT_GAS

    @classmethod
    def from_state(cls, state: ThermoState):
        # -chi - |grad chi|^2/2 = -psi_origin - |v|^2/2 must equal pi(rho)
        v = state.velocity
        return cls(v, -pi_fn(state.rho, state.consts) - 0.5 * float(v @ v), state.consts)

    def psi(self, xi):
        return self.psi_origin + np.asarray(xi) @ self.velocity

    @property
    def rho(self) -> float:
        return float(pi_inv(-self.psi_origin - 0.5 * float(self.velocity @ self.velocity), self.consts))

    @property
    def state(self) -> ThermoState:
        return ThermoState(self.rho, self.velocity, self.consts)


def g_residual(grad_psi, psi, xi, upstream: UpstreamPotential, consts: GasConstants | None = None):
    """Shock condition (rho grad chi - rho_I grad chi_I) . n with n = (v_I - grad psi)/|.|.

    Vectorized over leading axes; complex inputs are supported.
    """
    consts = consts or upstream.consts
    grad_psi = np.asarray(grad_psi)
    xi = np.asarray(xi)
    grad_chi = grad_psi - xi
    chi = psi - 0.5 * np.sum(xi**2, axis=-1)
    rho = density_from_chi(chi, grad_chi, consts)
    jump = upstream.velocity - grad_psi
    size = np.sqrt(np.sum(jump**2, axis=-1))
    if np.any(np.real(size) == 0):
        raise DegenerateShockError("zero gradient jump across the shock")
    flux = rho[..., None] * grad_chi - upstream.rho * (upstream.velocity - xi)
    return np.sum(flux * jump, axis=-1) / size


def g_gradient_v_raw(rho, c, normal, zn_u, zn_d, zt):
    """rho [(1 - (zn_d/c)^2) n - zt (1/zn_u + zn_d/c^2) t]; vectorized."""
    if np.any(np.asarray(zn_u) == 0):
        raise DomainError("zero upstream normal pseudo-velocity")
    normal = np.asarray(normal)
    tangent = rot90(normal)
    cn = 1.0 - (zn_d / c) ** 2
    ct = -zt * (1.0 / zn_u + zn_d / c**2)
    return np.asarray(rho)[..., None] * (np.asarray(cn)[..., None] * normal + np.asarray(ct)[..., None] * tangent)


def g_gradient_v(shock: ObliqueShock):
    """Gradient of the shock condition with respect to the downstream velocity."""
    d = shock.downstream
    return g_gradient_v_raw(d.rho, d.c, shock.normal, shock.zn_u, shock.zn_d, shock.zt)


def type_indicator(shock: ObliqueShock) -> float:
    """g_v . z_d scaled by |g_v||z_d|; negative for weak-type."""
    gv = g_gradient_v(shock)
    zd = shock.z_d
    return float(gv @ zd) / (np.hypot(*gv) * np.hypot(*zd))


def classify_type(shock: ObliqueShock, tol: float = CRITICAL_TOL) -> str:
    """'weak', 'strong' or 'critical' from the sign of g_v . z_d."""
    s = type_indicator(shock)
    if abs(s) < tol:
        return "critical"
    return "weak" if s < 0 else "strong"
