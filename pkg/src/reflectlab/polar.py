"""Shock polars for a fixed supersonic upstream state.

Upstream velocity is (M_u c_u, 0); the shock normal is n = (cos beta, sin beta).
Deflection tau is the counterclockwise angle from v_u to v_d, so tau < 0 for
beta > 0 and the polar is symmetric under beta -> -beta, tau -> -tau.
Angles are radians throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import DomainError, SolverError
from .gas import DEFAULT_GAS, GasConstants, ThermoState, sound_speed
from .shock import ObliqueShock, classify_type, oblique_shock, rot90, type_indicator

_TYPE_CODE = {"weak": "W", "strong": "S", "critical": "C"}


def beta_max(mach_u: float) -> float:
    """Largest admissible normal angle, arccos(1/M_u)."""
    if not mach_u > 1:
        raise DomainError(f"upstream Mach number must exceed 1, got {mach_u}")
    return math.acos(1.0 / mach_u)


@dataclass(frozen=True)
class PolarSample:
    beta: float
    shock: ObliqueShock

    @property
    def v_d(self):
        return self.shock.downstream.velocity

    @property
    def rho_d(self) -> float:
        return self.shock.downstream.rho

    @property
    def c_d(self) -> float:
        return self.shock.downstream.c

    @property
    def tau(self) -> float:
        v = self.v_d
        return math.atan2(v[1], v[0])

    @property
    def mach_d(self) -> float:
        return float(np.hypot(*self.v_d)) / self.c_d

    @property
    def shock_type(self) -> str:
        return classify_type(self.shock)


def _upstream(mach_u, consts, rho_u=None):
    rho_u = consts.rho0 if rho_u is None else rho_u
    c_u = sound_speed(rho_u, consts)
    return ThermoState(rho_u, (mach_u * c_u, 0.0), consts)


def polar_point(mach_u: float, beta: float, consts: GasConstants = DEFAULT_GAS, rho_u=None) -> PolarSample:
    """Downstream state of the steady shock with normal angle ``beta``."""
    bmax = beta_max(mach_u)
    if abs(beta) >= bmax:
        raise DomainError(f"|beta|={abs(beta):.6g} >= arccos(1/M_u)={bmax:.6g}: upstream normal speed subsonic")
    up = _upstream(mach_u, consts, rho_u)
    return PolarSample(beta, oblique_shock(up, (math.cos(beta), math.sin(beta))))


def vanishing_point(mach_u: float, beta: float, consts: GasConstants = DEFAULT_GAS, rho_u=None) -> PolarSample:
    """Endpoint of the polar: zero-strength shock with v_d = v_u."""
    up = _upstream(mach_u, consts, rho_u)
    n = np.array([math.cos(beta), math.sin(beta)])
    return PolarSample(beta, ObliqueShock(up, up, n, np.zeros(2)))


def _tau(mach_u, beta, consts):
    return polar_point(mach_u, beta, consts).tau


def _indicator(mach_u, beta, consts):
    return type_indicator(polar_point(mach_u, beta, consts).shock)


def _inner(mach_u):
    # keep root brackets strictly inside (0, beta_max)
    bmax = beta_max(mach_u)
    return 1e-12, bmax * (1.0 - 1e-10)


def critical_angle(mach_u: float, consts: GasConstants = DEFAULT_GAS, method: str = "type"):
    """Return ``(tau_star, beta_star)`` with ``beta_star > 0``.

    ``tau_star = max |tau|``; with the sign convention above it is attained at
    ``-beta_star`` (upper half) and ``+beta_star``. Methods:

    * ``"type"``: root of g_v . v_d (the critical-type shock),
    * ``"golden"``: golden-section maximization of |tau|,
    * ``"derivative"``: root of a central-difference d tau / d beta.
    """
    lo, hi = _inner(mach_u)
    if method == "type":
        b = brentq(lambda x: _indicator(mach_u, x, consts), lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    elif method == "golden":
        res = minimize_scalar(
            lambda x: _tau(mach_u, x, consts), bracket=(lo, 0.5 * hi, hi), method="golden", tol=1e-12
        )
        b = float(res.x)
    elif method == "derivative":
        step = 1e-5 * hi

        def dtau(x):
            return (_tau(mach_u, x + step, consts) - _tau(mach_u, x - step, consts)) / (2 * step)

        b = brentq(dtau, 2 * step, hi - 2 * step, xtol=1e-14, maxiter=200)
    else:
        raise ValueError(f"unknown method {method!r}")
    return -_tau(mach_u, b, consts), b


def sonic_angle(mach_u: float, consts: GasConstants = DEFAULT_GAS):
    """Return ``(tau_s, beta_s)``: the weak-branch shock with downstream Mach 1."""
    _, b_star = critical_angle(mach_u, consts)
    lo, hi = b_star, _inner(mach_u)[1]

    def f(x):
        return polar_point(mach_u, x, consts).mach_d - 1.0

    if not f(lo) < 0 < f(hi):
        raise SolverError(f"sonic point not bracketed on the weak branch for M_u={mach_u}")
    b = brentq(f, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    return -_tau(mach_u, b, consts), b


@dataclass(frozen=True)
class DeflectionRoots:
    weak: PolarSample
    strong: PolarSample


def deflection_solve(
    mach_u: float, tau: float, consts: GasConstants = DEFAULT_GAS, tau_star=None, rho_u=None
) -> DeflectionRoots:
    """Weak and strong shocks that turn v_u by ``tau``; the expansion root is excluded.

    ``tau_star`` may pass a precomputed ``critical_angle`` result. The roots in
    beta do not depend on ``rho_u``; it only sets the scale of the states.
    """
    if tau_star is None:
        tau_star, b_star = critical_angle(mach_u, consts)
    else:
        tau_star, b_star = tau_star
    a = abs(tau)
    sign = -1.0 if tau >= 0 else 1.0  # beta has the opposite sign of tau
    if a > tau_star:
        raise DomainError(f"|tau|={a:.6g} exceeds the critical angle {tau_star:.6g}: local RR impossible")
    bmax = beta_max(mach_u)
    if tau_star - a <= 1e-15:
        crit = polar_point(mach_u, sign * b_star, consts, rho_u)
        return DeflectionRoots(crit, crit)

    def h(x):
        return -_tau(mach_u, x, consts) - a

    if a == 0.0:
        strong = polar_point(mach_u, 0.0, consts, rho_u)
        weak = vanishing_point(mach_u, sign * bmax, consts, rho_u)
        return DeflectionRoots(weak, strong)
    bs = brentq(h, 0.0, b_star, xtol=1e-15, rtol=1e-15, maxiter=200)
    strong = polar_point(mach_u, sign * bs, consts, rho_u)
    # tiny deflections put the weak root closer to beta_max than the bracket end
    hi = _inner(mach_u)[1]
    while h(hi) > 0:
        hi = bmax - 1e-3 * (bmax - hi)
        try:
            if not hi < bmax:
                raise DomainError("weak root not resolvable")
            h(hi)
        except DomainError:
            return DeflectionRoots(vanishing_point(mach_u, sign * bmax, consts, rho_u), strong)
    bw = brentq(h, b_star, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    return DeflectionRoots(polar_point(mach_u, sign * bw, consts, rho_u), strong)


def convexity_quantity(sample: PolarSample) -> float:
    """A = v^t (1/v^n_u + M^n_d/c_d) / (1 - (M^n_d)^2) of the inner normal q = n - A t."""
    sh = sample.shock
    mn_d = sh.zn_d / sh.downstream.c
    return sh.zt * (1.0 / sh.zn_u + mn_d / sh.downstream.c) / (1.0 - mn_d**2)


def _q(mach_u, beta, consts):
    s = polar_point(mach_u, beta, consts)
    n = s.shock.normal
    return n - convexity_quantity(s) * rot90(n)


@dataclass(frozen=True)
class PolarCurve:
    mach_u: float
    consts: GasConstants
    samples: tuple

    @property
    def betas(self):
        return np.array([s.beta for s in self.samples])

    @property
    def taus(self):
        return np.array([s.tau for s in self.samples])

    def rows(self):
        for s in self.samples:
            v = s.v_d
            yield (s.beta, s.tau, v[0], v[1], s.rho_d, s.mach_d, _TYPE_CODE[s.shock_type])


def sample_polar(mach_u: float, n: int = 200, consts: GasConstants = DEFAULT_GAS) -> PolarCurve:
    """Polar sampled on Chebyshev nodes in (-beta_max, beta_max), clustered at the endpoints."""
    bmax = beta_max(mach_u)
    k = np.arange(n)
    betas = np.sort(bmax * np.cos(np.pi * (k + 0.5) / n))
    return PolarCurve(mach_u, consts, tuple(polar_point(mach_u, float(b), consts) for b in betas))


def convexity_certificate(mach_u: float, beta: float, consts: GasConstants = DEFAULT_GAS, step=None) -> float:
    """q x d(q)/d(beta) at ``beta`` with a central difference."""
    bmax = beta_max(mach_u)
    if step is None:
        step = 1e-3 * min(1.0, bmax - abs(beta))
    q = _q(mach_u, beta, consts)
    dq = (_q(mach_u, beta + step, consts) - _q(mach_u, beta - step, consts)) / (2 * step)
    return float(q[0] * dq[1] - q[1] * dq[0])


def convexity_scan(curve: PolarCurve) -> float:
    """Minimum convexity certificate over the samples of ``curve``."""
    return min(convexity_certificate(curve.mach_u, s.beta, curve.consts) for s in curve.samples)
