"""Regular reflection: local RR at a wall, the global trivial RR, parameter maps
and the detachment/sonic transition angles.

Geometry (corner frame): the corner is the origin, the opposite wall A is the
ray at polar angle pi, the reflection wall B the ray at polar angle ``theta``
in (pi/2, pi). In the trivial RR the reflected shock S is the vertical segment
xi = xi_A < 0 between A and B, the triangle Omega between the walls and S is
at rest with constant density rho_3, and sector 2 (left of S) moves with
velocity (v_x, 0).

Parameters ``(M1, alpha, theta)`` are measured by an observer moving with
the reflection point: sector 1 flows along B towards the corner at Mach
``M1``; ``alpha`` is the clockwise angle from the direction of A (polar angle
pi) to the incident shock line, and ``pi - theta`` the clockwise angle from A
to B. These sign conventions are a choice.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, RegimeError, SolverError
from .gas import DEFAULT_GAS, GasConstants, ThermoState, pi_fn, pi_inv, sound_speed
from .polar import DeflectionRoots, critical_angle, deflection_solve, sonic_angle
from .shock import (
    ObliqueShock,
    UpstreamPotential,
    classify_type,
    g_residual,
    oblique_shock,
    rot90,
    upstream_from_downstream,
)


def rotate(v, angle):
    c, s = math.cos(angle), math.sin(angle)
    v = np.asarray(v, dtype=float)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    return math.atan2(math.sin(a), math.cos(a))


def wall_direction(theta):
    return np.array([math.cos(theta), math.sin(theta)])


@dataclass(frozen=True)
class ReflectionParams:
    mach1: float
    alpha: float
    theta: float
    gamma: float = 1.4

    def __post_init__(self):
        if not self.mach1 > 1:
            raise DomainError(f"M1 must exceed 1, got {self.mach1}")
        if not 0.5 * math.pi < self.theta < math.pi:
            raise DomainError("theta must lie in (90, 180) degrees")

    def as_array(self):
        return np.array([self.mach1, self.alpha, self.theta])

    def replace(self, **kw):
        d = dict(mach1=self.mach1, alpha=self.alpha, theta=self.theta, gamma=self.gamma)
        d.update(kw)
        return ReflectionParams(**d)


# ---------------------------------------------------------------- local RR


def local_rr(mach2: float, tau: float, consts: GasConstants = DEFAULT_GAS, rho2=None) -> DeflectionRoots:
    """Reflected-shock candidates turning a sector-2 flow of Mach ``mach2`` by ``tau``.

    The upstream flow is along +x. Each root's ``shock.transonic`` tells
    whether its downstream is subsonic.
    """
    return deflection_solve(mach2, tau, consts, rho_u=rho2)


def _incident_line_normal(alpha, z1):
    phi = math.pi - alpha
    n = np.array([-math.sin(phi), math.cos(phi)])
    return n if z1 @ n > 0 else -n


def incident_alpha(normal) -> float:
    """Clockwise angle from the direction of A to the incident shock line, in [0, pi)."""
    t = rot90(normal)
    phi = math.atan2(t[1], t[0]) % math.pi
    return (math.pi - phi) % math.pi


def _reflection_point_states(params: ReflectionParams, consts, c1):
    """Sector-1 and sector-2 states in the reflection-point frame."""
    d_b = wall_direction(params.theta)
    rho1 = float(pi_inv(c1**2 / (consts.gamma - 1.0), consts))
    z1 = params.mach1 * c1 * (-d_b)
    n = _incident_line_normal(params.alpha, z1)
    incident = oblique_shock(ThermoState(rho1, z1, consts), n)
    return incident


@dataclass(frozen=True)
class LocalReflection:
    """A local RR in the corner frame, built from ``(M1, alpha, theta)``."""

    params: ReflectionParams
    sector1: ThermoState
    sector2: ThermoState
    xi_b: np.ndarray
    incident: ObliqueShock
    mach2: float
    tau: float
    roots: DeflectionRoots | None
    consts: GasConstants

    @property
    def weak(self) -> ObliqueShock:
        return self._to_corner(self.roots.weak)

    @property
    def strong(self) -> ObliqueShock:
        return self._to_corner(self.roots.strong)

    def _to_corner(self, sample):
        # polar roots live in a frame where sector 2 flows along +x
        z2 = self.sector2.velocity - self.xi_b
        ang = math.atan2(z2[1], z2[0])
        sh = sample.shock
        down = ThermoState(sh.downstream.rho, rotate(sh.downstream.velocity, ang) + self.xi_b, self.consts)
        return ObliqueShock(self.sector2, down, rotate(sh.normal, ang), self.xi_b)


def local_reflection(
    params: ReflectionParams, consts: GasConstants | None = None, c1: float = 1.0, solve_roots: bool = True
) -> LocalReflection:
    """Incident shock, reflection point and reflected-shock candidates for ``params``.

    The scale is fixed by the sector-1 sound speed ``c1``; the corner frame
    puts the reflection point on B so that sector 2 moves parallel to A.
    """
    consts = consts or GasConstants(params.gamma)
    incident = _reflection_point_states(params, consts, c1)
    z2 = incident.downstream.velocity
    rho2 = incident.downstream.rho
    theta = params.theta
    b = -z2[1] / math.sin(theta)
    if not b > 0:
        raise RegimeError("reflection point does not lie on the reflection wall")
    xi_b = b * wall_direction(theta)
    v1 = incident.upstream.velocity + xi_b
    v2 = z2 + xi_b
    sector1 = ThermoState(incident.upstream.rho, v1, consts)
    sector2 = ThermoState(rho2, v2, consts)
    inc = ObliqueShock(sector1, sector2, incident.normal, xi_b)
    mach2 = float(np.hypot(*z2)) / sector2.c
    tau = wrap_angle((theta - math.pi) - math.atan2(z2[1], z2[0]))
    roots = None
    if solve_roots:
        if not mach2 > 1:
            raise DomainError(f"sector 2 is subsonic (M2={mach2:.6g}); no reflected shock")
        roots = local_rr(mach2, tau, consts, rho2)
    return LocalReflection(params, sector1, sector2, xi_b, inc, mach2, tau, roots, consts)


# ------------------------------------------------------------ trivial RR


@dataclass(frozen=True)
class TrivialRR:
    consts: GasConstants
    theta: float
    rho3: float
    xi_a: float
    psi0: float
    sector2: UpstreamPotential
    incident: ObliqueShock
    reflected: ObliqueShock

    @property
    def c3(self) -> float:
        return float(sound_speed(self.rho3, self.consts))

    @property
    def eta_b(self) -> float:
        return self.xi_a * math.tan(self.theta)

    @property
    def xi_b(self):
        return np.array([self.xi_a, self.eta_b])

    @property
    def vx(self) -> float:
        return float(self.sector2.velocity[0])

    @property
    def rho2(self) -> float:
        return self.sector2.rho

    @property
    def sector1(self) -> ThermoState:
        return self.incident.upstream

    @property
    def normal_a(self):
        return np.array([0.0, -1.0])

    @property
    def normal_b(self):
        """Outer unit normal of B with respect to the wedge between the walls."""
        return np.array([math.sin(self.theta), -math.cos(self.theta)])

    @property
    def vertices(self):
        """Corner, xi_A, xi_B."""
        return np.array([[0.0, 0.0], [self.xi_a, 0.0], [self.xi_a, self.eta_b]])

    @property
    def max_pseudo_mach(self) -> float:
        # |xi|/c3 in Omega is largest at xi_B
        return float(np.hypot(*self.xi_b)) / self.c3

    @property
    def reflected_type(self) -> str:
        return classify_type(self.reflected)

    def shock_at(self, eta) -> ObliqueShock:
        """The reflected shock at (xi_A, eta)."""
        loc = np.array([self.xi_a, eta])
        return ObliqueShock(self.sector2.state, ThermoState(self.rho3, (0.0, 0.0), self.consts), np.array([1.0, 0.0]), loc)

    def rh_residual(self, eta):
        """Shock condition g along S for grad psi = 0, psi = psi0."""
        eta = np.atleast_1d(np.asarray(eta, dtype=float))
        xi = np.stack([np.full_like(eta, self.xi_a), eta], axis=-1)
        return g_residual(np.zeros_like(xi), np.full_like(eta, self.psi0), xi, self.sector2)

    def params(self) -> ReflectionParams:
        return params_from_core(self)


def _attach_incident(rho2, v2, xi_b, theta, consts, n_scan=1441):
    """Find the incident shock through xi_b with downstream (rho2, v2) and
    upstream flowing along B towards the corner (reflection-point frame).

    Returns the weak-type root of least upstream Mach number.
    """
    d_b = wall_direction(theta)
    z2 = np.asarray(v2) - xi_b
    c2 = float(sound_speed(rho2, consts))

    def upstream_for(omega):
        n = np.array([math.cos(omega), math.sin(omega)])
        zn = z2 @ n
        if not 0 < zn < c2:
            return None
        up = upstream_from_downstream(rho2, zn, consts)
        zt = z2 @ rot90(n)
        return up.rho, up.vn * n + zt * rot90(n), n

    def cross(omega):
        r = upstream_for(omega)
        if r is None:
            return math.nan
        z1 = r[1]
        return z1[0] * d_b[1] - z1[1] * d_b[0]

    omegas = np.linspace(0.0, 2 * math.pi, n_scan)
    vals = np.array([cross(w) for w in omegas])
    candidates = []
    for i in range(n_scan - 1):
        a, b = vals[i], vals[i + 1]
        if not (np.isfinite(a) and np.isfinite(b)) or a * b > 0:
            continue
        w = brentq(cross, omegas[i], omegas[i + 1], xtol=1e-15, rtol=1e-15) if a * b < 0 else omegas[i if a == 0 else i + 1]
        rho1, z1, n = upstream_for(w)
        if z1 @ d_b >= 0:
            continue
        up = ThermoState(rho1, z1 + xi_b, consts)
        down = ThermoState(rho2, v2, consts)
        sh = ObliqueShock(up, down, n, np.asarray(xi_b, dtype=float))
        candidates.append(sh)
    weak = [s for s in candidates if classify_type(s) == "weak"]
    if not weak:
        raise SolverError("no weak-type incident shock matches sector 2")
    return min(weak, key=lambda s: float(np.hypot(*s.z_u)) / s.upstream.c)


def trivial_rr_from_core(rho3: float, xi_a: float, theta: float, consts: GasConstants = DEFAULT_GAS) -> TrivialRR:
    """Build the trivial RR from the state in Omega and the position of S."""
    if not rho3 > 0:
        raise DomainError("rho3 must be positive")
    if not xi_a < 0:
        raise DomainError("xi_A must be negative")
    if not 0.5 * math.pi < theta < math.pi:
        raise DomainError("theta must lie in (90, 180) degrees")
    c3 = float(sound_speed(rho3, consts))
    a = -xi_a
    eta_b = xi_a * math.tan(theta)
    if math.hypot(a, eta_b) >= c3:
        raise RegimeError("Omega is not uniformly elliptic: |xi_B| >= c3")
    # sector 2 -> Omega is a normal shock with downstream normal pseudo-speed a
    up = upstream_from_downstream(rho3, a, consts)
    if up.vanishing:
        raise SolverError("no admissible sector-2 state")
    vx = up.vn - a
    psi0 = -float(pi_fn(rho3, consts))
    sector2 = UpstreamPotential(np.array([vx, 0.0]), psi0 - vx * xi_a, consts)
    rho2 = float(pi_inv(-psi0 + vx * xi_a - 0.5 * vx**2, consts))
    if abs(rho2 - up.rho) > 1e-10 * rho2:
        raise SolverError("sector-2 density inconsistent with Bernoulli")
    xi_b = np.array([xi_a, eta_b])
    reflected = ObliqueShock(
        sector2.state, ThermoState(rho3, (0.0, 0.0), consts), np.array([1.0, 0.0]), xi_b
    )
    incident = _attach_incident(rho2, sector2.velocity, xi_b, theta, consts)
    return TrivialRR(consts, theta, rho3, xi_a, psi0, sector2, incident, reflected)


def params_from_core(trr: TrivialRR) -> ReflectionParams:
    """(M1, alpha, theta) measured in the reflection-point frame."""
    inc = trr.incident
    z1 = inc.z_u
    mach1 = float(np.hypot(*z1)) / inc.upstream.c
    return ReflectionParams(mach1, incident_alpha(inc.normal), trr.theta, trr.consts.gamma)


def _core_mach1(a, rho3, theta, consts):
    try:
        trr = trivial_rr_from_core(rho3, -a, theta, consts)
    except (DomainError, SolverError):
        return None
    return trr


def core_from_params(
    params: ReflectionParams, rho3: float = 1.0, alpha_tol: float = 1e-8, n_scan: int = 48
) -> TrivialRR:
    """Trivial RR with the given parameters, in the gauge ``rho3`` fixed.

    Self-similarity makes the construction scale invariant, so at fixed theta
    the trivial RRs form a one-parameter family: ``M1`` is matched by a scalar
    root solve in xi_A and ``alpha`` must then agree (``RegimeError`` if not).
    With ``alpha_tol=None`` the check is skipped and the root whose alpha is
    closest to ``params.alpha`` is returned.
    """
    consts = GasConstants(params.gamma)
    theta = params.theta
    c3 = float(sound_speed(rho3, consts))
    amax = c3 * abs(math.cos(theta))
    grid = amax * np.linspace(0.01, 0.999, n_scan)
    machs = []
    for a in grid:
        trr = _core_mach1(a, rho3, theta, consts)
        machs.append(np.nan if trr is None else params_from_core(trr).mach1)
    machs = np.array(machs) - params.mach1
    roots = []
    for i in range(n_scan - 1):
        if np.isfinite(machs[i]) and np.isfinite(machs[i + 1]) and machs[i] * machs[i + 1] <= 0:

            def f(a):
                trr = _core_mach1(a, rho3, theta, consts)
                if trr is None:
                    raise SolverError("construction failed inside a bracket")
                return params_from_core(trr).mach1 - params.mach1

            roots.append(brentq(f, grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15))
    if not roots:
        raise SolverError(f"no trivial RR with M1={params.mach1} at theta={math.degrees(theta):.6g} deg")
    best = None
    for a in roots:
        trr = trivial_rr_from_core(rho3, -a, theta, consts)
        err = abs(wrap_angle(params_from_core(trr).alpha - params.alpha))
        if best is None or err < best[0]:
            best = (err, trr)
    if alpha_tol is not None and best[0] > alpha_tol * max(1.0, abs(params.alpha)):
        raise RegimeError(
            f"parameters are off the trivial-RR family: alpha mismatch {math.degrees(best[0]):.3g} deg"
        )
    return best[1]


BASE_THETA_DEG = 130.0
BASE_FRACTION = 0.82


def base_trivial_rr(consts: GasConstants = DEFAULT_GAS, theta_deg: float = BASE_THETA_DEG, fraction: float = BASE_FRACTION):
    """Reference weak-type trivial RR: rho3 = 1 and xi_A = -fraction * c3 |cos theta|.

    For gamma = 1.4 the defaults give M1 ~ 2.886, alpha ~ 10.67 deg and a
    reflection-corner exponent ~ 1.51.
    """
    if not 0 < fraction < 1:
        raise DomainError("fraction must lie in (0, 1)")
    theta = math.radians(theta_deg)
    c3 = float(sound_speed(1.0, consts))
    return trivial_rr_from_core(1.0, -fraction * c3 * abs(math.cos(theta)), theta, consts)


# ------------------------------------------------------- transition angles


@dataclass(frozen=True)
class TransitionRow:
    mach1: float
    theta_d: float
    theta_s: float
    status: str


def _margins(mach1, alpha, theta, consts):
    """(tau_* - tau, tau_s - tau) of the reflected shock; None where no local RR exists."""
    try:
        loc = local_reflection(ReflectionParams(mach1, alpha, theta, consts.gamma), consts, solve_roots=False)
    except DomainError:
        return None
    if loc.mach2 <= 1:
        return (-1.0, -1.0)
    tau_star, _ = critical_angle(loc.mach2, consts)
    tau_s, _ = sonic_angle(loc.mach2, consts)
    return (tau_star - abs(loc.tau), tau_s - abs(loc.tau))


def _transition_root(mach1, alpha, consts, which, grid):
    def f(theta):
        m = _margins(mach1, alpha, theta, consts)
        if m is None:
            raise SolverError("left the local-RR domain inside a bracket")
        return m[which]

    vals = []
    for th in grid:
        m = _margins(mach1, alpha, th, consts)
        vals.append(np.nan if m is None else m[which])
    # RR is possible for large theta: take the largest crossing from - to +
    for i in range(len(grid) - 2, -1, -1):
        a, b = vals[i], vals[i + 1]
        if np.isfinite(a) and np.isfinite(b) and a < 0 <= b:
            return brentq(f, grid[i], grid[i + 1], xtol=1e-12, rtol=1e-14)
    return math.nan


def _transition_row(args):
    gamma, alpha, m1, n_scan = args
    consts = GasConstants(gamma)
    grid = np.linspace(0.5 * math.pi + 1e-6, math.pi - 1e-6, n_scan)
    th_d = _transition_root(m1, alpha, consts, 0, grid)
    th_s = _transition_root(m1, alpha, consts, 1, grid)
    status = "ok" if np.isfinite(th_d) and np.isfinite(th_s) else "out-of-regime"
    return TransitionRow(m1, th_d, th_s, status)


def transition_curves(gamma: float, alpha: float, mach1_grid, n_scan: int = 40, workers: int = 1):
    """Detachment and sonic wall angles theta_d < theta_s for each M1 (radians).

    Each M1 is independent; ``workers > 1`` spreads them over processes.
    """
    GasConstants(gamma)
    jobs = [(gamma, alpha, float(m1), n_scan) for m1 in mach1_grid]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_transition_row, jobs))
    return [_transition_row(job) for job in jobs]
