"""Corner operator pencils for two oblique-derivative conditions.

After a linear change of variables that turns the frozen top-order interior
operator into the Laplacian, a corner with edge angles phi1 < phi2 and
boundary vectors at angles gamma1, gamma2 (counterclockwise from the edges)
has the harmonic solutions r^b sin(b (phi - phi1) - gamma1) with

    b_l = -(gamma2 - gamma1)/(phi2 - phi1) + pi l/(phi2 - phi1).

The domain lies counterclockwise from edge 1 to edge 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .shock import ObliqueShock, classify_type, g_gradient_v, rot90

ZERO_TOL = 1e-12


def _angle(v):
    return math.atan2(v[1], v[0])


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.hypot(*v)


@dataclass(frozen=True)
class CornerProblem:
    interior: np.ndarray
    edge1: np.ndarray
    edge2: np.ndarray
    bc1: np.ndarray
    bc2: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.interior, dtype=float)
        object.__setattr__(self, "interior", 0.5 * (a + a.T))
        for name in ("edge1", "edge2"):
            object.__setattr__(self, name, _unit(getattr(self, name)))
        for name in ("bc1", "bc2"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))


def laplacian_normalize(problem: CornerProblem):
    """Return ``(T, normalized)`` with T A T^T = I and T e2 parallel to e2.

    Edges map contravariantly (x -> T x, renormalized) and boundary vectors
    covariantly (g -> T g), which keeps g . grad u unchanged.
    """
    w, v = np.linalg.eigh(problem.interior)
    if not np.all(w > 0):
        raise DomainError("interior matrix is not positive definite (not elliptic)")
    t0 = v @ np.diag(w**-0.5) @ v.T
    rot = _angle(problem.edge2) - _angle(t0 @ problem.edge2)
    c, s = math.cos(rot), math.sin(rot)
    t = np.array([[c, -s], [s, c]]) @ t0
    normalized = CornerProblem(
        np.eye(2), t @ problem.edge1, t @ problem.edge2, t @ problem.bc1, t @ problem.bc2
    )
    return t, normalized


@dataclass(frozen=True)
class CornerSpectrum:
    phi1: float
    phi2: float
    gamma1: float
    gamma2: float
    betas: tuple = field(default=())

    @property
    def opening(self) -> float:
        return self.phi2 - self.phi1

    @property
    def beta0(self) -> float:
        return -(self.gamma2 - self.gamma1) / self.opening + 0.0

    @property
    def beta1(self) -> float:
        return self.beta0 + math.pi / self.opening

    def eigenfunction(self, beta, r, phi):
        return r**beta * np.sin(beta * (phi - self.phi1) - self.gamma1)

    def to_json(self) -> dict:
        return {
            "phi1": self.phi1,
            "phi2": self.phi2,
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "betas": [{"beta": b, "mult": m} for b, m in self.betas],
        }


def normalized_angles(edge1, edge2, bc1, bc2):
    """(phi1, phi2, gamma1, gamma2) with the normalizations
    phi1 in [0, 2pi), phi2 in [phi1, phi1 + 2pi), gamma1 in [0, pi), gamma2 in (gamma1 - pi, gamma1]."""
    phi1 = _angle(edge1) % (2 * math.pi)
    phi2 = phi1 + (_angle(edge2) - phi1) % (2 * math.pi)
    gamma1 = (_angle(bc1) - _angle(edge1)) % math.pi
    gamma2 = (_angle(bc2) - _angle(edge2)) % math.pi
    if gamma2 > gamma1:
        gamma2 -= math.pi
    return phi1, phi2, gamma1, gamma2


def pencil_spectrum(phi1, phi2, gamma1, gamma2, count: int = 4) -> CornerSpectrum:
    """Eigenvalues b_l for l = -count..count with multiplicities (2 at b = 0)."""
    if not phi2 > phi1:
        raise DomainError("need phi2 > phi1")
    opening = phi2 - phi1
    b0 = -(gamma2 - gamma1) / opening
    betas = []
    for ell in range(-count, count + 1):
        b = b0 + math.pi * ell / opening
        if abs(b) < ZERO_TOL:
            betas.append((0.0, 2))
        else:
            betas.append((b, 1))
    return CornerSpectrum(phi1, phi2, gamma1, gamma2, tuple(sorted(betas)))


def corner_spectrum(problem: CornerProblem, count: int = 4) -> CornerSpectrum:
    _, norm = laplacian_normalize(problem)
    return pencil_spectrum(*normalized_angles(norm.edge1, norm.edge2, norm.bc1, norm.bc2), count=count)


# ------------------------------------------------------- reflection corners


def shock_wall_corner(shock: ObliqueShock) -> CornerProblem:
    """Frozen corner between a reflected shock and the wall its downstream flow follows.

    The wall ray runs along z_d. The fluid lies on the side of the wall that
    the upstream flow comes from, and the shock ray is the one of +-t on that
    side. Edges are ordered counterclockwise across the downstream wedge. The
    shock condition's top-order vector is g_v, the wall's is its normal.
    """
    zd = shock.z_d
    c = shock.downstream.c
    interior = c**2 * np.eye(2) - np.outer(zd, zd)
    wall = _unit(zd)
    inward = rot90(wall)
    if inward @ shock.z_u > 0:
        inward = -inward
    ray = shock.tangent if shock.tangent @ inward > 0 else -shock.tangent
    gv = g_gradient_v(shock)
    if ray[0] * wall[1] - ray[1] * wall[0] > 0:
        return CornerProblem(interior, ray, wall, gv, inward)
    return CornerProblem(interior, wall, ray, inward, gv)


@dataclass(frozen=True)
class CornerTypeCheck:
    beta0: float
    shock_type: str
    consistent: bool


def _expected_window(beta0, tol):
    if abs(beta0 - 1.0) < tol:
        return "critical"
    return "weak" if beta0 > 1 else "strong"


def shock_corner_beta0(shock: ObliqueShock, tol: float = 1e-9) -> CornerTypeCheck:
    """Least nonnegative pencil exponent at a shock-wall corner, checked against the shock type."""
    spec = corner_spectrum(shock_wall_corner(shock))
    kind = classify_type(shock)
    window = _expected_window(spec.beta0, tol)
    return CornerTypeCheck(spec.beta0, kind, window == kind)


def reflection_corner_beta0(trr, tol: float = 1e-9) -> CornerTypeCheck:
    """beta0 at the reflection point xi_B of a trivial RR."""
    return shock_corner_beta0(trr.reflected, tol)


def wall_wall_corner(trr) -> CornerProblem:
    c = trr.c3
    d_b = np.array([math.cos(trr.theta), math.sin(trr.theta)])
    return CornerProblem(c**2 * np.eye(2), d_b, (-1.0, 0.0), trr.normal_b, trr.normal_a)


def wall_shock_corner(trr) -> CornerProblem:
    """Corner at xi_A between A (edge 1, towards the origin) and S (edge 2, upwards)."""
    c = trr.c3
    xa = np.array([trr.xi_a, 0.0])
    gv = g_gradient_v(trr.shock_at(0.0))
    return CornerProblem(c**2 * np.eye(2) - np.outer(xa, xa), (1.0, 0.0), (0.0, 1.0), trr.normal_a, gv)
