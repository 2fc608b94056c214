"""Nonlinear continuation of a trivial RR to nearby parameters.

The unknown is psi on the reference triangle of :mod:`reflectlab.linsolve`
(ray coordinates (s, w), shock at s = 1). Each ray is stretched by lam(w) so
that the shock lands where the sector-2 potential equals psi:

    psi_I(lam (xi_A, w)) = psi(1, w),

and interior points follow the same scaling, xi = s lam(w) (xi_A, w). Since
sector 2 is uniform, psi_I is affine and lam has a closed form.

The free parameter is the value of psi at xi_B. It is pinned to psi_I at
the reflection point given by the perturbed local RR, which puts the shock
foot on B exactly where the local RR says the reflection point is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import DomainError, RegimeError, SolverError, TransformError, VacuumError
from .gas import ThermoState, density_from_chi
from .linsolve import DiscreteField, RayGrid
from .pencil import shock_corner_beta0
from .reflection import ReflectionParams, TrivialRR, local_reflection
from .shock import ObliqueShock, UpstreamPotential, classify_type, g_residual, normal_from_jump

DEFAULT_TOL = 1e-8
COMPLEX_STEP = 1e-30


class PerturbedProblem:
    """Discrete nonlinear map F(psi) = (interior, A, B, S, pin) for given parameters."""

    def __init__(self, base: TrivialRR, theta: float, sector2: UpstreamPotential, xi_b, n: int, local=None):
        self.base = base
        self.consts = base.consts
        self.theta = float(theta)
        self.sector2 = sector2
        self.xi_b = np.asarray(xi_b, dtype=float)
        self.local = local
        self.grid = RayGrid(base.xi_a, self.theta, n, n)
        self.vx = float(sector2.velocity[0])
        if abs(sector2.velocity[1]) > 1e-12 * abs(self.vx):
            raise RegimeError("sector 2 must move parallel to wall A")
        if self.vx * base.xi_a == 0:
            raise TransformError("sector-2 potential is constant along rays")
        self.normal_b = np.array([math.sin(self.theta), -math.cos(self.theta)])
        self.pin_value = float(sector2.psi(self.xi_b))

    @classmethod
    def from_base(cls, base: TrivialRR, n: int):
        """The problem whose exact solution is the trivial RR itself."""
        return cls(base, base.theta, base.sector2, base.xi_b, n)

    @classmethod
    def from_params(cls, base: TrivialRR, params: ReflectionParams, n: int):
        """Sector 2 and xi_B from the local RR at ``params``, at the base scale (sector-1 sound speed)."""
        if abs(params.gamma - base.consts.gamma) > 0:
            raise DomainError("perturbations must keep gamma fixed")
        loc = local_reflection(params, base.consts, c1=base.sector1.c)
        return cls(base, params.theta, UpstreamPotential.from_state(loc.sector2), loc.xi_b, n, loc)

    # -- pieces of the map
    #
    # The unknown is the deviation phi = psi - psi0 from the base constant.
    # Adding a small perturbation to psi0 ~ O(1) would round it at 1e-16,
    # and the 1/s^2 metric factors near the corner amplify that noise by
    # orders of magnitude in second derivatives.

    @property
    def size(self) -> int:
        return self.grid.size

    def initial_guess(self):
        return np.zeros(self.size)

    def psi(self, phi):
        return self.base.psi0 + np.asarray(phi)

    def shock_lambda(self, phi):
        """(lam, lam_w, lam_ww) per w node from phi on S; phi has shape (batch, n)."""
        g = self.grid
        shock_vals = phi.reshape(phi.shape[0], g.ns, g.nw + 1)[:, -1, :]
        scale = self.vx * self.base.xi_a
        offset = self.base.psi0 - self.sector2.psi_origin
        lam = (offset + shock_vals) / scale
        if np.any(np.real(lam) <= 0) or not np.all(np.isfinite(lam)):
            raise TransformError("shock point left its ray (lam <= 0)")
        lam_w = (shock_vals @ g.dw.T) / scale
        return lam, lam_w, lam_w @ g.dw.T

    def geometry(self, phi):
        """Physical nodes, inverse Jacobian and second derivatives of the map, batched."""
        g = self.grid
        tile = (1, g.ns)
        lam, lam_w, lam_ww = (np.tile(v, tile) for v in self.shock_lambda(phi))
        s, w, xa = g.ss, g.ww, g.xi_a
        x = np.stack([s * lam * xa, s * lam * w], axis=-1)
        j00, j01 = lam * xa, s * lam_w * xa
        j10, j11 = lam * w, s * (lam_w * w + lam)
        det = j00 * j11 - j01 * j10
        # inv[..., a, k] = d a / d x_k
        inv = np.stack([np.stack([j11, -j01], -1), np.stack([-j10, j00], -1)], -2) / det[..., None, None]
        zero = np.zeros_like(lam)
        x_sw, x_ww = lam_w * xa, s * lam_ww * xa
        y_sw, y_ww = lam_w * w + lam, s * (lam_ww * w + 2.0 * lam_w)
        hess = np.stack(
            [
                np.stack([np.stack([zero, x_sw], -1), np.stack([x_sw, x_ww], -1)], -2),
                np.stack([np.stack([zero, y_sw], -1), np.stack([y_sw, y_ww], -1)], -2),
            ],
            -3,
        )
        return x, inv, hess

    def derivatives(self, phi, inv, hess):
        """Physical gradient (batch, n, 2) and Hessian (batch, n, 2, 2)."""
        g = self.grid
        b = phi.shape[0]
        v = phi.reshape(b, g.ns, g.nw + 1)
        v_s = np.einsum("ik,bkj->bij", g.ds, v)
        v_w = v @ g.dw.T
        v_ss = np.einsum("ik,bkj->bij", g.ds, v_s).reshape(b, -1)
        v_sw = (v_s @ g.dw.T).reshape(b, -1)
        v_ww = (v_w @ g.dw.T).reshape(b, -1)
        d_ref = np.stack([v_s.reshape(b, -1), v_w.reshape(b, -1)], -1)
        grad = np.einsum("qnak,qna->qnk", inv, d_ref)
        h_ref = np.stack([np.stack([v_ss, v_sw], -1), np.stack([v_sw, v_ww], -1)], -2)
        h_ref = h_ref - np.einsum("qnk,qnkab->qnab", grad, hess)
        h_phys = np.einsum("qnak,qnab,qnbl->qnkl", inv, h_ref, inv)
        return grad, h_phys

    def _fields(self, phi):
        x, inv, hess = self.geometry(phi)
        grad, hxx = self.derivatives(phi, inv, hess)
        psi = self.base.psi0 + phi
        z = grad - x
        enthalpy = -(psi - 0.5 * np.sum(x**2, axis=-1)) - 0.5 * np.sum(z**2, axis=-1)
        return x, grad, hxx, psi, z, enthalpy

    def residual_batch(self, phi):
        """Residual rows for a batch of deviations; the xi_B row is the pin."""
        phi = np.atleast_2d(phi)
        g = self.grid
        x, grad, hxx, psi, z, enthalpy = self._fields(phi)
        bad = np.real(enthalpy) <= 0
        if np.any(bad):
            k = int(np.argmax(bad.any(axis=0)))
            raise VacuumError(f"vacuum at xi={np.real(x[0, k])}")
        c2 = (self.consts.gamma - 1.0) * enthalpy
        inner = g.kind == "interior"
        elliptic = (np.real(np.sum(z**2, axis=-1)) < np.real(c2))[:, inner]
        if not np.all(elliptic):
            k = int(np.argmin(elliptic.all(axis=0)))
            raise RegimeError(f"ellipticity lost at xi={np.real(x[0, np.flatnonzero(inner)[k]])}")
        res = c2 * (hxx[..., 0, 0] + hxx[..., 1, 1]) - np.einsum("qnk,qnkl,qnl->qn", z, hxx, z)
        res = g.ss**2 * res  # same row scaling as the linearized system
        rows_a = g.kind == "A"
        rows_b = g.kind == "B"
        res[:, rows_a] = -grad[:, rows_a, 1]
        res[:, rows_b] = grad[:, rows_b] @ self.normal_b
        sn = g.shock_nodes
        res[:, sn] = g_residual(grad[:, sn], psi[:, sn], x[:, sn], self.sector2)
        res[:, g.index_xb] = phi[:, g.index_xb] - (self.pin_value - self.base.psi0)
        return res

    def residual(self, phi):
        return self.residual_batch(np.asarray(phi)[None])[0]

    def shock_condition(self, phi):
        """g at every S node including xi_B, where the residual carries the pin instead."""
        phi = np.atleast_2d(phi)
        x, grad, _, psi, _, _ = self._fields(phi)
        sn = self.grid.shock_nodes
        return g_residual(grad[:, sn], psi[:, sn], x[:, sn], self.sector2)

    def residual_parts(self, phi) -> dict:
        """Max-norms of the residual per part; the xi_B row is reported as ``pin``."""
        r = np.abs(self.residual(phi))
        kind = self.grid.kind.copy()
        kind[self.grid.index_xb] = "pin"
        return {part: float(np.max(r[kind == part])) for part in ("interior", "A", "B", "S", "pin")}

    def jacobian(self, phi, chunk: int = 128):
        """Complex-step Jacobian, exact to rounding."""
        n = self.size
        jac = np.empty((n, n))
        phi = np.asarray(phi, dtype=float)
        for start in range(0, n, chunk):
            cols = np.arange(start, min(n, start + chunk))
            batch = np.tile(phi.astype(complex), (len(cols), 1))
            batch[np.arange(len(cols)), cols] += 1j * COMPLEX_STEP
            jac[:, cols] = (self.residual_batch(batch).imag / COMPLEX_STEP).T
        return jac

    def shock_curve(self, phi):
        """Physical shock points per w node."""
        x, _, _ = self.geometry(np.asarray(phi)[None])
        return np.real(x[0, self.grid.shock_nodes])

    def corner_shock(self, phi) -> ObliqueShock:
        """The reflected shock at xi_B built from the discrete solution there."""
        x, grad, _, psi, z, enthalpy = self._fields(np.asarray(phi, dtype=float)[None])
        r = self.grid.index_xb
        gb, xb = grad[0, r], x[0, r]
        rho = float(density_from_chi(psi[0, r] - 0.5 * xb @ xb, gb - xb, self.consts))
        up = self.sector2.state
        return ObliqueShock(up, ThermoState(rho, gb, self.consts), normal_from_jump(up.velocity, gb), xb)

    def ellipticity_margin(self, phi) -> float:
        """1 - max pseudo-Mach number over the nodes."""
        _, _, _, _, z, enthalpy = self._fields(np.asarray(phi, dtype=float)[None])
        c2 = (self.consts.gamma - 1.0) * enthalpy[0]
        return float(1.0 - np.max(np.sqrt(np.sum(z[0] ** 2, axis=-1) / c2)))


def shock_pullback(problem: PerturbedProblem, phi):
    """Physical positions of all nodes for the deviation ``phi`` = psi - psi0."""
    x, _, _ = problem.geometry(np.asarray(phi, dtype=float)[None])
    return x[0]


def nonlinear_residual(problem: PerturbedProblem, phi) -> dict:
    """Residual rows split into interior, A, B and S (the xi_B row is reported as pin)."""
    r = problem.residual(np.asarray(phi, dtype=float))
    kind = problem.grid.kind.copy()
    kind[problem.grid.index_xb] = "pin"
    return {part: r[kind == part] for part in ("interior", "A", "B", "S", "pin")}


@dataclass
class PerturbedRR:
    base: TrivialRR
    params: ReflectionParams
    field: DiscreteField
    shock_curve: np.ndarray
    residual_norms: dict
    type_flags: dict
    iterations: int
    residual_history: list
    beta0: float
    ellipticity_margin: float
    xi_b: np.ndarray
    extra: dict = field(default_factory=dict)

    @property
    def displacement(self) -> float:
        """Shift of the shock foot on A relative to the base solution."""
        return float(self.shock_curve[0, 0] - self.base.xi_a)

    def to_json(self) -> dict:
        p = self.params
        return {
            "params": {"mach1": p.mach1, "alpha": p.alpha, "theta": p.theta, "gamma": p.gamma},
            "iterations": self.iterations,
            "residual_history": [float(r) for r in self.residual_history],
            "residual_norms": self.residual_norms,
            "shock_curve": self.shock_curve.tolist(),
            "displacement": self.displacement,
            "xi_b": self.xi_b.tolist(),
            "beta0": self.beta0,
            "ellipticity_margin": self.ellipticity_margin,
            "type_flags": self.type_flags,
            **self.extra,
        }


def _newton(problem: PerturbedProblem, u, tol, max_iter):
    history = []
    for _ in range(max_iter):
        r = problem.residual(u)
        norm = float(np.max(np.abs(r)))
        history.append(norm)
        if norm < tol:
            return u, history
        step = sla.solve(problem.jacobian(u), -r)
        t = 1.0
        while True:
            try:
                trial = u + t * step
                if float(np.max(np.abs(problem.residual(trial)))) < (1.0 - 1e-4 * t) * norm:
                    break
            except DomainError:
                pass
            t *= 0.5
            if t < 1.0 / 64:
                raise SolverError("line search failed", history)
        u = trial
    raise SolverError(f"no convergence in {max_iter} iterations", history)


def _params_between(base: ReflectionParams, target: ReflectionParams, t: float) -> ReflectionParams:
    p = base.as_array() + t * (target.as_array() - base.as_array())
    return ReflectionParams(p[0], p[1], p[2], base.gamma)


def newton_solve(
    base: TrivialRR,
    params: ReflectionParams,
    n: int = 16,
    tol: float = DEFAULT_TOL,
    max_iter: int = 30,
    min_fraction: float = 1.0 / 64,
) -> PerturbedRR:
    """Perturbed global RR at ``params`` near the base parameters.

    Damped Newton on the discrete map with psi(xi_B) pinned. If a solve fails
    the parameter step is halved and the path from the base is followed in
    smaller steps. Raises ``RegimeError`` if the result is not weak-type and
    transonic at xi_B.
    """
    base_params = base.params()
    u = PerturbedProblem.from_base(base, n).initial_guess()
    done, step = 0.0, 1.0
    history = []
    while done < 1.0:
        t = min(1.0, done + step)
        problem = PerturbedProblem.from_params(base, _params_between(base_params, params, t), n)
        try:
            u_new, hist = _newton(problem, u, tol, max_iter)
        except (SolverError, DomainError) as exc:
            history += getattr(exc, "history", [])
            step *= 0.5
            if step < min_fraction:
                raise SolverError(f"continuation stalled at fraction {done:.4g}: {exc}", history) from exc
            continue
        u, done = u_new, t
        history += hist
    return _package(base, params, problem, u, hist)


def _package(base, params, problem, u, hist) -> PerturbedRR:
    sh = problem.corner_shock(u)
    loc = problem.local
    kind = classify_type(sh)
    oracle = {}
    if loc is not None and loc.roots is not None:
        d_weak = float(np.hypot(*(sh.downstream.velocity - loc.weak.downstream.velocity)))
        d_strong = float(np.hypot(*(sh.downstream.velocity - loc.strong.downstream.velocity)))
        oracle = {"oracle_type": classify_type(loc.weak), "closer_to_weak_root": d_weak <= d_strong}
        beta0 = shock_corner_beta0(loc.weak).beta0
    else:
        beta0 = shock_corner_beta0(base.reflected).beta0
    flags = {"weak": kind == "weak", "transonic": bool(sh.transonic), "type": kind, **oracle}
    if not (flags["weak"] and flags["transonic"]):
        raise RegimeError(f"perturbed reflected shock is {kind}, transonic={sh.transonic}")
    # the shock condition at xi_B is not imposed (the pin replaces it)
    g_b = float(problem.shock_condition(u)[0, -1])
    fld = DiscreteField(problem.grid, problem.psi(u), problem.pin_value, {"dropped_shock_row": g_b})
    return PerturbedRR(
        base,
        params,
        fld,
        problem.shock_curve(u),
        problem.residual_parts(u),
        flags,
        len(hist),
        hist,
        beta0,
        problem.ellipticity_margin(u),
        problem.xi_b,
    )
