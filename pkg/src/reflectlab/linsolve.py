"""Linearized free-boundary problem on the elliptic triangle of a trivial RR.

The triangle Omega (corner, xi_A, xi_B) is parametrized by ray coordinates

    sigma(s, w) = s (xi_A, w),    s in (0, 1],  w in [0, eta_B],

so that w = 0 is wall A, w = eta_B is wall B and s = 1 is the shock S.
Fields are discretized by Chebyshev collocation: Gauss-Radau nodes in s (the
corner s = 0 is not a node) and Gauss-Lobatto nodes in w. Both families
cluster quadratically at the ends, which grades the node set towards all
three corners.

Unknowns are ordered with the w index fastest: ``k = i * (nw + 1) + j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy import stats

from .errors import DomainError, SolverError
from .reflection import TrivialRR
from .shock import g_gradient_v

GAP_THRESHOLD = 1e2
AMBIGUOUS_GAP = 10.0


# ------------------------------------------------------------ 1D spectral


def lobatto_nodes(n: int):
    """n + 1 Chebyshev-Gauss-Lobatto nodes on [0, 1], ascending."""
    return 0.5 * (1.0 - np.cos(np.pi * np.arange(n + 1) / n))


def radau_nodes(n: int):
    """n Chebyshev-Gauss-Radau nodes on (0, 1], ascending; 1 is a node, 0 is not."""
    x = np.cos(2.0 * np.pi * np.arange(n) / (2 * n - 1))
    return np.sort(0.5 * (1.0 + x))


def bary_weights(x):
    x = np.asarray(x, dtype=float)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    # scale by 4 per factor on [0, 1] to avoid underflow for larger n
    return 1.0 / np.prod(4.0 * diff, axis=1)


def diff_matrix(x):
    """First-derivative matrix of the polynomial interpolant on the nodes x."""
    x = np.asarray(x, dtype=float)
    w = bary_weights(x)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    d = (w[None, :] / w[:, None]) / diff
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, -d.sum(axis=1))
    return d


def interp_matrix(x, xe):
    """Rows evaluate the interpolant on nodes x at the points xe."""
    x = np.asarray(x, dtype=float)
    xe = np.atleast_1d(np.asarray(xe, dtype=float))
    w = bary_weights(x)
    diff = xe[:, None] - x[None, :]
    hit = diff == 0
    diff[hit] = 1.0
    terms = w[None, :] / diff
    out = terms / terms.sum(axis=1, keepdims=True)
    rows = hit.any(axis=1)
    out[rows] = hit[rows].astype(float)
    return out


# ------------------------------------------------------------------ grid


@dataclass(frozen=True)
class RayMap:
    """Physical position xi = s lam(w) (xi_A, w) and its derivatives per node."""

    x: np.ndarray  # (n, 2)
    jac: np.ndarray  # (n, 2, 2): jac[:, k, a] = d x_k / d a, a in (s, w)
    hess: np.ndarray  # (n, 2, 2, 2): hess[:, k, a, b]

    @property
    def inv(self):
        return np.linalg.inv(self.jac)


class RayGrid:
    """Collocation nodes on Omega's reference triangle with wall angle ``theta``."""

    def __init__(self, xi_a: float, theta: float, ns: int, nw: int):
        if ns < 3 or nw < 2:
            raise DomainError("need ns >= 3 and nw >= 2")
        if not xi_a < 0:
            raise DomainError("xi_A must be negative")
        self.xi_a = float(xi_a)
        self.theta = float(theta)
        self.eta_b = self.xi_a * math.tan(self.theta)
        if not self.eta_b > 0:
            raise DomainError("theta must lie in (90, 180) degrees")
        self.ns, self.nw = ns, nw
        self.s = radau_nodes(ns)
        self.w = self.eta_b * lobatto_nodes(nw)
        self.ds = diff_matrix(self.s)
        self.dw = diff_matrix(self.w)
        eye_s, eye_w = np.eye(ns), np.eye(nw + 1)
        self.d_s = np.kron(self.ds, eye_w)
        self.d_w = np.kron(eye_s, self.dw)
        self.d_ss = np.kron(self.ds @ self.ds, eye_w)
        self.d_sw = np.kron(self.ds, self.dw)
        self.d_ww = np.kron(eye_s, self.dw @ self.dw)
        ss, ww = np.meshgrid(self.s, self.w, indexing="ij")
        self.ss, self.ww = ss.ravel(), ww.ravel()
        kind = np.full((ns, nw + 1), "interior", dtype=object)
        kind[:, 0] = "A"
        kind[:, -1] = "B"
        kind[-1, :] = "S"
        self.kind = kind.ravel()
        self.index_xa = self.index(ns - 1, 0)
        self.index_xb = self.index(ns - 1, nw)

    @property
    def size(self) -> int:
        return self.ns * (self.nw + 1)

    def index(self, i, j) -> int:
        return i * (self.nw + 1) + j

    @property
    def shock_nodes(self):
        return np.arange(self.index(self.ns - 1, 0), self.size)

    def ray_map(self, lam=None, lam_w=None, lam_ww=None) -> RayMap:
        """Map for a shock pulled back to s = 1 by ``lam(w)`` (per w node); identity if None."""
        m = self.nw + 1
        if lam is None:
            lam = np.ones(m)
            lam_w = np.zeros(m)
            lam_ww = np.zeros(m)
        s = self.ss
        lam, lam_w, lam_ww = (np.tile(np.asarray(v), self.ns) for v in (lam, lam_w, lam_ww))
        w = self.ww
        xa = self.xi_a
        dtype = np.result_type(lam, float)
        x = np.stack([s * lam * xa, s * lam * w], axis=-1)
        jac = np.zeros((self.size, 2, 2), dtype=dtype)
        jac[:, 0, 0] = lam * xa
        jac[:, 0, 1] = s * lam_w * xa
        jac[:, 1, 0] = lam * w
        jac[:, 1, 1] = s * (lam_w * w + lam)
        hess = np.zeros((self.size, 2, 2, 2), dtype=dtype)
        hess[:, 0, 0, 1] = hess[:, 0, 1, 0] = lam_w * xa
        hess[:, 0, 1, 1] = s * lam_ww * xa
        hess[:, 1, 0, 1] = hess[:, 1, 1, 0] = lam_w * w + lam
        hess[:, 1, 1, 1] = s * (lam_ww * w + 2.0 * lam_w)
        return RayMap(x, jac, hess)

    def nodes(self):
        return self.ray_map().x

    def to_reference(self, points):
        """(s, w) of physical points for the identity map."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        s = p[:, 0] / self.xi_a
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(s > 0, p[:, 1] / s, 0.0)
        return s, w

    def interpolate(self, values, points):
        """Evaluate the tensor interpolant of nodal ``values`` at physical points."""
        s, w = self.to_reference(points)
        u = np.asarray(values).reshape(self.ns, self.nw + 1)
        ms = interp_matrix(self.s, s)
        mw = interp_matrix(self.w, w)
        return np.einsum("pi,ij,pj->p", ms, u, mw)

    def derivatives(self, values):
        """(u_s, u_w, u_ss, u_sw, u_ww) at all nodes; works for complex values."""
        u = np.asarray(values).reshape(self.ns, self.nw + 1)
        u_s = self.ds @ u
        u_w = u @ self.dw.T
        return (
            u_s.ravel(),
            u_w.ravel(),
            (self.ds @ u_s).ravel(),
            (u_s @ self.dw.T).ravel(),
            (u_w @ self.dw.T).ravel(),
        )

    # -- mesh view

    def mesh(self) -> TriangleMesh:
        """Triangulated node set with the corner appended as the last vertex."""
        pts = np.vstack([self.nodes(), [[0.0, 0.0]]])
        origin = len(pts) - 1
        m = self.nw + 1
        tris = []
        for i in range(self.ns - 1):
            for j in range(self.nw):
                a, b = i * m + j, i * m + j + 1
                c, d = a + m, b + m
                tris += [(a, c, d), (a, d, b)]
        for j in range(self.nw):
            tris.append((origin, j, j + 1))
        tags = [set() if k == "interior" else {k} for k in self.kind]
        for i in range(self.ns):
            for j, other in ((0, "A"), (self.nw, "B")):
                tags[self.index(i, j)].add(other)
        tags.append({"A", "B"})
        tris = np.array(tris)
        edges = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
        h = float(np.max(np.hypot(*(pts[edges[:, 0]] - pts[edges[:, 1]]).T)))
        corners = {"origin": origin, "xi_A": self.index_xa, "xi_B": self.index_xb}
        return TriangleMesh(pts, tris, tuple(frozenset(t) for t in tags), corners, "chebyshev", h)


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    tags: tuple
    corners: dict
    grading: str
    h: float

    def dump(self, path, header: str = ""):
        """Plain text: ``# header``, then ``v x y tags`` and ``t i j k`` lines."""
        with open(path, "w") as fh:
            if header:
                fh.write(f"# {header}\n")
            fh.write(f"# corners {' '.join(f'{k}={v}' for k, v in self.corners.items())} h={self.h:.6e}\n")
            for (x, y), tag in zip(self.vertices, self.tags):
                fh.write(f"v {x:.17g} {y:.17g} {','.join(sorted(tag)) or '-'}\n")
            for a, b, c in self.triangles:
                fh.write(f"t {a} {b} {c}\n")


def grid_for(trr: TrivialRR, n: int) -> RayGrid:
    """Grid with n Radau nodes in s and n Lobatto intervals in w."""
    return RayGrid(trr.xi_a, trr.theta, n, n)


def n_for_h(h: float) -> int:
    """Node count whose largest Chebyshev spacing on [0, 1] is about h."""
    if not h > 0:
        raise DomainError("mesh size must be positive")
    return max(6, int(math.ceil(0.5 * math.pi / h)))


# ------------------------------------------------------------ assembly


def gradient_rows(grid: RayGrid, rmap: RayMap):
    """Dense matrices mapping nodal values to d/dxi and d/deta."""
    inv = rmap.inv  # inv[:, a, k] = d a / d x_k
    gx = inv[:, 0, 0, None] * grid.d_s + inv[:, 1, 0, None] * grid.d_w
    gy = inv[:, 0, 1, None] * grid.d_s + inv[:, 1, 1, None] * grid.d_w
    return gx, gy


def shock_coefficients(trr: TrivialRR, eta):
    """Frozen coefficients (g_v, k) of the linearized shock row g_v . grad u - k u at (xi_A, eta)."""
    sh = trr.shock_at(float(eta))
    d = sh.downstream
    k = d.rho * (1.0 / sh.zn_u + sh.zn_d / d.c**2)
    return g_gradient_v(sh), k


@dataclass
class LinearSystem:
    trr: TrivialRR
    grid: RayGrid
    matrix: np.ndarray
    kind: np.ndarray
    g_v: np.ndarray  # (nw + 1, 2) along S
    robin: np.ndarray  # (nw + 1,) zeroth-order coefficient along S

    @property
    def scale(self):
        return np.max(np.abs(self.matrix), axis=1)

    def scaled(self):
        """Row-equilibrated matrix (each row divided by its max entry)."""
        return self.matrix / self.scale[:, None]


def assemble_linearized(trr: TrivialRR, grid: RayGrid) -> LinearSystem:
    """Collocation matrix of the problem linearized at the trivial RR.

    Interior: s^2 (c3^2 I - xi xi^T) : D^2 u. Walls: grad u . n. Shock (all
    s = 1 nodes, including both corners): g_v . grad u - rho (1/z^n_u + z^n_d/c^2) u.
    """
    if abs(grid.xi_a - trr.xi_a) > 1e-14 * abs(trr.xi_a) or abs(grid.theta - trr.theta) > 1e-14:
        raise DomainError("grid does not match the trivial RR triangle")
    rmap = grid.ray_map()
    x, inv = rmap.x, rmap.inv
    c2 = trr.c3**2
    a_mat = c2 * np.eye(2)[None] - x[:, :, None] * x[:, None, :]
    b = np.einsum("nak,nkl,nbl->nab", inv, a_mat, inv)
    gx, gy = gradient_rows(grid, rmap)
    # second-derivative correction: - sum_k (B : X_k) d_k
    bx = np.einsum("nab,nkab->nk", b, rmap.hess)
    interior = (
        b[:, 0, 0, None] * grid.d_ss
        + 2.0 * b[:, 0, 1, None] * grid.d_sw
        + b[:, 1, 1, None] * grid.d_ww
        - bx[:, 0, None] * gx
        - bx[:, 1, None] * gy
    )
    # s^2 (distance to the corner, in ray units, squared) scales the rows
    # like the operator written in ray coordinates; without it rounding in
    # second derivatives near the corner is amplified by 1/s^2
    mat = grid.ss[:, None] ** 2 * interior
    kind = grid.kind
    na, nb = trr.normal_a, trr.normal_b
    rows_a = kind == "A"
    rows_b = kind == "B"
    mat[rows_a] = na[0] * gx[rows_a] + na[1] * gy[rows_a]
    mat[rows_b] = nb[0] * gx[rows_b] + nb[1] * gy[rows_b]
    gvs, ks = [], []
    for r in grid.shock_nodes:
        gv, k = shock_coefficients(trr, x[r, 1])
        mat[r] = gv[0] * gx[r] + gv[1] * gy[r]
        mat[r, r] -= k
        gvs.append(gv)
        ks.append(k)
    return LinearSystem(trr, grid, mat, kind, np.array(gvs), np.array(ks))


# ------------------------------------------------------------ fields


@dataclass
class DiscreteField:
    grid: RayGrid
    values: np.ndarray
    normalization: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise SolverError("field has non-finite values")

    @property
    def at_xi_b(self) -> float:
        return float(self.values[self.grid.index_xb])

    def __call__(self, points):
        return self.grid.interpolate(self.values, points)

    def corner_value(self) -> float:
        """Value at the wall-wall corner: mean of the interpolant over s = 0."""
        u = self.values.reshape(self.grid.ns, self.grid.nw + 1)
        return float(np.mean(interp_matrix(self.grid.s, [0.0]) @ u))

    def rows(self):
        for (x, y), v in zip(self.grid.nodes(), self.values):
            yield x, y, v


def _null_vector(mat):
    _, sv, vt = np.linalg.svd(mat)
    return vt[-1], sv


def kernel_certificate(system: LinearSystem):
    """Singular values of the square system, ascending, and the gap s_2/s_1.

    Rows are left in their natural units (interior rows are second-order
    operators with O(1) coefficients) so that smooth modes keep O(1) singular
    values; equilibrating by the largest entry would push them to O(n^-4).
    """
    sv = np.linalg.svd(system.matrix, compute_uv=False)[::-1]
    return sv, float(sv[1] / sv[0])


def kernel_compute(system: LinearSystem, gap_threshold: float = AMBIGUOUS_GAP) -> DiscreteField:
    """Kernel element normalized by u(xi_B) = 1.

    The row of the shock condition at xi_B is dropped and the null vector of
    the remaining rows taken from an SVD. The certificate is the singular-value
    gap of the full square system.
    """
    sv, gap = kernel_certificate(system)
    if gap < gap_threshold:
        raise SolverError(f"ambiguous kernel: singular-value gap {gap:.3g} < {gap_threshold}")
    keep = np.arange(system.grid.size) != system.grid.index_xb
    vec, sv_red = _null_vector(system.scaled()[keep])
    ub = vec[system.grid.index_xb]
    if abs(ub) < 1e-8 * np.max(np.abs(vec)):
        raise SolverError("kernel element vanishes at xi_B")
    values = vec / ub
    values[system.grid.index_xb] = 1.0
    meta = {
        "gap": gap,
        "sigma_min": float(sv[0]),
        "sigma_next": float(sv[1]),
        "reduced_sigma_min": float(sv_red[-2] if len(sv_red) > 1 else sv_red[-1]),
        "residual": float(np.max(np.abs(system.scaled()[keep] @ values))),
    }
    return DiscreteField(system.grid, values, 1.0, meta)


def solve_with_parameter(system: LinearSystem, rhs, pinned: float) -> DiscreteField:
    """Solve with the xi_B shock row replaced by u(xi_B) = pinned.

    ``rhs`` holds right-hand sides for the unscaled rows (the xi_B entry is ignored).
    """
    grid = system.grid
    rhs = np.zeros(grid.size) if rhs is None else np.array(rhs, dtype=float)
    scale = system.scale
    mat = system.scaled()
    b = rhs / scale
    r = grid.index_xb
    mat[r] = 0.0
    mat[r, r] = 1.0
    b[r] = pinned
    lu, piv = sla.lu_factor(mat)
    u = sla.lu_solve((lu, piv), b)
    cond = np.linalg.cond(mat, 1) if not np.all(np.isfinite(u)) else None
    if cond is not None:
        raise SolverError(f"pinned solve broke down (1-norm condition {cond:.3g})")
    keep = np.arange(grid.size) != r
    res = np.abs(mat[keep] @ u - b[keep])
    ref = np.max(np.abs(mat[keep]) @ np.abs(u)) + np.max(np.abs(b[keep]))
    rel = float(np.max(res) / ref) if ref > 0 else float(np.max(res))
    if rel > 1e-10:
        raise SolverError(f"pinned solve residual {rel:.3g} exceeds 1e-10")
    return DiscreteField(grid, u, pinned, {"residual": rel})


# ------------------------------------------------------ qualitative checks


@dataclass(frozen=True)
class ExtremumCheck:
    interior_max: float
    interior_min: float
    boundary_max: float
    boundary_min: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return (
            self.interior_max <= self.boundary_max + self.tolerance
            and self.interior_min >= self.boundary_min - self.tolerance
        )


def maximum_principle_check(fld: DiscreteField, h=None) -> ExtremumCheck:
    """No strict interior extremum, up to 10 h^2 max|u| (h: largest mesh edge)."""
    grid = fld.grid
    h = grid.mesh().h if h is None else h
    u = fld.values
    interior = grid.kind == "interior"
    # s = 1 (S) and the two walls are boundary; the corner enters through its value
    bvals = np.append(u[~interior], fld.corner_value())
    tol = 10.0 * h**2 * float(np.max(np.abs(u)))
    return ExtremumCheck(
        float(np.max(u[interior])), float(np.min(u[interior])), float(np.max(bvals)), float(np.min(bvals)), tol
    )


# ------------------------------------------------------------ corner fit


@dataclass(frozen=True)
class ExponentFit:
    exponent: float
    ci: tuple
    radii: np.ndarray
    amplitudes: np.ndarray


def corner_exponent_fit(
    fn,
    corner,
    phi_range,
    window,
    corner_value: float | None = None,
    corner_gradient=None,
    n_radii: int = 12,
    n_angles: int = 16,
    level: float = 0.95,
) -> ExponentFit:
    """Slope of log(mean_phi |u - u(corner) - p.(x - corner)|) against log r.

    ``fn`` maps (m, 2) points to values; ``phi_range`` is the opening of the
    domain at the corner and ``window`` = (r_min, r_max). The angular mean is
    over interior directions. ``corner_gradient`` defaults to zero.
    """
    if n_radii < 8:
        raise DomainError("need at least 8 radii in the fit window")
    r0, r1 = window
    if not 0 < r0 < r1:
        raise DomainError("fit window must satisfy 0 < r_min < r_max")
    corner = np.asarray(corner, dtype=float)
    p = np.zeros(2) if corner_gradient is None else np.asarray(corner_gradient, dtype=float)
    u0 = float(fn(corner[None])[0]) if corner_value is None else corner_value
    radii = np.geomspace(r0, r1, n_radii)
    lo, hi = phi_range
    phis = lo + (hi - lo) * (np.arange(n_angles) + 0.5) / n_angles
    dirs = np.stack([np.cos(phis), np.sin(phis)], axis=-1)
    amps = []
    for r in radii:
        pts = corner + r * dirs
        rem = fn(pts) - u0 - (pts - corner) @ p
        amps.append(np.mean(np.abs(rem)))
    amps = np.array(amps)
    if np.any(amps <= 0):
        raise DomainError("field is identically zero near the corner after subtraction")
    fit = stats.linregress(np.log(radii), np.log(amps))
    half = stats.t.ppf(0.5 + 0.5 * level, n_radii - 2) * fit.stderr
    return ExponentFit(float(fit.slope), (float(fit.slope - half), float(fit.slope + half)), radii, amps)


def reflection_corner_gradient(system: LinearSystem, u0: float):
    """Gradient at xi_B fixed by the two corner conditions g_v . p = k u0, n_B . p = 0."""
    gv, k = system.g_v[-1], system.robin[-1]
    m = np.array([gv, system.trr.normal_b])
    return np.linalg.solve(m, np.array([k * u0, 0.0]))


def reflection_corner_fit(system: LinearSystem, fld: DiscreteField, window=None, **kw) -> ExponentFit:
    """Corner exponent of ``fld`` at xi_B after removing its value and gradient there.

    The default window [2e-3, 2e-2] * eta_B is fixed in physical units: close
    enough that the r^2 terms are small, and not tied to the node spacing,
    whose scale is where the discrete corner gradient is least accurate.
    """
    trr = system.trr
    xb = trr.xi_b
    u0 = fld.at_xi_b
    grad = reflection_corner_gradient(system, u0)
    # Omega at xi_B lies between S (pointing down) and B (pointing at the corner)
    phi_range = (-0.5 * math.pi, trr.theta - math.pi)
    if window is None:
        window = (2e-3 * trr.eta_b, 2e-2 * trr.eta_b)
    return corner_exponent_fit(fld, xb, phi_range, window, u0, grad, **kw)
