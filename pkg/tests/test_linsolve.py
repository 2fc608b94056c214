import math

import numpy as np
import pytest

from conftest import kernel_at
from reflectlab.errors import DomainError, SolverError
from reflectlab.linsolve import (
    GAP_THRESHOLD,
    RayGrid,
    assemble_linearized,
    corner_exponent_fit,
    diff_matrix,
    grid_for,
    interp_matrix,
    kernel_certificate,
    kernel_compute,
    lobatto_nodes,
    maximum_principle_check,
    n_for_h,
    radau_nodes,
    reflection_corner_fit,
    solve_with_parameter,
)
from reflectlab.pencil import reflection_corner_beta0
from reflectlab.shock import g_gradient_v


def test_spectral_helpers_exact_on_polynomials():
    x = radau_nodes(9)
    assert x[-1] == 1.0 and x[0] > 0
    p = 3 * x**5 - x**2 + 0.5
    assert np.allclose(diff_matrix(x) @ p, 15 * x**4 - 2 * x, atol=1e-11)
    xe = np.array([0.0, 0.123, 0.5])
    assert np.allclose(interp_matrix(x, xe) @ p, 3 * xe**5 - xe**2 + 0.5, atol=1e-12)
    y = lobatto_nodes(6)
    assert y[0] == 0.0 and y[-1] == 1.0


def test_grid_errors(base):
    with pytest.raises(DomainError):
        RayGrid(0.5, base.theta, 8, 8)
    with pytest.raises(DomainError):
        RayGrid(base.xi_a, base.theta, 2, 8)
    with pytest.raises(DomainError):
        assemble_linearized(base, RayGrid(base.xi_a * 1.1, base.theta, 8, 8))
    with pytest.raises(DomainError):
        n_for_h(0.0)
    assert n_for_h(0.05) == 32


def _apply_rows(system, u):
    return system.matrix @ u


def test_constant_field(system20):
    grid = system20.grid
    out = _apply_rows(system20, np.ones(grid.size))
    kind = grid.kind
    assert np.max(np.abs(out[kind == "interior"])) < 1e-9
    assert np.max(np.abs(out[(kind == "A") | (kind == "B")])) < 1e-9
    assert np.allclose(out[grid.shock_nodes], -system20.robin, rtol=1e-10)
    assert np.all(system20.robin != 0)


def test_quadratic_manufactured_solution(base, system20):
    grid = system20.grid
    x = grid.nodes()
    a, b, c, d, e = 0.7, -1.3, 0.4, 2.0, -0.6
    u = a * x[:, 0] ** 2 + b * x[:, 0] * x[:, 1] + c * x[:, 1] ** 2 + d * x[:, 0] + e * x[:, 1]
    grad = np.stack([2 * a * x[:, 0] + b * x[:, 1] + d, b * x[:, 0] + 2 * c * x[:, 1] + e], -1)
    hess = np.array([[2 * a, b], [b, 2 * c]])
    c2 = base.c3**2
    interior = c2 * np.trace(hess) - np.einsum("nk,kl,nl->n", x, hess, x)
    expected = grid.ss**2 * interior
    kind = grid.kind
    expected[kind == "A"] = grad[kind == "A"] @ base.normal_a
    expected[kind == "B"] = grad[kind == "B"] @ base.normal_b
    sn = grid.shock_nodes
    expected[sn] = np.einsum("nk,nk->n", system20.g_v, grad[sn]) - system20.robin * u[sn]
    assert np.max(np.abs(_apply_rows(system20, u) - expected)) < 1e-9


def test_interior_truncation_error_decreases(base):
    errs = []
    for n in (6, 12):
        grid = grid_for(base, n)
        system = assemble_linearized(base, grid)
        x = grid.nodes()
        u = np.exp(x[:, 0] + 0.5 * x[:, 1])
        hess = np.array([[1.0, 0.5], [0.5, 0.25]])
        exact = base.c3**2 * np.trace(hess) * u - np.einsum("nk,kl,nl->n", x, hess, x) * u
        inner = grid.kind == "interior"
        errs.append(np.max(np.abs((system.matrix @ u)[inner] - (grid.ss**2 * exact)[inner])))
    assert errs[1] < errs[0] / 4


def test_shock_rows_reproduce_gv(base, system20):
    grid = system20.grid
    x = grid.nodes()
    for row, r in enumerate(grid.shock_nodes):
        gv = g_gradient_v(base.shock_at(x[r, 1]))
        assert np.allclose(system20.g_v[row], gv, rtol=1e-12, atol=1e-12 * np.hypot(*gv))
    # acting on a linear function the row returns g_v . p - k u
    p = np.array([0.3, -1.1])
    u = x @ p
    out = (system20.matrix @ u)[grid.shock_nodes]
    assert np.allclose(out, system20.g_v @ p - system20.robin * u[grid.shock_nodes], rtol=1e-10, atol=1e-10)


def test_shock_row_sign(system20):
    # outward normal of Omega on S is -x: -u_n = u_x has coefficient g_v[0], u has -k
    assert np.all(system20.g_v[:, 0] > 0)
    assert np.all(system20.robin > 0)


def test_kernel_certificate_and_normalization():
    system, fld = kernel_at(20)
    sv, gap = kernel_certificate(system)
    assert gap > GAP_THRESHOLD
    assert sv[0] < 1e-6 * sv[-1]
    assert fld.at_xi_b == 1.0
    assert fld.normalization == 1.0
    assert fld.meta["gap"] == gap


def test_kernel_is_nontrivial_and_has_no_interior_extremum():
    system, fld = kernel_at(20)
    chk = maximum_principle_check(fld)
    assert chk.ok
    assert np.ptp(fld.values) > 0


def test_ambiguous_kernel_reported(system20):
    with pytest.raises(SolverError):
        kernel_compute(system20, gap_threshold=1e9)


def test_pinned_solves(system20):
    size = system20.grid.size
    zero = solve_with_parameter(system20, None, 0.0)
    assert np.max(np.abs(zero.values)) == 0.0
    _, kernel = kernel_at(20)
    one = solve_with_parameter(system20, np.zeros(size), 1.0)
    assert np.max(np.abs(one.values - kernel.values)) < 1e-8


def test_pinned_solves_differ_by_kernel_multiple(system20):
    grid = system20.grid
    x = grid.nodes()
    rhs = np.sin(x[:, 0]) * np.cos(2 * x[:, 1])
    a = solve_with_parameter(system20, rhs, 0.3)
    b = solve_with_parameter(system20, rhs, -1.2)
    _, kernel = kernel_at(20)
    diff = a.values - b.values
    assert np.max(np.abs(diff - 1.5 * kernel.values)) < 1e-8
    assert a.meta["residual"] < 1e-10


def test_corner_fit_manufactured():
    def u(p):
        r = np.hypot(p[:, 0], p[:, 1])
        phi = np.arctan2(p[:, 1], p[:, 0])
        return r**2 * np.cos(2 * phi)

    fit = corner_exponent_fit(u, (0.0, 0.0), (0.0, 0.5 * math.pi), (1e-3, 1e-1))
    assert abs(fit.exponent - 2.0) < 0.05
    assert fit.ci[0] <= fit.exponent <= fit.ci[1]


def test_corner_fit_needs_eight_radii():
    with pytest.raises(DomainError):
        corner_exponent_fit(lambda p: p[:, 0], (0, 0), (0, 1), (1e-3, 1e-1), n_radii=7)
    with pytest.raises(DomainError):
        corner_exponent_fit(lambda p: p[:, 0], (0, 0), (0, 1), (1e-1, 1e-3))


def test_reflection_corner_fit_near_pencil():
    system, fld = kernel_at(40)
    beta0 = reflection_corner_beta0(system.trr).beta0
    fit = reflection_corner_fit(system, fld)
    assert abs(fit.exponent - beta0) < 0.1 * beta0


def test_wall_wall_corner_exponent():
    system, fld = kernel_at(40)
    trr = system.trr
    beta1 = 1.0 / (1.0 - math.degrees(trr.theta) / 180.0)
    r = abs(trr.xi_a)
    fit = corner_exponent_fit(fld, (0.0, 0.0), (trr.theta, math.pi), (0.2 * r, 0.7 * r), corner_value=fld.corner_value())
    assert abs(fit.exponent - beta1) < 0.1 * beta1


def test_mesh_view(base, tmp_path):
    grid = grid_for(base, 8)
    mesh = grid.mesh()
    assert len(mesh.vertices) == grid.size + 1
    for k, tag in enumerate(mesh.tags):
        if k not in mesh.corners.values():
            assert len(tag) <= 1
    assert all(len(mesh.tags[v]) == 2 for v in mesh.corners.values())
    # triangles cover Omega: total area equals the triangle area
    v = mesh.vertices
    t = mesh.triangles
    e1, e2 = v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]]
    area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]).sum()
    assert area == pytest.approx(0.5 * abs(base.xi_a) * base.eta_b, rel=1e-12)
    path = tmp_path / "mesh.txt"
    mesh.dump(path, header="test")
    lines = path.read_text().splitlines()
    assert lines[0] == "# test"
    assert sum(line.startswith("v ") for line in lines) == len(v)
    assert sum(line.startswith("t ") for line in lines) == len(t)
