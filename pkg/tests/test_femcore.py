from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from osmium.errors import MeshError, NonpositiveNormalizer, UnsupportedOrder
from osmium.femcore import (
    Mesh2D,
    annulus_box_mesh,
    assemble_mass_matrix,
    build_spaces,
    interval_rule,
    normalize_mole_fractions,
    read_mesh,
    reconstruct,
    rectangle_mesh,
    refine,
    trapezoid_mesh,
    triangle_rule,
    write_mesh,
)
from osmium.femcore.elements import lagrange, raviart_thomas
from osmium.femcore.mesh import graded
from osmium.femcore.spaces import divergence_matrix, evaluate_rt, evaluate_scalar, project_dg, project_rt
from osmium.verify import divergence_inclusion, inf_sup_flux, inf_sup_stokes


@pytest.mark.parametrize("deg", range(1, 9))
def test_triangle_rule_exact(deg):
    rule = triangle_rule(deg)
    for a in range(deg + 1):
        b = deg - a
        exact = factorial(a) * factorial(b) / factorial(a + b + 2)
        assert np.sum(rule.weights * rule.points[:, 0] ** a * rule.points[:, 1] ** b) == pytest.approx(exact, rel=1e-13)
    assert np.all(rule.weights > 0)


@pytest.mark.parametrize("deg", range(1, 9))
def test_interval_rule_exact(deg):
    rule = interval_rule(deg)
    assert np.sum(rule.weights * rule.points[:, 0] ** deg) == pytest.approx(1 / (deg + 1), rel=1e-13)


@pytest.mark.parametrize("deg", [0, 1, 2, 3])
def test_lagrange_nodal(deg):
    el = lagrange(deg)
    val, grad = el.tabulate(el.nodes)
    np.testing.assert_allclose(val, np.eye(el.dim), atol=1e-12)
    # partition of unity
    pts = np.array([[0.2, 0.3], [0.1, 0.7]])
    v, g = el.tabulate(pts)
    np.testing.assert_allclose(v.sum(axis=1), 1.0)
    np.testing.assert_allclose(g.sum(axis=1), 0.0, atol=1e-12)


@pytest.mark.parametrize("order", [1, 2])
def test_rt_dimension_and_divergence_degree(order):
    el = raviart_thomas(order)
    assert el.dim == order * (order + 2)


def test_mesh_validation():
    with pytest.raises(MeshError):
        Mesh2D(np.array([[0, 0], [1, 0], [0, 1.0]]), np.array([[0, 2, 1]]), np.array([[0, 1], [1, 2], [2, 0]]),
               ("a", "a", "a"))
    with pytest.raises(MeshError):
        Mesh2D(np.array([[0, 0], [1, 0], [0, 1.0]]), np.array([[0, 1, 2]]), np.array([[0, 1], [1, 2]]), ("a", "a"))


def test_builtin_meshes():
    m = rectangle_mesh(3, 2, 2.0, 1.0)
    assert m.triangles.shape[0] == 12
    assert set(m.boundary_tags) == {"left", "right", "bottom", "top"}
    t = trapezoid_mesh(14, 14, grading=1.5)
    assert 350 <= t.triangles.shape[0] <= 450
    assert set(t.boundary_tags) == {"electrode_p", "electrode_n", "wall"}
    a = annulus_box_mesh(16, 3, 0.25, 1.0)
    assert "disk" in a.boundary_tags
    r = refine(m)
    assert r.triangles.shape[0] == 4 * m.triangles.shape[0]


def test_grading_clusters_at_both_ends():
    s = graded(10, 2.0)
    gaps = np.diff(s)
    assert s[0] == 0 and s[-1] == pytest.approx(1.0)
    assert gaps[0] < gaps[5] and gaps[-1] < gaps[5]
    np.testing.assert_allclose(graded(10, 1.0), np.linspace(0, 1, 11))


def test_mesh_roundtrip(tmp_path):
    m = annulus_box_mesh(8, 2)
    path = tmp_path / "m.msh"
    write_mesh(m, path)
    m2 = read_mesh(path)
    np.testing.assert_allclose(m2.vertices, m.vertices)
    np.testing.assert_array_equal(m2.triangles, m.triangles)
    assert m2.boundary_tags == m.boundary_tags


@pytest.mark.parametrize("order", [1, 2])
def test_space_dimensions(order):
    mesh = rectangle_mesh(3, 3)
    s = build_spaces(mesh, order)
    nt, nv, ne = len(mesh.triangles), len(mesh.vertices), len(mesh.edges)
    assert s.X.ndofs == nt * (order * (order + 1) // 2)
    assert s.N.ndofs == ne * order + nt * (order - 1) * order
    assert s.R.ndofs == nv
    assert s.dx.sum() == pytest.approx(1.0)
    with pytest.raises(UnsupportedOrder):
        build_spaces(mesh, 3)


@pytest.mark.parametrize("order", [1, 2])
def test_divergence_inclusion(order):
    s = build_spaces(rectangle_mesh(3, 3, diagonal="crossed"), order)
    assert divergence_inclusion(s) <= 1e-13


@pytest.mark.parametrize("order", [1, 2])
def test_inf_sup_smoke(order):
    s = build_spaces(rectangle_mesh(8, 8, diagonal="crossed"), order)
    assert inf_sup_stokes(s) > 1e-3
    assert inf_sup_flux(s) > 1e-3


def test_projections_reproduce_polynomials():
    s = build_spaces(rectangle_mesh(4, 4), 2)
    c = project_dg(s, lambda x: 1 + x[..., 0] - 2 * x[..., 1])
    np.testing.assert_allclose(evaluate_scalar(s, s.X, c), 1 + s.quad_points[..., 0] - 2 * s.quad_points[..., 1],
                               atol=1e-12)
    N = project_rt(s, lambda x: np.stack([x[..., 0] ** 2, x[..., 0] * x[..., 1]], axis=-1))
    val, div = evaluate_rt(s, N)
    np.testing.assert_allclose(div, 3 * s.quad_points[..., 0], atol=1e-10)


def test_divergence_matrix_constant_test():
    # sum of (div N, y_j) over all DG basis functions = boundary flux
    s = build_spaces(rectangle_mesh(3, 3), 1)
    N = project_rt(s, lambda x: np.stack([x[..., 0], 0 * x[..., 1]], axis=-1))
    D = divergence_matrix(s)
    ones = np.ones(s.X.ndofs)
    assert ones @ (D @ N) == pytest.approx(1.0, rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 2.0), st.floats(-1.0, 1.0))
def test_reconstruction_preserves_affine(a, b):
    s = build_spaces(rectangle_mesh(3, 3), 2)
    dg = project_dg(s, lambda x: a + b * x[..., 0])
    rec = reconstruct(s, dg)
    np.testing.assert_allclose(rec, a + b * s.R.dof_coords[:, 0], atol=1e-12)


def test_normalization():
    f = np.array([[0.5, 0.2], [0.8, 0.1]])
    out = normalize_mole_fractions(f, [1.0, 2.0])
    np.testing.assert_allclose(out @ [1.0, 2.0], 1.0)
    with pytest.raises(NonpositiveNormalizer):
        normalize_mole_fractions(np.array([[0.0, 0.0]]), [1.0, 2.0])


def test_mass_matrix_integrates_one():
    s = build_spaces(rectangle_mesh(2, 2, 2.0, 3.0), 1)
    M = assemble_mass_matrix(s, s.V)
    ones = np.ones(s.V.ndofs)
    assert ones @ M @ ones == pytest.approx(6.0)
