import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import fan_disc, octahedron, planar_grid, tetrahedron
from loopiga.generators import KINDS, generate_test_mesh
from loopiga.mesh import BOUNDARY, CORNER, EDGE_INTERIOR, INTERIOR
from loopiga.subdivision import (
    FitError,
    fit_control_values,
    limit_matrix,
    limit_position,
    limit_positions,
    limit_weight,
    loop_alpha,
    sub_boundary_gamma,
    subdivide,
    subdivision_matrix,
)


@pytest.mark.parametrize("n, expected", [(6, 1 / 16), (3, 3 / 16), (4, 31 / 256)])
def test_loop_alpha_values(n, expected):
    assert loop_alpha(n) == pytest.approx(expected, abs=1e-15)


def test_loop_alpha_rejects_small_valence():
    with pytest.raises(ValueError):
        loop_alpha(2)


@pytest.mark.parametrize("n", range(3, 40))
def test_alpha_bounds(n):
    a = loop_alpha(n)
    assert 0 < a < 5 / (8 * n)
    assert 1 - n * a > 3 / 8


def test_regular_limit_weight():
    assert limit_weight(6) == pytest.approx(1 / 12, abs=1e-15)


def test_gamma_cases():
    # k = 3 boundary neighbours: theta = pi/3, gamma = 3/8 (standard Loop)
    assert sub_boundary_gamma(3) == pytest.approx(3 / 8)
    assert sub_boundary_gamma(2, CORNER, np.pi / 2) == pytest.approx(0.5 - 0.25 * np.cos(np.pi / 4))
    # concave corner uses 2 pi - angle
    assert sub_boundary_gamma(4, CORNER, 3 * np.pi / 2) == pytest.approx(0.5 - 0.25 * np.cos(np.pi / 8))
    g = sub_boundary_gamma(np.arange(1, 30))
    assert np.all((g >= 0.25) & (g <= 0.75))


@pytest.mark.parametrize("kind", KINDS)
def test_masks_nonnegative_and_sum_to_one(kind):
    mesh = generate_test_mesh(kind, 1)
    for S in (subdivision_matrix(mesh), limit_matrix(mesh)):
        assert S.data.min() >= -1e-15
        assert np.allclose(np.asarray(S.sum(axis=1)).ravel(), 1.0, atol=1e-14)


def test_regular_edge_point_formula():
    mesh, idx = planar_grid(4, 4, shear=0.3)
    fine = subdivide(mesh)
    p = mesh.positions
    for e, (a, b) in enumerate(mesh.edges):
        if mesh.edge_class[e] != EDGE_INTERIOR:
            continue
        l, r = mesh.edge_opposite[e]
        expected = (3 * p[a] + 3 * p[b] + p[l] + p[r]) / 8
        assert np.allclose(fine.positions[mesh.n_vertices + e], expected, atol=1e-14)


def brute_vertex_rule(mesh, v):
    p = mesh.positions
    if mesh.vertex_class[v] == CORNER:
        return p[v]
    if mesh.vertex_class[v] == BOUNDARY:
        return p[mesh.boundary_prev[v]] / 8 + 3 * p[v] / 4 + p[mesh.boundary_next[v]] / 8
    ring = list(mesh.one_ring(v).vertices)
    n = len(ring)
    a = loop_alpha(n)
    return (1 - n * a) * p[v] + a * p[ring].sum(axis=0)


@pytest.mark.parametrize("kind", KINDS)
def test_vertex_rules_against_brute_force(kind):
    mesh = generate_test_mesh(kind, 1)
    fine = subdivide(mesh)
    for v in range(0, mesh.n_vertices, 3):
        assert np.allclose(fine.positions[v], brute_vertex_rule(mesh, v), atol=1e-14)


def test_sub_boundary_edge_rule():
    mesh = generate_test_mesh("quarter_cylinder", 1)
    fine = subdivide(mesh)
    p, vc = mesh.positions, mesh.vertex_class
    checked = 0
    for e, (a, b) in enumerate(mesh.edges):
        if mesh.edge_is_boundary[e] or (vc[a] == INTERIOR) == (vc[b] == INTERIOR):
            continue
        i, j = (a, b) if vc[a] != INTERIOR else (b, a)
        g = sub_boundary_gamma(mesh.face_count[i], vc[i], mesh.corner_angles[i])
        l, r = mesh.edge_opposite[e]
        expected = (0.75 - g) * p[i] + g * p[j] + (p[l] + p[r]) / 8
        assert np.allclose(fine.positions[mesh.n_vertices + e], expected, atol=1e-14)
        checked += 1
    assert checked > 20


def test_boundary_edges_use_midpoint():
    mesh = generate_test_mesh("octant_sphere", 1)
    fine = subdivide(mesh)
    for e in np.flatnonzero(mesh.edge_is_boundary):
        a, b = mesh.edges[e]
        assert np.allclose(fine.positions[mesh.n_vertices + e], (mesh.positions[a] + mesh.positions[b]) / 2)


def test_corners_fixed():
    mesh = generate_test_mesh("octant_sphere", 1)
    fine = subdivide(subdivide(mesh))
    c = mesh.corner_vertices
    assert np.array_equal(fine.positions[c], mesh.positions[c])
    assert np.array_equal(fine.corner_vertices, c)


def test_coincident_points_stay_put():
    mesh = generate_test_mesh("quarter_cylinder", 1)
    same = mesh.with_positions(np.tile([0.3, -1.2, 2.5], (mesh.n_vertices, 1)))
    out = subdivide(same).positions
    assert np.allclose(out, [0.3, -1.2, 2.5], atol=1e-14)
    assert np.allclose(limit_positions(same), [0.3, -1.2, 2.5], atol=1e-14)


def test_reference_refinement_counts():
    mesh = generate_test_mesh("quarter_cylinder", 1)
    fine = subdivide(mesh)
    assert (fine.n_vertices, fine.n_faces) == (825, 1536)


def test_input_untouched():
    mesh = generate_test_mesh("octant_sphere", 1)
    before = mesh.positions.copy()
    subdivide(mesh)
    assert np.array_equal(mesh.positions, before)


@settings(max_examples=25, deadline=None)
@given(
    st.lists(st.floats(-2, 2, allow_nan=False), min_size=12, max_size=12),
    st.sampled_from(KINDS),
)
def test_affine_equivariance(vals, kind):
    mesh = generate_test_mesh(kind, 1)
    A = np.array(vals[:9]).reshape(3, 3)
    b = np.array(vals[9:])
    moved = mesh.with_positions(mesh.positions @ A.T + b)
    lhs = subdivide(moved).positions
    rhs = subdivide(mesh).positions @ A.T + b
    scale = 1 + np.abs(A).sum() + np.abs(b).sum()
    assert np.abs(lhs - rhs).max() <= 1e-12 * scale


def test_boundary_curves_refine_as_cubic_bsplines():
    mesh = generate_test_mesh("quarter_cylinder", 1)
    fine = subdivide(mesh)
    p, q = mesh.positions, fine.positions
    for v in mesh.boundary_vertices:
        if mesh.vertex_class[v] != BOUNDARY:
            continue
        exp = p[mesh.boundary_prev[v]] / 8 + 3 * p[v] / 4 + p[mesh.boundary_next[v]] / 8
        assert np.allclose(q[v], exp, atol=1e-15)
        # the fine boundary chain alternates old vertex / edge midpoint
        nxt = fine.boundary_next[v]
        assert np.allclose(q[nxt], (p[v] + p[mesh.boundary_next[v]]) / 2, atol=1e-15)


# --------------------------------------------------------------------- limits
def test_regular_limit_mask():
    mesh, idx = planar_grid(6, 6, shear=0.2)
    mesh = mesh.with_positions(mesh.positions + np.random.default_rng(0).normal(0, 0.05, mesh.positions.shape))
    v = idx(3, 3)
    ring = list(mesh.one_ring(v).vertices)
    expected = mesh.positions[v] / 2 + mesh.positions[ring].sum(axis=0) / 12
    assert np.allclose(limit_position(mesh, v), expected, atol=1e-14)


@pytest.mark.parametrize("mesh_fn", [tetrahedron, octahedron])
def test_plain_interior_limit_mask(mesh_fn):
    mesh = mesh_fn()
    L = limit_matrix(mesh).toarray()
    for v in range(mesh.n_vertices):
        ring = list(mesh.one_ring(v).vertices)
        n = len(ring)
        lw = limit_weight(n)
        row = np.zeros(mesh.n_vertices)
        row[v] = 1 - n * lw
        row[ring] = lw
        assert np.allclose(L[v], row, atol=1e-15)


def test_boundary_limit_mask_and_corners():
    mesh = generate_test_mesh("quarter_cylinder", 1)
    lim = limit_positions(mesh)
    p = mesh.positions
    for v in mesh.boundary_vertices:
        if mesh.vertex_class[v] == CORNER:
            assert np.array_equal(lim[v], p[v])
        else:
            exp = p[mesh.boundary_prev[v]] / 6 + 2 * p[v] / 3 + p[mesh.boundary_next[v]] / 6
            assert np.allclose(lim[v], exp, atol=1e-15)


def test_limit_position_index_error():
    with pytest.raises(IndexError):
        limit_position(tetrahedron(), 4)


@pytest.mark.parametrize("kind", KINDS)
def test_limit_consistency_across_levels(kind):
    mesh = generate_test_mesh(kind, 1)
    fine = subdivide(mesh)
    a = limit_positions(mesh)
    b = limit_positions(fine)[: mesh.n_vertices]
    assert np.abs(a - b).max() <= 1e-10


@pytest.mark.parametrize("n", [3, 4, 5, 7, 9, 12])
def test_limit_consistency_extraordinary(n):
    mesh = fan_disc(n, steps=1, lift=0.3)
    mesh = mesh.with_positions(mesh.positions + np.random.default_rng(n).normal(0, 0.02, mesh.positions.shape))
    a = limit_positions(mesh)
    b = limit_positions(subdivide(mesh))[: mesh.n_vertices]
    assert np.abs(a - b).max() <= 1e-10


# ------------------------------------------------------------------- fitting
def test_fit_constant():
    mesh = generate_test_mesh("octant_sphere", 1)
    c = fit_control_values(mesh, np.full(mesh.n_vertices, 2.5))
    assert np.allclose(c, 2.5, atol=1e-12)


@pytest.mark.parametrize("mesh_fn", [tetrahedron, lambda: generate_test_mesh("quarter_cylinder", 1)])
def test_fit_roundtrip(mesh_fn):
    mesh = mesh_fn()
    target = np.random.default_rng(1).normal(size=mesh.n_vertices)
    c = fit_control_values(mesh, target)
    assert np.linalg.norm(limit_matrix(mesh) @ c - target) <= 1e-10 * np.linalg.norm(target)


def test_fit_linear_precision_on_planar_grid():
    mesh, _ = planar_grid(6, 5, shear=0.25)
    # x sampled at the limit points is reproduced by the control x-coordinates
    c = fit_control_values(mesh, limit_positions(mesh)[:, 0])
    assert np.allclose(c, mesh.positions[:, 0], atol=1e-10)


def test_fit_boundary_subset():
    mesh = generate_test_mesh("quarter_cylinder", 1)
    bnd = mesh.boundary_vertices
    target = np.sin(mesh.positions[bnd, 2])
    c = fit_control_values(mesh, target, vertices=bnd)
    full = np.zeros(mesh.n_vertices)
    full[bnd] = c
    assert np.allclose((limit_matrix(mesh) @ full)[bnd], target, atol=1e-12)


def test_fit_errors():
    mesh = generate_test_mesh("quarter_cylinder", 1)
    with pytest.raises(ValueError, match="closed"):
        fit_control_values(mesh, np.zeros(3), vertices=mesh.interior_vertices[:3])
    with pytest.raises(ValueError, match="expected"):
        fit_control_values(mesh, np.zeros(5))
    assert issubclass(FitError, RuntimeError)
