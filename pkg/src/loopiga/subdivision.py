"""Extended Loop subdivision: refinement rules, limit masks, interpolation.

Every rule is assembled into a sparse operator so that geometry and scalar
control values refine through the same matrix. Masks are checked for
nonnegativity and unit row sums each time an operator is built.
"""

from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import BOUNDARY, CORNER, INTERIOR, ControlMesh

logger = logging.getLogger(__name__)

_MASK_TOL = 1e-14


def loop_alpha(n):
    """Loop's vertex weight for valence ``n`` (n >= 3)."""
    n_arr = np.asarray(n)
    if np.any(n_arr < 3):
        raise ValueError("Loop weight needs valence n >= 3")
    c = 3.0 / 8.0 + 0.25 * np.cos(2.0 * np.pi / n_arr)
    out = (5.0 / 8.0 - c * c) / n_arr
    return float(out) if np.ndim(out) == 0 else out


def limit_weight(n):
    """Neighbour weight ``l = 1 / (n + 3/(8 alpha))`` of the interior limit mask."""
    a = loop_alpha(n)
    return 1.0 / (np.asarray(n) + 3.0 / (8.0 * a))


def sub_boundary_gamma(k, vertex_class=BOUNDARY, corner_angle=0.0):
    """Weight ``gamma`` for the interior endpoint of a sub-boundary edge.

    Parameters
    ----------
    k : int
        Number of triangles incident to the boundary endpoint.
    vertex_class : int
        ``BOUNDARY`` or ``CORNER``.
    corner_angle : float
        Sector angle at a corner; convex when <= pi.
    """
    k = np.asarray(k, dtype=float)
    vertex_class = np.asarray(vertex_class)
    corner_angle = np.asarray(corner_angle, dtype=float)
    theta = np.where(
        vertex_class == CORNER,
        np.where(corner_angle <= np.pi, corner_angle, 2.0 * np.pi - corner_angle) / k,
        np.pi / k,
    )
    g = 0.5 - 0.25 * np.cos(theta)
    return float(g) if np.ndim(g) == 0 else g


def _check_masks(S, what):
    if S.nnz and S.data.min() < -_MASK_TOL:
        raise AssertionError(f"{what}: negative mask weight {S.data.min():.3e}")
    rs = np.asarray(S.sum(axis=1)).ravel()
    if rs.size and np.abs(rs - 1.0).max() > 1e-12:
        raise AssertionError(f"{what}: mask rows do not sum to one")


def subdivision_matrix(mesh: ControlMesh):
    """Sparse operator mapping level-k control values to level k+1.

    Rows ``0..V-1`` are the updated old vertices, rows ``V + e`` the new
    vertex on edge ``e``.
    """
    nv, ne = mesh.n_vertices, mesh.n_edges
    vc = mesh.vertex_class
    rows, cols, vals = [], [], []

    # old vertices
    interior = vc == INTERIOR
    n = mesh.valence
    alpha = np.zeros(nv)
    alpha[interior] = loop_alpha(n[interior])
    diag = np.where(interior, 1.0 - n * alpha, np.where(vc == BOUNDARY, 0.75, 1.0))
    rows.append(np.arange(nv))
    cols.append(np.arange(nv))
    vals.append(diag)
    a, b = mesh.edges[:, 0], mesh.edges[:, 1]
    for p, q in ((a, b), (b, a)):
        m = interior[p]
        rows.append(p[m])
        cols.append(q[m])
        vals.append(alpha[p[m]])
    bv = np.flatnonzero(vc == BOUNDARY)
    for nb in (mesh.boundary_next, mesh.boundary_prev):
        rows.append(bv)
        cols.append(nb[bv])
        vals.append(np.full(len(bv), 0.125))

    # new edge vertices
    r = nv + np.arange(ne)
    bedge = mesh.edge_is_boundary
    wa = np.where(bedge, 0.5, 0.375)
    wb = wa.copy()
    ga = sub_boundary_gamma(mesh.face_count[a], vc[a], mesh.corner_angles[a]) if ne else np.zeros(0)
    gb = sub_boundary_gamma(mesh.face_count[b], vc[b], mesh.corner_angles[b]) if ne else np.zeros(0)
    a_b = (vc[a] != INTERIOR) & ~bedge
    b_b = (vc[b] != INTERIOR) & ~bedge
    only_a, only_b, both = a_b & ~b_b, b_b & ~a_b, a_b & b_b
    wa = np.where(only_a, 0.75 - ga, wa)
    wb = np.where(only_a, ga, wb)
    wa = np.where(only_b, gb, wa)
    wb = np.where(only_b, 0.75 - gb, wb)
    # both endpoints on the boundary: average the two one-sided masks
    wa = np.where(both, 0.5 * ((0.75 - ga) + gb), wa)
    wb = np.where(both, 0.5 * (ga + (0.75 - gb)), wb)
    rows += [r, r]
    cols += [a, b]
    vals += [wa, wb]
    inner = ~bedge
    for s in range(2):
        rows.append(r[inner])
        cols.append(mesh.edge_opposite[inner, s])
        vals.append(np.full(int(inner.sum()), 0.125))

    S = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nv + ne, nv),
    )
    S.sum_duplicates()
    _check_masks(S, "subdivision")
    return S


def subdivide(mesh: ControlMesh, return_matrix=False):
    """One uniform step of extended Loop subdivision.

    Face ``f = (a, b, c)`` becomes faces ``4f .. 4f+3``::

        (a, m_ab, m_ca), (m_ab, b, m_bc), (m_ca, m_bc, c), (m_bc, m_ca, m_ab)

    so the child containing parameter ``(xi, eta)`` of ``f`` is known in
    closed form. Old vertices keep their indices; the vertex on edge ``e`` is
    ``V + e``.
    """
    S = subdivision_matrix(mesh)
    nv = mesh.n_vertices
    he = mesh.he_edge.reshape(-1, 3) + nv
    fa, fb, fc = mesh.faces[:, 0], mesh.faces[:, 1], mesh.faces[:, 2]
    m_ab, m_bc, m_ca = he[:, 0], he[:, 1], he[:, 2]
    faces = np.stack(
        [
            np.stack([fa, m_ab, m_ca], 1),
            np.stack([m_ab, fb, m_bc], 1),
            np.stack([m_ca, m_bc, fc], 1),
            np.stack([m_bc, m_ca, m_ab], 1),
        ],
        axis=1,
    ).reshape(-1, 3)
    angles = np.concatenate([mesh.corner_angles, np.zeros(mesh.n_edges)])
    fine = ControlMesh(
        S @ mesh.positions,
        faces,
        corners=mesh.corner_vertices,
        corner_angles=angles,
        level=mesh.level + 1,
    )
    return (fine, S) if return_matrix else fine


def limit_matrix(mesh: ControlMesh):
    """Sparse operator giving limit values at every control vertex.

    Interior vertices use the Loop limit mask, boundary vertices the cubic
    B-spline mask ``(1/6, 2/3, 1/6)`` along the boundary, corners are fixed.

    The interior mask is applied to the once-refined one-ring. After one step
    every neighbour of an interior vertex is an interior edge point, so the
    mask is exact even where sub-boundary edges carry modified weights; on
    standard neighbourhoods this equals the plain mask.
    """
    nv, ne = mesh.n_vertices, mesh.n_edges
    vc = mesh.vertex_class
    interior = vc == INTERIOR
    n = mesh.valence
    lw = np.zeros(nv)
    lw[interior] = limit_weight(n[interior])
    diag = np.where(interior, 1.0 - n * lw, np.where(vc == BOUNDARY, 2.0 / 3.0, 1.0))
    rows, cols, vals = [np.arange(nv)], [np.arange(nv)], [diag]
    a, b = mesh.edges[:, 0], mesh.edges[:, 1]
    for p in (a, b):
        m = interior[p]
        rows.append(p[m])
        cols.append(nv + np.flatnonzero(m))
        vals.append(lw[p[m]])
    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nv, nv + ne)
    )
    A.sum_duplicates()
    L = (A @ subdivision_matrix(mesh)).tocsr()
    # boundary rows: the curve mask is invariant under refinement, use it directly
    bv = np.flatnonzero(vc == BOUNDARY)
    B = sp.csr_matrix(
        (
            np.concatenate([np.full(len(bv), 2.0 / 3.0), np.full(2 * len(bv), 1.0 / 6.0)]),
            (np.tile(bv, 3), np.concatenate([bv, mesh.boundary_next[bv], mesh.boundary_prev[bv]])),
        ),
        shape=(nv, nv),
    )
    keep = sp.diags((vc != BOUNDARY).astype(float))
    L = (keep @ L + B).tocsr()
    L.eliminate_zeros()
    _check_masks(L, "limit")
    return L


def limit_positions(mesh: ControlMesh):
    """Limit-surface points of all control vertices, shape (V, 3)."""
    return limit_matrix(mesh) @ mesh.positions


def limit_position(mesh: ControlMesh, vertex: int):
    """Limit-surface point of a single control vertex."""
    if not 0 <= vertex < mesh.n_vertices:
        raise IndexError(f"vertex index {vertex} out of range")
    L = limit_matrix(mesh)
    return np.asarray(L[vertex] @ mesh.positions).ravel()


class FitError(RuntimeError):
    """The interpolation system could not be solved to tolerance."""


def fit_control_values(mesh: ControlMesh, limit_values, vertices=None, tol=1e-10):
    """Control values whose limits reproduce ``limit_values``.

    Solves the sparse system ``L u = limit_values`` built from
    :func:`limit_matrix`. When ``vertices`` is given only that subset is
    solved; the subset must be closed under the masks it uses (the boundary
    vertices are, since boundary masks only touch the boundary).

    Parameters
    ----------
    mesh : ControlMesh
    limit_values : array_like, shape (V,) or (V, k), or (len(vertices), ...)
    vertices : array_like of int, optional
    tol : float
        Maximum relative residual accepted.
    """
    L = limit_matrix(mesh)
    rhs = np.asarray(limit_values, dtype=float)
    if vertices is not None:
        vertices = np.asarray(vertices, dtype=np.int64)
        sub = L[vertices]
        outside = np.setdiff1d(sub.indices, vertices)
        if outside.size:
            raise ValueError("vertex subset is not closed under its limit masks")
        L = sub[:, vertices]
    if rhs.shape[0] != L.shape[0]:
        raise ValueError(f"expected {L.shape[0]} target values, got {rhs.shape[0]}")
    if L.shape[0] == 0:
        return rhs.copy()
    lu = spla.splu(L.tocsc())
    sol = lu.solve(rhs)
    res = np.linalg.norm(L @ sol - rhs) / max(np.linalg.norm(rhs), 1e-300)
    if not np.isfinite(res) or res > tol:
        raise FitError(f"interpolation residual {res:.3e} exceeds {tol:.1e}")
    return sol
