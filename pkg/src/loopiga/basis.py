"""Evaluation of the limit surface and its basis functions on patches.

Each control triangle is a patch parameterized over the reference triangle
``T = {xi, eta >= 0, xi + eta <= 1}`` with barycentric coordinates
``(1 - xi - eta, xi, eta)`` attached to the face's vertices in stored order.

Regular patches (three interior valence-6 corners, all twelve stencil
vertices interior) are quartic box splines and evaluate in closed form.
Every other patch is refined locally with the extended rules until the
parameter falls inside a regular sub-patch; results depend only on the local
configuration, so they are memoized per configuration signature.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .mesh import BOUNDARY, CORNER, INTERIOR, ControlMesh
from .subdivision import limit_weight, loop_alpha, sub_boundary_gamma, subdivide

logger = logging.getLogger(__name__)

#: maximum number of local refinements before an evaluation is clamped
DEPTH_CAP = 32

# Twelve quartic box-spline polynomials in (u, v, w) = (1 - xi - eta, xi, eta),
# as "coefficient:abc" for coefficient * u^a v^b w^c, all divided by 12.
_POLYNOMIALS = (
    "1:400 2:310",
    "1:400 2:301",
    "1:400 2:301 6:310 6:211 12:220 6:121 6:130 2:031 1:040",
    "6:400 24:301 24:202 8:103 1:004 24:310 60:211 36:112 6:013 24:220 36:121 12:022 8:130 6:031 1:040",
    "1:400 6:301 12:202 6:103 1:004 2:310 6:211 6:112 2:013",
    "2:130 1:040",
    "1:400 6:301 12:202 6:103 1:004 8:310 36:211 36:112 8:013 24:220 60:121 24:022 24:130 24:031 6:040",
    "1:400 8:301 24:202 24:103 6:004 6:310 36:211 60:112 24:013 12:220 36:121 24:022 6:130 8:031 1:040",
    "2:103 1:004",
    "2:031 1:040",
    "2:103 1:004 6:112 6:013 6:121 12:022 2:130 6:031 1:040",
    "1:004 2:013",
)

_EXPONENTS = np.array(
    [(a, b, 4 - a - b) for a in range(4, -1, -1) for b in range(4 - a, -1, -1)], dtype=np.int64
)


def _coefficient_matrix():
    col = {tuple(e): i for i, e in enumerate(_EXPONENTS)}
    C = np.zeros((12, len(_EXPONENTS)))
    for i, poly in enumerate(_POLYNOMIALS):
        for term in poly.split():
            c, e = term.split(":")
            C[i, col[tuple(int(d) for d in e)]] += int(c)
    return C / 12.0


_COEFFS = _coefficient_matrix()

#: lattice offset (along c0->c1, c0->c2) of each regular-patch control point
REGULAR_LAYOUT = (
    (0, -1), (-1, 0), (1, -1), (0, 0), (-1, 1), (2, -1),
    (1, 0), (0, 1), (-1, 2), (2, 0), (1, 1), (0, 2),
)  # fmt: skip

# (ring, position) of each regular-patch entry: ring 0/1/2 is the ordered
# one-ring of corner c0/c1/c2 starting at c1/c2/c0; -1 marks the corner itself
_RING_SLOTS = (
    (0, 4), (0, 3), (0, 5), (0, -1), (0, 2), (1, 3),
    (1, -1), (2, -1), (2, 4), (1, 4), (1, 5), (2, 3),
)  # fmt: skip


def _monomials(u, v, w):
    """u^a v^b w^c and the three partial derivatives for all 15 exponents."""
    pw = [np.stack([x**p for p in range(5)], axis=-1) for x in (u, v, w)]
    a, b, c = _EXPONENTS[:, 0], _EXPONENTS[:, 1], _EXPONENTS[:, 2]
    m = pw[0][..., a] * pw[1][..., b] * pw[2][..., c]
    am, bm, cm = np.maximum(a - 1, 0), np.maximum(b - 1, 0), np.maximum(c - 1, 0)
    du = a * pw[0][..., am] * pw[1][..., b] * pw[2][..., c]
    dv = b * pw[0][..., a] * pw[1][..., bm] * pw[2][..., c]
    dw = c * pw[0][..., a] * pw[1][..., b] * pw[2][..., cm]
    return m, du, dv, dw


def _check_in_triangle(xi, eta, tol=1e-12):
    if np.any(xi < -tol) or np.any(eta < -tol) or np.any(xi + eta > 1 + tol):
        raise ValueError("parameter outside the reference triangle")


def regular_basis(xi, eta):
    """Quartic box-spline basis of a regular patch.

    Parameters
    ----------
    xi, eta : float or array_like
        Parameters in the reference triangle.

    Returns
    -------
    values, d_xi, d_eta : ndarray, shape (..., 12)
        Basis values and parametric derivatives, ordered as
        :data:`REGULAR_LAYOUT`.
    """
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    _check_in_triangle(xi, eta)
    u = 1.0 - xi - eta
    m, du, dv, dw = _monomials(u, xi, eta)
    vals = m @ _COEFFS.T
    dxi = (dv - du) @ _COEFFS.T
    deta = (dw - du) @ _COEFFS.T
    return vals, dxi, deta


# --------------------------------------------------------------------------
# local refinement engine
# --------------------------------------------------------------------------
class _LocalMesh:
    """Neighbourhood of one (sub-)patch during local refinement.

    ``coef`` rows express each local vertex as a combination of the original
    patch stencil; ``tri`` holds the local indices of the patch corners.
    Only the fans of the three corners are guaranteed complete.
    """

    __slots__ = ("faces", "cls", "k", "angle", "coef", "tri", "_succ", "_edge_faces")

    def __init__(self, faces, cls, k, angle, coef, tri):
        self.faces = faces
        self.cls = cls
        self.k = k
        self.angle = angle
        self.coef = coef
        self.tri = tri
        succ = {}
        edge_faces = {}
        for a, b, c in faces:
            succ.setdefault(a, {})[b] = c
            succ.setdefault(b, {})[c] = a
            succ.setdefault(c, {})[a] = b
            for p, q, r in ((a, b, c), (b, c, a), (c, a, b)):
                edge_faces.setdefault((min(p, q), max(p, q)), []).append(r)
        self._succ = succ
        self._edge_faces = edge_faces

    def ring(self, v, start=None):
        """Ordered neighbours of ``v``; closed flag. Open chains start at the boundary."""
        succ = self._succ[v]
        if start is None:
            targets = set(succ.values())
            heads = [a for a in succ if a not in targets]
            start = heads[0] if heads else min(succ)
        out = [start]
        x = start
        while x in succ:
            x = succ[x]
            if x == start:
                return out, True
            out.append(x)
        return out, False

    def regular_stencil(self):
        """Twelve local indices in regular layout, or None."""
        c0, c1, c2 = self.tri
        if self.cls[c0] != INTERIOR or self.cls[c1] != INTERIOR or self.cls[c2] != INTERIOR:
            return None
        rings = []
        for v, s in ((c0, c1), (c1, c2), (c2, c0)):
            r, closed = self.ring(v, s)
            if not closed or len(r) != 6:
                return None
            rings.append(r)
        idx = [self.tri[r] if pos < 0 else rings[r][pos] for r, pos in _RING_SLOTS]
        if any(self.cls[i] != INTERIOR for i in idx):
            return None
        return idx

    # ----------------------------------------------------------- masks
    def vertex_mask(self, v):
        cls = self.cls[v]
        if cls == CORNER:
            return {v: 1.0}
        ring, closed = self.ring(v)
        if cls == BOUNDARY:
            if closed:
                raise AssertionError("boundary vertex with closed fan")
            return {v: 0.75, ring[0]: 0.125, ring[-1]: 0.125}
        if not closed:
            raise AssertionError("interior vertex fan is incomplete")
        n = len(ring)
        a = loop_alpha(n)
        mask = {v: 1.0 - n * a}
        for x in ring:
            mask[x] = a
        return mask

    def limit_mask(self, v):
        cls = self.cls[v]
        if cls == CORNER:
            return {v: 1.0}
        ring, closed = self.ring(v)
        if cls == BOUNDARY:
            return {v: 2.0 / 3.0, ring[0]: 1.0 / 6.0, ring[-1]: 1.0 / 6.0}
        n = len(ring)
        lw = limit_weight(n)
        mask = {v: 1.0 - n * lw}
        for x in ring:
            mask[x] = lw
        return mask

    def _gamma(self, v):
        return sub_boundary_gamma(self.k[v], self.cls[v], self.angle[v])

    def edge_mask(self, i, j):
        wings = self._edge_faces[(min(i, j), max(i, j))]
        if len(wings) == 1:
            return {i: 0.5, j: 0.5}
        bi, bj = self.cls[i] != INTERIOR, self.cls[j] != INTERIOR
        if bi and bj:
            gi, gj = self._gamma(i), self._gamma(j)
            wi, wj = 0.5 * ((0.75 - gi) + gj), 0.5 * (gi + (0.75 - gj))
        elif bi:
            gi = self._gamma(i)
            wi, wj = 0.75 - gi, gi
        elif bj:
            gj = self._gamma(j)
            wi, wj = gj, 0.75 - gj
        else:
            wi = wj = 0.375
        return {i: wi, j: wj, wings[0]: 0.125, wings[1]: 0.125}

    def _row(self, mask):
        keys = list(mask)
        return np.array([mask[x] for x in keys]) @ self.coef[keys]

    def limit_rows(self, verts):
        return np.stack([self._row(self.limit_mask(v)) for v in verts])

    # ----------------------------------------------------------- refinement
    def child(self, which):
        c0, c1, c2 = self.tri

        def E(a, b):
            return ("e", min(a, b), max(a, b))

        corners = (
            (("v", c0), E(c0, c1), E(c2, c0)),
            (E(c0, c1), ("v", c1), E(c1, c2)),
            (E(c2, c0), E(c1, c2), ("v", c2)),
            (E(c1, c2), E(c2, c0), E(c0, c1)),
        )[which]
        wanted = set(corners)
        order = {key: i for i, key in enumerate(corners)}
        new_faces = []
        for a, b, c in self.faces:
            kids = (
                (("v", a), E(a, b), E(c, a)),
                (E(a, b), ("v", b), E(b, c)),
                (E(c, a), E(b, c), ("v", c)),
                (E(b, c), E(c, a), E(a, b)),
            )
            for kid in kids:
                if wanted.intersection(kid):
                    for key in kid:
                        if key not in order:
                            order[key] = len(order)
                    new_faces.append(tuple(order[key] for key in kid))
        keys = sorted(order, key=order.get)
        nloc = len(keys)
        coef = np.empty((nloc, self.coef.shape[1]))
        cls = np.empty(nloc, dtype=np.int8)
        kk = np.empty(nloc, dtype=np.int64)
        ang = np.zeros(nloc)
        for idx, key in enumerate(keys):
            if key[0] == "v":
                v = key[1]
                coef[idx] = self._row(self.vertex_mask(v))
                cls[idx], kk[idx], ang[idx] = self.cls[v], self.k[v], self.angle[v]
            else:
                i, j = key[1], key[2]
                coef[idx] = self._row(self.edge_mask(i, j))
                if len(self._edge_faces[(i, j)]) == 1:
                    cls[idx], kk[idx] = BOUNDARY, 3
                else:
                    cls[idx], kk[idx] = INTERIOR, 6
        return _LocalMesh(new_faces, cls, kk, ang, coef, (0, 1, 2))


# child parameter maps: child = scale * parent + shift
_CHILD_SCALE = np.array([2.0, 2.0, 2.0, -2.0])
_CHILD_SHIFT = np.array([[0.0, 0.0], [-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]])


def _which_child(p):
    xi, eta = p[:, 0], p[:, 1]
    out = np.full(len(p), 3, dtype=np.int64)
    out[eta >= 0.5] = 2
    out[xi >= 0.5] = 1
    out[xi + eta <= 0.5] = 0
    return out


def _evaluate_local(local, pts, depth, cap):
    n, s = len(pts), local.coef.shape[1]
    reg = local.regular_stencil()
    if reg is not None:
        B, Bx, By = regular_basis(pts[:, 0], pts[:, 1])
        C = local.coef[reg]
        return B @ C, Bx @ C, By @ C, np.zeros(n, dtype=bool)
    if depth >= cap:
        L0, L1, L2 = local.limit_rows(local.tri)
        xi, eta = pts[:, :1], pts[:, 1:]
        vals = (1.0 - xi - eta) * L0 + xi * L1 + eta * L2
        return vals, np.tile(L1 - L0, (n, 1)), np.tile(L2 - L0, (n, 1)), np.ones(n, dtype=bool)
    vals = np.empty((n, s))
    dxi = np.empty((n, s))
    deta = np.empty((n, s))
    clamped = np.empty(n, dtype=bool)
    which = _which_child(pts)
    for c in np.unique(which):
        sel = which == c
        sub = np.clip(_CHILD_SCALE[c] * pts[sel] + _CHILD_SHIFT[c], 0.0, 1.0)
        v, dx, dy, cl = _evaluate_local(local.child(int(c)), sub, depth + 1, cap)
        vals[sel] = v
        dxi[sel] = _CHILD_SCALE[c] * dx
        deta[sel] = _CHILD_SCALE[c] * dy
        clamped[sel] = cl
    return vals, dxi, deta, clamped


# --------------------------------------------------------------------------
# patches on a control mesh
# --------------------------------------------------------------------------
PATCH_CLASSES = ("regular", "irregular", "sub-boundary", "boundary")


@dataclass(frozen=True)
class PatchContext:
    """One control triangle with its ordered control stencil.

    Attributes
    ----------
    face : int
    corners : tuple of int
        Face vertices in parameterization order.
    stencil : tuple of int
        Global control vertices influencing the patch; regular patches use
        :data:`REGULAR_LAYOUT` order, the rest a fixed traversal from the
        first corner.
    patch_class : str
        One of :data:`PATCH_CLASSES`.
    extraordinary_valence : int or None
        Valence of the (first) interior corner with valence other than 6.
    signature : tuple
        Hashable description of everything the patch basis depends on.
    """

    face: int
    corners: tuple
    stencil: tuple
    patch_class: str
    extraordinary_valence: int | None
    signature: tuple
    local_faces: tuple


def _rotate_to(ring, start):
    i = ring.index(start)
    return ring[i:] + ring[:i]


def patch_context(mesh: ControlMesh, face: int) -> PatchContext:
    """Stencil, classification and memo signature of ``face``."""
    if not 0 <= face < mesh.n_faces:
        raise IndexError(f"face index {face} out of range")
    corners = tuple(int(c) for c in mesh.faces[face])
    vc = mesh.vertex_class
    rings = []
    for i, c in enumerate(corners):
        r = mesh.one_ring(c)
        verts = list(r.vertices)
        if r.closed:
            verts = _rotate_to(verts, corners[(i + 1) % 3])
        rings.append(verts)

    stencil_set = set(corners)
    for r in rings:
        stencil_set.update(r)
    boundary_touch = any(vc[v] != INTERIOR for v in stencil_set)
    valences = [len(r) for r in rings]
    corner_bnd = any(vc[c] != INTERIOR for c in corners)
    ev = next((valences[i] for i in range(3) if vc[corners[i]] == INTERIOR and valences[i] != 6), None)

    if not boundary_touch and ev is None:
        idx = [corners[r] if pos < 0 else rings[r][pos] for r, pos in _RING_SLOTS]
        return PatchContext(face, corners, tuple(idx), "regular", None, ("regular",), ())

    order = {}
    for c in corners:
        order.setdefault(c, len(order))
    for r in rings:
        for v in r:
            order.setdefault(v, len(order))
    faces = set()
    for c in corners:
        faces.update(mesh.vertex_faces(c))
    local_faces = []
    for f in sorted(faces):
        t = [order[int(v)] for v in mesh.faces[f]]
        m = t.index(min(t))
        local_faces.append(tuple(t[m:] + t[:m]))
    local_faces.sort()
    stencil = tuple(sorted(order, key=order.get))
    st = np.array(stencil)
    signature = (
        tuple(local_faces),
        tuple(int(x) for x in vc[st]),
        tuple(int(x) for x in mesh.face_count[st]),
        tuple(round(float(x), 12) for x in mesh.corner_angles[st]),
    )
    if corner_bnd:
        pclass = "boundary"
    elif boundary_touch:
        pclass = "sub-boundary"
    else:
        pclass = "irregular"
    return PatchContext(face, corners, stencil, pclass, ev, signature, tuple(local_faces))


def _local_from_context(mesh: ControlMesh, ctx: PatchContext) -> _LocalMesh:
    st = np.array(ctx.stencil)
    return _LocalMesh(
        list(ctx.local_faces),
        mesh.vertex_class[st].astype(np.int8),
        mesh.face_count[st],
        mesh.corner_angles[st],
        np.eye(len(st)),
        (0, 1, 2),
    )


@dataclass
class BasisEval:
    """Basis values and parametric derivatives on one patch.

    ``values[q, j]`` is the basis function of ``stencil[j]`` at point ``q``.
    """

    stencil: np.ndarray
    values: np.ndarray
    d_xi: np.ndarray
    d_eta: np.ndarray
    clamped: np.ndarray


_TABLE_CACHE: dict = {}


def _table(mesh, ctx, pts, cap):
    key = (ctx.signature, pts.tobytes(), cap)
    hit = _TABLE_CACHE.get(key)
    if hit is None:
        if ctx.patch_class == "regular":
            # shared by every regular patch, so it must not depend on the mesh
            hit = (*regular_basis(pts[:, 0], pts[:, 1]), np.zeros(len(pts), dtype=bool))
        else:
            hit = _evaluate_local(_local_from_context(mesh, ctx), pts, 0, cap)
        for arr in hit:
            arr.flags.writeable = False
        # idempotent insert; concurrent writers store identical tables
        _TABLE_CACHE[key] = hit
    return hit


def clear_cache():
    """Drop memoized patch tables."""
    _TABLE_CACHE.clear()


def basis_functions(mesh: ControlMesh, face, xi, eta, cap=DEPTH_CAP) -> BasisEval:
    """Evaluate every basis function supported on ``face`` at given parameters."""
    ctx = face if isinstance(face, PatchContext) else patch_context(mesh, int(face))
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    _check_in_triangle(xi, eta)
    pts = np.clip(np.stack(np.broadcast_arrays(xi, eta), axis=1), 0.0, 1.0)
    vals, dxi, deta, clamped = _table(mesh, ctx, pts, cap)
    return BasisEval(np.array(ctx.stencil), vals, dxi, deta, clamped)


@dataclass
class PatchEvaluation:
    """Value and parametric derivatives of a field on a patch."""

    value: np.ndarray
    d_xi: np.ndarray
    d_eta: np.ndarray
    clamped: np.ndarray


def evaluate(mesh: ControlMesh, face, xi, eta, coefficients=None, cap=DEPTH_CAP) -> PatchEvaluation:
    """Limit value of per-vertex ``coefficients`` on ``face`` and its derivatives.

    ``coefficients`` defaults to the control positions, giving surface points
    and coordinate tangents. Parameters within ``2**-cap`` of an irregular or
    boundary corner (or on the surface boundary) come back flagged in
    ``clamped``; their values are exact limit values and their derivatives are
    accurate to about ``2**-cap``.
    """
    be = basis_functions(mesh, face, xi, eta, cap=cap)
    c = mesh.positions if coefficients is None else np.asarray(coefficients, dtype=float)
    if c.shape[0] != mesh.n_vertices:
        raise ValueError("coefficients must have one entry per control vertex")
    cs = c[be.stencil]
    return PatchEvaluation(be.values @ cs, be.d_xi @ cs, be.d_eta @ cs, be.clamped)


def basis_support(mesh: ControlMesh, vertex: int):
    """Faces on which the basis function of ``vertex`` can be nonzero."""
    ring = mesh.one_ring(vertex).vertices
    faces = set(mesh.vertex_faces(vertex))
    for w in ring:
        faces.update(mesh.vertex_faces(w))
    return frozenset(int(f) for f in faces)


def extraordinary_count(mesh: ControlMesh):
    """Number of interior corners with valence other than 6, per face."""
    ev = (mesh.vertex_class == INTERIOR) & (mesh.valence != 6)
    return ev[mesh.faces].sum(axis=1)


def prepare_analysis_mesh(mesh: ControlMesh) -> ControlMesh:
    """Subdivide once when some face touches more than one extraordinary vertex."""
    if np.any(extraordinary_count(mesh) > 1):
        logger.info("subdividing once to separate extraordinary vertices")
        return subdivide(mesh)
    return mesh


# --------------------------------------------------------------------------
# precomputed tables for quadrature
# --------------------------------------------------------------------------
@dataclass
class BasisGroup:
    """Faces sharing one patch configuration and therefore one basis table."""

    faces: np.ndarray
    stencils: np.ndarray
    values: np.ndarray
    d_xi: np.ndarray
    d_eta: np.ndarray
    patch_class: str


class PatchBasis:
    """Basis values and derivatives at fixed parameters on every face.

    Parameters
    ----------
    mesh : ControlMesh
    points : ndarray, shape (nq, 2)
        Parameters in the reference triangle, typically quadrature points.
    """

    def __init__(self, mesh: ControlMesh, points, cap=DEPTH_CAP):
        self.mesh = mesh
        self.points = np.ascontiguousarray(points, dtype=float)
        _check_in_triangle(self.points[:, 0], self.points[:, 1])
        buckets = {}
        for f in range(mesh.n_faces):
            ctx = patch_context(mesh, f)
            b = buckets.get(ctx.signature)
            if b is None:
                b = buckets[ctx.signature] = (ctx, [], [])
            b[1].append(f)
            b[2].append(ctx.stencil)
        self.groups = []
        for ctx, faces, stencils in buckets.values():
            vals, dxi, deta, clamped = _table(mesh, ctx, self.points, cap)
            if np.any(clamped):
                raise RuntimeError(f"face {faces[0]}: evaluation clamped at depth cap")
            self.groups.append(
                BasisGroup(
                    np.array(faces),
                    np.array(stencils, dtype=np.int64),
                    vals,
                    dxi,
                    deta,
                    ctx.patch_class,
                )
            )
        self.n_configurations = len(self.groups)

    def class_counts(self):
        out = {c: 0 for c in PATCH_CLASSES}
        for g in self.groups:
            out[g.patch_class] += len(g.faces)
        return out
