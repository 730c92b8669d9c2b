"""Small meshes and independent oracles shared by the tests."""

from __future__ import annotations

import numpy as np

from loopiga.basis import basis_functions, patch_context
from loopiga.generators import generate_test_mesh
from loopiga.geometry import make_sample, tangential_gradient
from loopiga.mesh import ControlMesh
from loopiga.subdivision import subdivide

# criterion number -> one-line verdict, printed at the end of the session
ACCEPTANCE: dict[int, str] = {}


def record(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}: {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def tetrahedron():
    pos = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    faces = [[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]
    return ControlMesh(pos, faces)


def octahedron():
    pos = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float)
    faces = [[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4], [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]]
    return ControlMesh(pos, faces)


def single_triangle():
    return ControlMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])


def planar_grid(ni, nj, spacing=1.0, corners=None, shear=0.0):
    """Regular triangulated grid in z=0 with the diagonal v00-v11."""
    idx = lambda i, j: j * (ni + 1) + i  # noqa: E731
    pos = np.array(
        [[spacing * (i + shear * j), spacing * j, 0.0] for j in range(nj + 1) for i in range(ni + 1)]
    )
    faces = []
    for j in range(nj):
        for i in range(ni):
            faces.append((idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)))
            faces.append((idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)))
    return ControlMesh(pos, faces, corners=corners), idx


def equilateral_region(n):
    """Equilateral triangle of side ``n`` split into unit equilateral triangles.

    Its corners have one triangle and a 60 degree angle, so every extended
    rule reduces to the standard lattice rule and the limit map is affine.
    """
    idx, pos = {}, []
    for j in range(n + 1):
        for i in range(n + 1 - j):
            idx[i, j] = len(pos)
            pos.append([i + 0.5 * j, np.sqrt(3) / 2 * j, 0.0])
    faces = []
    for j in range(n):
        for i in range(n - j):
            faces.append((idx[i, j], idx[i + 1, j], idx[i, j + 1]))
            if i + j + 1 < n:
                faces.append((idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]))
    return ControlMesh(np.array(pos), faces)


def fan_disc(n, steps=2, lift=0.0):
    """Disc whose centre has valence ``n``, refined ``steps`` times.

    The centre (vertex 0) stays extraordinary; everything else becomes
    regular or boundary. ``lift`` bends the rim out of the plane.
    """
    ang = 2 * np.pi * np.arange(n) / n
    rim = np.stack([np.cos(ang), np.sin(ang), lift * np.cos(2 * ang)], axis=1)
    pos = np.vstack([[0.0, 0.0, 0.0], rim])
    faces = [(0, 1 + i, 1 + (i + 1) % n) for i in range(n)]
    mesh = ControlMesh(pos, faces, corners=[])
    for _ in range(steps):
        mesh = subdivide(mesh)
    return mesh


def dense_basis_at(mesh, face, xi, eta):
    """Basis values/derivatives of every control vertex on ``face`` (dense rows)."""
    be = basis_functions(mesh, face, xi, eta)
    n = mesh.n_vertices
    out = [np.zeros((len(np.atleast_1d(xi)), n)) for _ in range(3)]
    for arr, src in zip(out, (be.values, be.d_xi, be.d_eta)):
        arr[:, be.stencil] = src
    return out


# ----------------------------------------------------------------- lattice oracle
_DIRS = ((1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1))


def _shift(G, da, db):
    return np.roll(np.roll(G, -da, 0), -db, 1)


def lattice_refine(G):
    """One regular Loop step on data indexed by lattice coordinates (a, b)."""
    N = G.shape[0]
    H = np.full((2 * N - 1, 2 * N - 1), np.nan)
    ring = sum(_shift(G, *d) for d in _DIRS)
    H[0::2, 0::2] = 5 / 8 * G + ring / 16
    e1 = 3 / 8 * (G + _shift(G, 1, 0)) + 1 / 8 * (_shift(G, 0, 1) + _shift(G, 1, -1))
    e2 = 3 / 8 * (G + _shift(G, 0, 1)) + 1 / 8 * (_shift(G, 1, 0) + _shift(G, -1, 1))
    e3 = 3 / 8 * (_shift(G, 1, 0) + _shift(G, 0, 1)) + 1 / 8 * (G + _shift(G, 1, 1))
    H[1::2, 0::2] = e1[:-1, :]
    H[0::2, 1::2] = e2[:, :-1]
    H[1::2, 1::2] = e3[:-1, :-1]
    return H


def lattice_limit(G, i, j):
    return G[i, j] / 2 + sum(G[i + a, j + b] for a, b in _DIRS) / 12


def lattice_basis(offset, depth):
    """Limit values of the hat at lattice ``offset`` on the dyadic points of T.

    Returns ``points`` (k, 2) in (xi, eta) and values (k,). The patch has
    corners (0,0), (1,0), (0,1) on the lattice.
    """
    N, o = 9, 4
    G = np.zeros((N, N))
    G[o + offset[0], o + offset[1]] = 1.0
    for _ in range(depth):
        G = lattice_refine(G)
    s = 2**depth
    pts, vals = [], []
    for p in range(s + 1):
        for q in range(s + 1 - p):
            pts.append((p / s, q / s))
            vals.append(lattice_limit(G, o * s + p, o * s + q))
    return np.array(pts), np.array(vals)


def random_params(n, seed=0):
    rng = np.random.default_rng(seed)
    p = rng.random((n, 2))
    flip = p.sum(axis=1) > 1
    p[flip] = 1 - p[flip]
    return p[:, 0], p[:, 1]


def child_of(xi, eta):
    """Child face index (0..3) of a parameter and its coordinates in that child."""
    if xi + eta <= 0.5:
        return 0, 2 * xi, 2 * eta
    if xi >= 0.5:
        return 1, 2 * xi - 1, 2 * eta
    if eta >= 0.5:
        return 2, 2 * xi, 2 * eta - 1
    return 3, 1 - 2 * xi, 1 - 2 * eta


def class_samples():
    """(label, mesh, faces) covering every patch class and valences 3..12."""
    grid, _ = planar_grid(8, 8)
    grid = grid.with_positions(grid.positions + np.random.default_rng(0).normal(0, 0.05, grid.positions.shape))
    out = [("regular", grid, [f for f in range(grid.n_faces) if patch_context(grid, f).patch_class == "regular"])]
    for n in (3, 4, 5, 7, 8, 9, 10, 11, 12):  # valence 6 is regular
        m = fan_disc(n, steps=3, lift=0.4)
        out.append((f"irregular-{n}", m, [f for f in range(m.n_faces) if patch_context(m, f).patch_class == "irregular"]))
    cyl = generate_test_mesh("quarter_cylinder", 1)
    sph = generate_test_mesh("octant_sphere", 1)
    for cls in ("sub-boundary", "boundary"):
        for m in (cyl, sph):
            out.append((cls, m, [f for f in range(m.n_faces) if patch_context(m, f).patch_class == cls]))
    return out


def dense_assembly(mesh, source, rule):
    """Face-by-face reference assembly into dense arrays."""
    n = mesh.n_vertices
    K, M, B = np.zeros((n, n)), np.zeros((n, n)), np.zeros(n)
    xi, eta = rule.points[:, 0], rule.points[:, 1]
    for f in range(mesh.n_faces):
        be = basis_functions(mesh, f, xi, eta)
        st = be.stencil
        cp = mesh.positions[st]
        for q in range(len(xi)):
            s = make_sample(be.values[q] @ cp, be.d_xi[q] @ cp, be.d_eta[q] @ cp)
            w = rule.weights[q] * s.area_element
            grads = [tangential_gradient(s, be.d_xi[q, j], be.d_eta[q, j]) for j in range(len(st))]
            fval = source(s.position[None])[0]
            for a, i in enumerate(st):
                B[i] += w * fval * be.values[q, a]
                for b, j in enumerate(st):
                    M[i, j] -= w * be.values[q, a] * be.values[q, b]
                    K[i, j] += w * grads[a] @ grads[b]
    return K, M, B
