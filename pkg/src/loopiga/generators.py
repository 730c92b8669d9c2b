"""Structured control meshes for the benchmark surfaces.

``resolution`` multiplies a base grid per kind, so ``resolution=2`` has the
same vertex and face counts as one subdivision step of ``resolution=1``:

==================  =============================  ==================
kind                base grid                      resolution=1 (V/F)
==================  =============================  ==================
quarter_cylinder    12 (theta) x 16 (z), z in [0,2]  221 / 384
octant_sphere       12 segments per boundary arc   91 / 144
full_cylinder       48 (theta) x 8 per unit height   432 / 768
sphere              octahedron, 12 segments/edge   578 / 1152
==================  =============================  ==================
"""

from __future__ import annotations

import numpy as np

from .mesh import ControlMesh
from .subdivision import fit_control_values

KINDS = ("quarter_cylinder", "octant_sphere", "full_cylinder", "sphere")


def _grid_faces(ni, nj, index):
    faces = []
    for j in range(nj):
        for i in range(ni):
            v00, v10 = index(i, j), index(i + 1, j)
            v01, v11 = index(i, j + 1), index(i + 1, j + 1)
            faces.append((v00, v10, v11))
            faces.append((v00, v11, v01))
    return np.array(faces, dtype=np.int64)


def quarter_cylinder(resolution=1, height=2.0):
    nt, nz = 12 * resolution, 16 * resolution
    theta = np.linspace(0.0, 0.5 * np.pi, nt + 1)
    z = np.linspace(0.0, height, nz + 1)
    T, Z = np.meshgrid(theta, z)
    pos = np.stack([np.cos(T).ravel(), np.sin(T).ravel(), Z.ravel()], axis=1)
    pos[np.isclose(pos, 0.0, atol=1e-15)] = 0.0

    def index(i, j):
        return j * (nt + 1) + i

    faces = _grid_faces(nt, nz, index)
    corners = [index(0, 0), index(nt, 0), index(0, nz), index(nt, nz)]
    return pos, faces, corners


def full_cylinder(resolution=1, height=1.0):
    nt = 48 * resolution
    nz = max(1, int(round(height * nt / (2.0 * np.pi))))
    theta = 2.0 * np.pi * np.arange(nt) / nt
    z = np.linspace(0.0, height, nz + 1)
    T, Z = np.meshgrid(theta, z)
    pos = np.stack([np.cos(T).ravel(), np.sin(T).ravel(), Z.ravel()], axis=1)

    def index(i, j):
        return j * nt + (i % nt)

    faces = _grid_faces(nt, nz, index)
    return pos, faces, []


def _octant(n, signs=(1, 1, 1)):
    """Barycentric grid on one octahedron face; integer lattice keys."""
    keys, faces = [], []
    idx = {}
    for i in range(n + 1):
        for j in range(n + 1 - i):
            idx[(i, j)] = len(keys)
            keys.append((signs[0] * i, signs[1] * j, signs[2] * (n - i - j)))
    for i in range(n):
        for j in range(n - i):
            faces.append((idx[(i, j)], idx[(i + 1, j)], idx[(i, j + 1)]))
            if i + j <= n - 2:
                faces.append((idx[(i + 1, j)], idx[(i + 1, j + 1)], idx[(i, j + 1)]))
    faces = np.array(faces, dtype=np.int64)
    if np.prod(signs) < 0:
        faces = faces[:, ::-1]
    return keys, faces


def _project(keys):
    p = np.array(keys, dtype=float)
    return p / np.linalg.norm(p, axis=1, keepdims=True)


def octant_sphere(resolution=1):
    n = 12 * resolution
    keys, faces = _octant(n)
    corners = [keys.index((n, 0, 0)), keys.index((0, n, 0)), keys.index((0, 0, n))]
    return _project(keys), faces, corners


def sphere(resolution=1):
    n = 12 * resolution
    lookup, keys, faces = {}, [], []
    for sx in (1, -1):
        for sy in (1, -1):
            for sz in (1, -1):
                okeys, ofaces = _octant(n, (sx, sy, sz))
                remap = []
                for k in okeys:
                    k = tuple(0 if c == 0 else c for c in k)
                    if k not in lookup:
                        lookup[k] = len(keys)
                        keys.append(k)
                    remap.append(lookup[k])
                faces.append(np.array(remap)[ofaces])
    return _project(keys), np.concatenate(faces), []


_BUILDERS = {
    "quarter_cylinder": quarter_cylinder,
    "octant_sphere": octant_sphere,
    "full_cylinder": full_cylinder,
    "sphere": sphere,
}


def generate_test_mesh(kind, resolution=1, fit_limit=False, **kwargs) -> ControlMesh:
    """Control mesh for one of the benchmark surfaces.

    Vertices are placed on the analytic surface and its boundary curves, and
    the patch corners are tagged. With ``fit_limit=True`` the control points
    are instead solved so that their *limit* positions land on those analytic
    points, which keeps the limit surface much closer to the analytic one.

    Parameters
    ----------
    kind : {'quarter_cylinder', 'octant_sphere', 'full_cylinder', 'sphere'}
    resolution : int
        Grid multiplier (>= 1).
    fit_limit : bool
    **kwargs
        ``height`` for the cylinders.
    """
    if kind not in _BUILDERS:
        raise ValueError(f"unknown mesh kind {kind!r}; expected one of {KINDS}")
    if int(resolution) < 1:
        raise ValueError("resolution must be >= 1")
    pos, faces, corners = _BUILDERS[kind](int(resolution), **kwargs)
    mesh = ControlMesh(pos, faces, corners=corners)
    if fit_limit:
        mesh = mesh.with_positions(fit_control_values(mesh, pos))
    return mesh
