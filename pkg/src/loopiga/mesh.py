"""Triangle control meshes with half-edge connectivity.

A :class:`ControlMesh` is immutable once built. Connectivity is stored in
flat half-edge arrays: half-edge ``h = 3*f + i`` runs from ``faces[f, i]`` to
``faces[f, (i + 1) % 3]``, ``next(h)`` stays inside face ``f`` and ``twin(h)``
is ``-1`` on the boundary.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

INTERIOR = 0
BOUNDARY = 1
CORNER = 2

EDGE_INTERIOR = 0
EDGE_SUB_BOUNDARY = 1
EDGE_BOUNDARY = 2

VERTEX_CLASS_NAMES = {INTERIOR: "interior", BOUNDARY: "boundary", CORNER: "corner"}
EDGE_CLASS_NAMES = {
    EDGE_INTERIOR: "interior",
    EDGE_SUB_BOUNDARY: "sub-boundary",
    EDGE_BOUNDARY: "boundary",
}

#: turning angle (degrees) above which an untagged boundary vertex becomes a corner
CORNER_TURNING_ANGLE = 30.0


class MeshError(ValueError):
    """Raised for malformed, non-triangular or non-manifold meshes."""


@dataclass(frozen=True)
class RingNeighborhood:
    """Ordered one-ring of a vertex.

    For interior vertices ``vertices`` is a closed cycle; for boundary
    vertices it is an open chain whose first and last entries are the two
    boundary neighbours. Consecutive entries ``a, b`` always form the face
    ``(center, a, b)``.
    """

    center: int
    vertices: tuple
    closed: bool

    @property
    def valence(self) -> int:
        return len(self.vertices)


def _orient_faces(faces):
    """Flip faces so that all twins run in opposite directions.

    Returns the reoriented copy; raises MeshError when the surface is not
    orientable.
    """
    faces = faces.copy()
    nf = len(faces)
    edge_faces = {}
    for f, tri in enumerate(faces):
        for i in range(3):
            a, b = int(tri[i]), int(tri[(i + 1) % 3])
            edge_faces.setdefault((min(a, b), max(a, b)), []).append(f)
    for key, fs in edge_faces.items():
        if len(fs) > 2:
            raise MeshError(f"non-manifold edge {key}: {len(fs)} incident faces")

    def directed(f, a, b):
        tri = faces[f]
        for i in range(3):
            if tri[i] == a and tri[(i + 1) % 3] == b:
                return True
        return False

    seen = np.zeros(nf, dtype=bool)
    for seed in range(nf):
        if seen[seed]:
            continue
        seen[seed] = True
        stack = [seed]
        while stack:
            f = stack.pop()
            tri = faces[f]
            for i in range(3):
                a, b = int(tri[i]), int(tri[(i + 1) % 3])
                for g in edge_faces[(min(a, b), max(a, b))]:
                    if g == f:
                        continue
                    same = directed(g, a, b)
                    if not seen[g]:
                        if same:
                            faces[g] = faces[g][::-1]
                        seen[g] = True
                        stack.append(g)
                    elif same:
                        raise MeshError("surface is not orientable")
    return faces


class ControlMesh:
    """Manifold triangle mesh with topological vertex and edge classes.

    Parameters
    ----------
    positions : array_like, shape (V, 3)
        Vertex coordinates.
    faces : array_like of int, shape (F, 3)
        Consistently oriented triangles.
    corners : array_like of int, optional
        Boundary vertices to tag as corners. When omitted, boundary vertices
        whose turning angle exceeds ``CORNER_TURNING_ANGLE`` degrees are used.
    corner_angles : array_like, shape (V,), optional
        Sector angle at each corner. Computed from ``positions`` when omitted;
        subdivision carries the level-0 values forward so that the scheme stays
        a fixed linear operator.
    level : int
        Subdivision depth of this mesh.
    """

    def __init__(self, positions, faces, corners=None, corner_angles=None, level=0):
        positions = np.array(positions, dtype=float)
        faces = np.array(faces, dtype=np.int64).reshape(-1, 3)
        if positions.ndim != 2 or positions.shape[1] != 3:
            raise MeshError("positions must have shape (V, 3)")
        nv = len(positions)
        if faces.size and (faces.min() < 0 or faces.max() >= nv):
            raise MeshError("face index out of range")
        if np.any(faces[:, 0] == faces[:, 1]) or np.any(faces[:, 1] == faces[:, 2]) or np.any(
            faces[:, 0] == faces[:, 2]
        ):
            raise MeshError("degenerate face with repeated vertex")
        positions.flags.writeable = False
        faces.flags.writeable = False
        self.positions = positions
        self.faces = faces
        self.level = int(level)
        self._build_halfedges()
        self._classify(corners, corner_angles)

    # ------------------------------------------------------------------ build
    def _build_halfedges(self):
        nv, nf = len(self.positions), len(self.faces)
        origin = self.faces.ravel()
        dest = self.faces[:, [1, 2, 0]].ravel()
        key = origin * nv + dest
        order = np.argsort(key, kind="stable")
        skey = key[order]
        if np.any(skey[1:] == skey[:-1]):
            raise MeshError("inconsistent orientation or non-manifold edge")
        rkey = dest * nv + origin
        pos = np.searchsorted(skey, rkey)
        pos = np.minimum(pos, len(skey) - 1)
        found = skey[pos] == rkey
        twin = np.where(found, order[pos], -1)
        h = np.arange(3 * nf)
        self.he_origin = origin
        self.he_dest = dest
        self.he_next = 3 * (h // 3) + (h + 1) % 3
        self.he_twin = twin

        # undirected edges, sorted lexicographically
        lo, hi = np.minimum(origin, dest), np.maximum(origin, dest)
        ukey = lo * nv + hi
        uniq, inv, counts = np.unique(ukey, return_inverse=True, return_counts=True)
        if np.any(counts > 2):
            raise MeshError("non-manifold edge with more than two incident faces")
        self.edges = np.stack([uniq // nv, uniq % nv], axis=1)
        self.he_edge = inv.ravel()
        ne = len(uniq)
        edge_faces = -np.ones((ne, 2), dtype=np.int64)
        edge_opposite = -np.ones((ne, 2), dtype=np.int64)
        # first slot takes the half-edge running lo -> hi when it exists
        forward = origin < dest
        slot = np.where(forward, 0, 1)
        edge_faces[self.he_edge, slot] = h // 3
        edge_opposite[self.he_edge, slot] = self.faces.ravel()[3 * (h // 3) + (h + 2) % 3]
        # boundary edges traversed hi -> lo: move face into slot 0
        only1 = (edge_faces[:, 0] < 0) & (edge_faces[:, 1] >= 0)
        edge_faces[only1, 0] = edge_faces[only1, 1]
        edge_faces[only1, 1] = -1
        edge_opposite[only1, 0] = edge_opposite[only1, 1]
        edge_opposite[only1, 1] = -1
        self.edge_faces = edge_faces
        self.edge_opposite = edge_opposite
        self.edge_is_boundary = edge_faces[:, 1] < 0

        # one outgoing half-edge per vertex; boundary vertices get their
        # boundary half-edge so ring walks cover the whole fan
        vertex_he = -np.ones(nv, dtype=np.int64)
        vertex_he[origin[::-1]] = h[::-1]
        bnd = twin < 0
        nbnd_out = np.bincount(origin[bnd], minlength=nv)
        if np.any(nbnd_out > 1):
            raise MeshError("non-manifold vertex (more than one boundary fan)")
        vertex_he[origin[bnd]] = h[bnd]
        self.vertex_he = vertex_he
        self.valence = np.bincount(self.edges.ravel(), minlength=nv)
        self.face_count = np.bincount(origin, minlength=nv)
        isolated = vertex_he < 0
        if np.any(isolated):
            raise MeshError(f"{int(isolated.sum())} vertices are not referenced by any face")

    def _classify(self, corners, corner_angles):
        nv = len(self.positions)
        on_boundary = np.zeros(nv, dtype=bool)
        bmask = self.he_twin < 0
        on_boundary[self.he_origin[bmask]] = True
        # boundary neighbours: dest of outgoing and origin of incoming boundary half-edge
        bnext = -np.ones(nv, dtype=np.int64)
        bprev = -np.ones(nv, dtype=np.int64)
        bnext[self.he_origin[bmask]] = self.he_dest[bmask]
        bprev[self.he_dest[bmask]] = self.he_origin[bmask]
        self.boundary_next = bnext
        self.boundary_prev = bprev

        sector = self._sector_angles()
        vclass = np.where(on_boundary, BOUNDARY, INTERIOR).astype(np.int8)
        if corners is None:
            idx = np.flatnonzero(on_boundary)
            p = self.positions
            d1 = p[idx] - p[bprev[idx]]
            d2 = p[bnext[idx]] - p[idx]
            c = np.einsum("ij,ij->i", d1, d2) / (
                np.linalg.norm(d1, axis=1) * np.linalg.norm(d2, axis=1)
            )
            turning = np.degrees(np.arccos(np.clip(c, -1.0, 1.0)))
            corners = idx[turning > CORNER_TURNING_ANGLE]
        corners = np.asarray(corners, dtype=np.int64).ravel()
        if corners.size:
            if np.any(~on_boundary[corners]):
                raise MeshError("corner flags must refer to boundary vertices")
            vclass[corners] = CORNER
        vclass.flags.writeable = False
        self.vertex_class = vclass

        if corner_angles is None:
            angles = np.where(vclass == CORNER, sector, 0.0)
        else:
            angles = np.array(corner_angles, dtype=float)
            if angles.shape != (nv,):
                raise MeshError("corner_angles must have one entry per vertex")
            angles = np.where(vclass == CORNER, angles, 0.0)
        angles.flags.writeable = False
        self.corner_angles = angles

        ecls = np.full(len(self.edges), EDGE_INTERIOR, dtype=np.int8)
        touches = (vclass[self.edges[:, 0]] != INTERIOR) | (vclass[self.edges[:, 1]] != INTERIOR)
        ecls[touches] = EDGE_SUB_BOUNDARY
        ecls[self.edge_is_boundary] = EDGE_BOUNDARY
        ecls.flags.writeable = False
        self.edge_class = ecls

    def _sector_angles(self):
        p = self.positions
        tri = p[self.faces]
        out = np.zeros(len(p))
        for i in range(3):
            a = tri[:, (i + 1) % 3] - tri[:, i]
            b = tri[:, (i + 2) % 3] - tri[:, i]
            norm = np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
            # collapsed triangles contribute no angle
            cosang = np.divide(np.einsum("ij,ij->i", a, b), norm, out=np.ones_like(norm), where=norm > 0)
            np.add.at(out, self.faces[:, i], np.arccos(np.clip(cosang, -1.0, 1.0)))
        return out

    # ------------------------------------------------------------- properties
    @property
    def n_vertices(self) -> int:
        return len(self.positions)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_faces

    @property
    def is_closed(self) -> bool:
        return not np.any(self.edge_is_boundary)

    @property
    def boundary_vertices(self):
        return np.flatnonzero(self.vertex_class != INTERIOR)

    @property
    def interior_vertices(self):
        return np.flatnonzero(self.vertex_class == INTERIOR)

    @property
    def corner_vertices(self):
        return np.flatnonzero(self.vertex_class == CORNER)

    def max_edge_length(self) -> float:
        d = self.positions[self.edges[:, 0]] - self.positions[self.edges[:, 1]]
        return float(np.sqrt((d * d).sum(axis=1)).max())

    def with_positions(self, positions) -> "ControlMesh":
        """Same topology, classes and corner angles with new coordinates."""
        return ControlMesh(
            positions,
            self.faces,
            corners=self.corner_vertices,
            corner_angles=self.corner_angles,
            level=self.level,
        )

    # ----------------------------------------------------------------- rings
    @cached_property
    def _rings(self):
        """Per-vertex ordered neighbours and incident faces."""
        nxt, twin, dest = self.he_next, self.he_twin, self.he_dest
        rings, ring_faces = [], []
        nv = self.n_vertices
        for v in range(nv):
            h0 = int(self.vertex_he[v])
            boundary = twin[h0] < 0 or self.vertex_class[v] != INTERIOR
            if not boundary:
                # canonical start: outgoing half-edge with smallest destination
                h, best = h0, h0
                while True:
                    h = int(twin[nxt[nxt[h]]])
                    if h == h0:
                        break
                    if dest[h] < dest[best]:
                        best = h
                h0 = best
            verts, fs = [], []
            h = h0
            while True:
                verts.append(int(dest[h]))
                fs.append(h // 3)
                prev = int(nxt[nxt[h]])
                h = int(twin[prev])
                if h < 0:
                    verts.append(int(self.he_origin[prev]))
                    break
                if h == h0:
                    break
            if len(fs) != self.face_count[v]:
                raise MeshError(f"non-manifold vertex {v}: faces do not form a single fan")
            rings.append(tuple(verts))
            ring_faces.append(tuple(fs))
        return rings, ring_faces

    def one_ring(self, v: int) -> RingNeighborhood:
        """Ordered one-ring of vertex ``v``."""
        if not 0 <= v < self.n_vertices:
            raise IndexError(f"vertex index {v} out of range")
        verts = self._rings[0][v]
        return RingNeighborhood(int(v), verts, bool(self.vertex_class[v] == INTERIOR))

    def vertex_faces(self, v: int) -> tuple:
        """Faces incident to ``v`` in ring order."""
        return self._rings[1][v]

    def ring(self, v: int, depth: int = 1):
        """One-ring (depth 1) or two-ring vertex set (depth 2).

        Depth 1 returns a :class:`RingNeighborhood`; depth 2 returns the tuple
        of vertices reachable in at most two edges, excluding ``v``, ordered by
        discovery along the one-ring.
        """
        if depth == 1:
            return self.one_ring(v)
        if depth != 2:
            raise ValueError("depth must be 1 or 2")
        first = self.one_ring(v).vertices
        seen = {int(v)}
        out = []
        for w in first:
            if w not in seen:
                seen.add(w)
                out.append(w)
        for w in first:
            for x in self._rings[0][w]:
                if x not in seen:
                    seen.add(x)
                    out.append(x)
        return tuple(out)

    def __repr__(self):
        return (
            f"ControlMesh(V={self.n_vertices}, E={self.n_edges}, F={self.n_faces}, "
            f"level={self.level}, corners={len(self.corner_vertices)})"
        )


# ------------------------------------------------------------------------ IO
def _read_off(path):
    tokens = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                tokens.extend(line.split())
    if not tokens or not tokens[0].upper().endswith("OFF"):
        raise MeshError(f"{path}: missing OFF header")
    pos = 1
    try:
        nv, nf = int(tokens[pos]), int(tokens[pos + 1])
        pos += 3
        verts = np.array(tokens[pos : pos + 3 * nv], dtype=float).reshape(nv, 3)
        pos += 3 * nv
        faces = []
        for _ in range(nf):
            k = int(tokens[pos])
            if k != 3:
                raise MeshError(f"{path}: non-triangular face with {k} vertices")
            faces.append([int(t) for t in tokens[pos + 1 : pos + 4]])
            pos += 1 + k
    except (IndexError, ValueError) as exc:
        if isinstance(exc, MeshError):
            raise
        raise MeshError(f"{path}: malformed OFF data ({exc})") from exc
    return verts, np.array(faces, dtype=np.int64).reshape(-1, 3)


def _read_obj(path):
    verts, faces = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split("#", 1)[0].split()
            if not parts:
                continue
            try:
                if parts[0] == "v":
                    verts.append([float(x) for x in parts[1:4]])
                elif parts[0] == "f":
                    idx = [int(p.split("/")[0]) for p in parts[1:]]
                    if len(idx) != 3:
                        raise MeshError(f"{path}:{lineno}: non-triangular face")
                    faces.append([i - 1 if i > 0 else len(verts) + i for i in idx])
            except ValueError as exc:
                raise MeshError(f"{path}:{lineno}: {exc}") from exc
    return np.array(verts, dtype=float).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3)


def sidecar_path(path) -> Path:
    """Location of the optional corner-flag JSON next to a mesh file."""
    path = Path(path)
    return path.with_suffix(".json")


def load_mesh(path, format=None, corners_path=None) -> ControlMesh:
    """Read an OFF or OBJ triangle mesh.

    Corner flags are read from ``corners_path`` or, when present, from a JSON
    sidecar with the same stem holding ``{"corners": [...]}`` and optionally
    ``"corner_angles"`` (one sector angle per listed corner). Faces whose
    orientation disagrees with their neighbours are flipped.
    """
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).upper()
    if fmt == "OFF":
        verts, faces = _read_off(path)
    elif fmt == "OBJ":
        verts, faces = _read_obj(path)
    else:
        raise MeshError(f"unsupported mesh format {fmt!r}")
    faces = _orient_faces(faces)
    corners = angles = None
    side = Path(corners_path) if corners_path else sidecar_path(path)
    if side.exists():
        meta = json.loads(side.read_text())
        corners = meta.get("corners", [])
        if "corner_angles" in meta:
            if len(meta["corner_angles"]) != len(corners):
                raise MeshError(f"{side}: corner_angles must match corners")
            angles = np.zeros(len(verts))
            angles[np.asarray(corners, dtype=np.int64)] = meta["corner_angles"]
    return ControlMesh(verts, faces, corners=corners, corner_angles=angles)


def save_mesh(mesh: ControlMesh, path, format=None, write_corners=True) -> None:
    """Write positions and triangles as OFF or OBJ, plus a corner sidecar."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).upper()
    with open(path, "w") as fh:
        if fmt == "OFF":
            fh.write(f"OFF\n{mesh.n_vertices} {mesh.n_faces} {mesh.n_edges}\n")
            for p in mesh.positions:
                fh.write("%.17g %.17g %.17g\n" % tuple(p))
            for t in mesh.faces:
                fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")
        elif fmt == "OBJ":
            for p in mesh.positions:
                fh.write("v %.17g %.17g %.17g\n" % tuple(p))
            for t in mesh.faces:
                fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")
        else:
            raise MeshError(f"unsupported mesh format {fmt!r}")
    if write_corners and len(mesh.corner_vertices):
        cv = mesh.corner_vertices
        meta = {"corners": cv.tolist(), "corner_angles": mesh.corner_angles[cv].tolist()}
        sidecar_path(path).write_text(json.dumps(meta))
