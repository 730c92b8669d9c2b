"""Galerkin assembly of stiffness, mass and load, and the mixed block systems.

Sign convention: ``M`` holds ``-∫ φ_i φ_j``, so the mixed systems read

* order 2: ``K_II U_I = B_I - K_IB U_B``
* order 4: ``K_I: U + M_I: V = 0`` and ``K V = B``
* order 6: ``K_I: U + M_I: V = 0``, ``K V + M W = 0`` and ``K W = B``

Fields without Dirichlet data (every field on a closed surface, and ``V``
on open surfaces) carry one Lagrange multiplier fixing their mass-weighted
mean to zero, which removes the constant null space of ``K``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse as sp

from .basis import PatchBasis
from .geometry import iter_samples
from .mesh import INTERIOR, ControlMesh
from .quadrature import QuadratureRule, quadrature

logger = logging.getLogger(__name__)

ORDERS = (2, 4, 6)


@dataclass
class SystemBlocks:
    """Assembled ``K``, ``M`` (negative semidefinite) and load ``B``.

    ``interior``/``boundary`` split the control vertices into the unknowns of
    a Dirichlet problem and the constrained ones.
    """

    K: sp.csr_matrix
    M: sp.csr_matrix
    B: np.ndarray
    interior: np.ndarray
    boundary: np.ndarray
    method: str = "iga_loop"

    @property
    def n(self):
        return self.K.shape[0]

    @property
    def closed(self):
        return len(self.boundary) == 0

    def mean_weights(self):
        """``c`` with ``c @ u`` the integral of the field with coefficients ``u``."""
        return -np.asarray(self.M.sum(axis=1)).ravel()


def _csr(rows, cols, vals, n):
    A = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def _scatter(stencils, local):
    s = stencils.shape[1]
    rows = np.repeat(stencils, s, axis=1).ravel()
    cols = np.tile(stencils, (1, s)).ravel()
    return rows, cols, local.ravel()


def dof_split(mesh: ControlMesh):
    """Interior vertex indices and boundary (incl. corner) vertex indices."""
    interior = np.flatnonzero(mesh.vertex_class == INTERIOR)
    boundary = np.flatnonzero(mesh.vertex_class != INTERIOR)
    return interior, boundary


def assemble(
    mesh: ControlMesh,
    source=None,
    rule: QuadratureRule | str = "twelve_point",
    basis: PatchBasis | None = None,
) -> SystemBlocks:
    """Assemble ``K``, ``M`` and ``B`` on the limit surface of ``mesh``.

    Parameters
    ----------
    mesh : ControlMesh
        Analysis-ready mesh (at most one extraordinary vertex per patch).
    source : callable, optional
        ``f(points) -> values`` for an ``(N, 3)`` array of surface points;
        ``None`` gives a zero load.
    rule : QuadratureRule or str
    basis : PatchBasis, optional
        Precomputed tables at ``rule.points``.
    """
    if isinstance(rule, str):
        rule = quadrature(rule)
    n = mesh.n_vertices
    Kr, Mr = [], []
    B = np.zeros(n)
    for gs in iter_samples(mesh, rule, basis):
        g = gs.group
        nq, s = g.values.shape
        jxw = gs.jxw
        # mass: sum_q jxw * V_qs V_qt
        VV = (g.values[:, :, None] * g.values[:, None, :]).reshape(nq, s * s)
        Mloc = -(jxw @ VV).reshape(-1, s, s)
        # stiffness: sum_q jxw * D_q^T G^{-1} D_q with D_q = [d_xi; d_eta]
        D = np.stack([g.d_xi, g.d_eta], axis=1)  # (nq, 2, s)
        DD = np.einsum("qas,qbt->qabst", D, D).reshape(nq * 4, s * s)
        W = (jxw[:, :, None, None] * gs.sample.inverse).reshape(len(jxw), nq * 4)
        Kloc = (W @ DD).reshape(-1, s, s)
        for acc, loc in ((Kr, Kloc), (Mr, Mloc)):
            acc.append(_scatter(g.stencils, loc))
        if source is not None:
            fv = np.asarray(source(gs.sample.position.reshape(-1, 3)), dtype=float).reshape(jxw.shape)
            Bloc = (jxw * fv) @ g.values
            np.add.at(B, g.stencils.ravel(), Bloc.ravel())
    K = _csr(*(np.concatenate(x) for x in zip(*Kr)), n)
    M = _csr(*(np.concatenate(x) for x in zip(*Mr)), n)
    interior, boundary = dof_split(mesh)
    return SystemBlocks(K, M, B, interior, boundary)


@dataclass
class Field:
    """Placement of one unknown field inside the monolithic vector."""

    name: str
    offset: int
    dofs: np.ndarray  # vertex indices solved for
    multiplier: int | None = None  # position of its mean-constraint multiplier


@dataclass
class LinearSystem:
    """Monolithic block system plus the pieces needed to solve it blockwise.

    Attributes
    ----------
    order : int
    matrix : csr_matrix
        Full block matrix, constraint rows last.
    rhs : ndarray
    blocks : SystemBlocks
    fields : list of Field
        In block order ``U``, ``V``, ``W``.
    dirichlet : ndarray
        Control values of ``U`` on ``blocks.boundary``.
    """

    order: int
    matrix: sp.csr_matrix
    rhs: np.ndarray
    blocks: SystemBlocks
    fields: list
    dirichlet: np.ndarray
    n_constraints: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def size(self):
        return self.matrix.shape[0]

    def unpack(self, x):
        """Per-vertex coefficient vectors keyed by field name."""
        out = {}
        n = self.blocks.n
        for f in self.fields:
            full = np.zeros(n)
            full[f.dofs] = x[f.offset : f.offset + len(f.dofs)]
            if f.name == "U" and len(self.blocks.boundary):
                full[self.blocks.boundary] = self.dirichlet
            out[f.name] = full
        return out

    def pack(self, fields, multipliers=None):
        """Inverse of :meth:`unpack` (multipliers default to zero)."""
        x = np.zeros(self.size)
        for f in self.fields:
            x[f.offset : f.offset + len(f.dofs)] = fields[f.name][f.dofs]
            if f.multiplier is not None and multipliers is not None:
                x[f.multiplier] = multipliers.get(f.name, 0.0)
        return x

    def relative_residual(self, x):
        r = np.linalg.norm(self.matrix @ x - self.rhs)
        b = np.linalg.norm(self.rhs)
        return r / b if b > 0 else r


def build_system(blocks: SystemBlocks, order: int, dirichlet=None) -> LinearSystem:
    """Arrange ``blocks`` into the order-2/4/6 system.

    Parameters
    ----------
    blocks : SystemBlocks
    order : {2, 4, 6}
    dirichlet : array_like, optional
        Control values of ``u`` on ``blocks.boundary`` (zero by default).
    """
    if order not in ORDERS:
        raise ValueError(f"order must be one of {ORDERS}")
    if order == 6 and not blocks.closed:
        raise ValueError("sixth-order problems are supported on closed surfaces only")
    nb = len(blocks.boundary)
    g = np.zeros(nb) if dirichlet is None else np.asarray(dirichlet, dtype=float)
    if g.shape != (nb,):
        raise ValueError(f"expected {nb} Dirichlet values, got shape {g.shape}")

    K, M, B = blocks.K, blocks.M, blocks.B
    n = blocks.n
    I, Bd = blocks.interior, blocks.boundary
    c = blocks.mean_weights()
    all_dofs = np.arange(n)

    names = ["U", "V", "W"][: order // 2]
    fields = []
    off = 0
    for name in names:
        dofs = all_dofs if (name != "U" or blocks.closed) else I
        fields.append(Field(name, off, dofs))
        off += len(dofs)
    n_field = off
    # mean constraints: every field that has no Dirichlet rows
    for f in fields:
        if f.name != "U" or blocks.closed:
            f.multiplier = off
            off += 1
    size = off

    nf = len(fields)
    blk = [[None] * nf for _ in range(nf)]
    row_rhs = []
    # row block r is tested with field r's dofs and couples to field r+1 through M
    for r, f in enumerate(fields):
        te = f.dofs
        blk[r][r] = K[te][:, te]
        if r + 1 < nf:
            blk[r][r + 1] = M[te][:, fields[r + 1].dofs]
            b = np.zeros(len(te))
        else:
            b = B[te].copy()
        if f.name == "U" and not blocks.closed:
            b -= K[te][:, Bd] @ g
        row_rhs.append(b)
    A = sp.bmat(blk, format="csr")
    rhs = np.zeros(size)
    rhs[:n_field] = np.concatenate(row_rhs)

    n_con = size - n_field
    if n_con:
        C = sp.lil_matrix((n_con, n_field))
        k = 0
        for f in fields:
            if f.multiplier is not None:
                C[k, f.offset : f.offset + len(f.dofs)] = c[f.dofs]
                k += 1
        C = C.tocsr()
        A = sp.bmat([[A, C.T], [C, None]], format="csr")
    A.sum_duplicates()
    A.sort_indices()
    return LinearSystem(order, A, rhs, blocks, fields, g, n_con, {"mean_weights": c})


def dump_matrix(system_or_matrix, path, comment=""):
    """Write a sparse matrix in MatrixMarket coordinate format."""
    A = system_or_matrix.matrix if isinstance(system_or_matrix, LinearSystem) else system_or_matrix
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), comment=comment, precision=17)
