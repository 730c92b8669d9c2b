"""Piecewise-linear surface FEM on the triangulation of limit points.

Nodes sit at the limit positions of the control vertices, so both methods
discretize the same surface with the same number of unknowns. Element
stiffness and mass are exact for flat triangles; the load uses the
three-point rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import SystemBlocks, _csr, _scatter, dof_split
from .mesh import ControlMesh
from .quadrature import QuadratureRule, quadrature
from .subdivision import limit_positions

_P1_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
_P1_GRAD = np.array([[-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])  # d/dxi, d/deta of the hats


class DegenerateElementError(ValueError):
    """A triangle of the FEM mesh has (numerically) zero area."""


@dataclass
class LinearFemSpace:
    """Flat triangles through the limit points of a control mesh."""

    nodes: np.ndarray
    triangles: np.ndarray

    @classmethod
    def from_mesh(cls, mesh: ControlMesh):
        return cls(limit_positions(mesh), mesh.faces.copy())

    @property
    def n_nodes(self):
        return len(self.nodes)

    def element_geometry(self):
        """Edge vectors, inverse metrics and areas of every triangle."""
        p = self.nodes[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        g11 = np.einsum("fi,fi->f", e1, e1)
        g12 = np.einsum("fi,fi->f", e1, e2)
        g22 = np.einsum("fi,fi->f", e2, e2)
        det = g11 * g22 - g12 * g12
        scale = np.maximum(g11, g22)
        bad = det <= 1e-14 * scale * scale
        if np.any(bad):
            raise DegenerateElementError(f"zero-area triangle {int(np.flatnonzero(bad)[0])}")
        inv = np.stack([np.stack([g22, -g12], -1), np.stack([-g12, g11], -1)], -2) / det[:, None, None]
        return p[:, 0], e1, e2, inv, 0.5 * np.sqrt(det)

    def sample(self, rule: QuadratureRule):
        """Points ``(F, nq, 3)``, weights times Jacobian ``(F, nq)``, hat values ``(nq, 3)``."""
        p0, e1, e2, inv, area = self.element_geometry()
        xi, eta = rule.points[:, 0], rule.points[:, 1]
        pts = p0[:, None] + xi[None, :, None] * e1[:, None] + eta[None, :, None] * e2[:, None]
        hats = np.stack([1 - xi - eta, xi, eta], axis=1)
        return pts, 2.0 * area[:, None] * rule.weights[None, :], hats

    def gradients(self):
        """Surface gradients of the three hats on every triangle, ``(F, 3, 3)``."""
        _, e1, e2, inv, _ = self.element_geometry()
        ab = np.einsum("fab,bk->fak", inv, _P1_GRAD)  # contravariant components
        return ab[:, 0, :, None] * e1[:, None] + ab[:, 1, :, None] * e2[:, None]


def assemble_linear(mesh: ControlMesh, source=None, rule: QuadratureRule | str = "three_point") -> SystemBlocks:
    """P1 stiffness, mass (negative, as for the spline method) and load."""
    if isinstance(rule, str):
        rule = quadrature(rule)
    space = LinearFemSpace.from_mesh(mesh)
    _, _, _, inv, area = space.element_geometry()
    n = space.n_nodes
    Kloc = area[:, None, None] * np.einsum("ak,fab,bl->fkl", _P1_GRAD, inv, _P1_GRAD)
    Mloc = -area[:, None, None] * _P1_MASS
    K = _csr(*_scatter(space.triangles, Kloc), n)
    M = _csr(*_scatter(space.triangles, Mloc), n)
    B = np.zeros(n)
    if source is not None:
        pts, jxw, hats = space.sample(rule)
        fv = np.asarray(source(pts.reshape(-1, 3)), dtype=float).reshape(jxw.shape)
        np.add.at(B, space.triangles.ravel(), ((jxw * fv) @ hats).ravel())
    interior, boundary = dof_split(mesh)
    return SystemBlocks(K, M, B, interior, boundary, method="fem_linear")


def linear_errors(space: LinearFemSpace, coefficients, u, grad_u=None, rule: QuadratureRule | str = "twelve_point"):
    """L2 error and H1 seminorm error over the flat triangles.

    The exact gradient is projected onto each triangle's plane.
    """
    if isinstance(rule, str):
        rule = quadrature(rule)
    c = np.asarray(coefficients, dtype=float)
    pts, jxw, hats = space.sample(rule)
    uh = hats @ c[space.triangles].T  # (nq, F)
    diff = uh.T - u(pts.reshape(-1, 3)).reshape(jxw.shape)
    l2 = float(np.sqrt(np.sum(jxw * diff**2)))
    if grad_u is None:
        return l2, None
    G = space.gradients()
    guh = np.einsum("fk,fkd->fd", c[space.triangles], G)
    _, e1, e2, _, _ = space.element_geometry()
    nrm = np.cross(e1, e2)
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
    gu = grad_u(pts.reshape(-1, 3)).reshape(pts.shape)
    gu = gu - np.einsum("fqd,fd->fq", gu, nrm)[..., None] * nrm[:, None]
    h1 = float(np.sqrt(np.sum(jxw * np.sum((guh[:, None] - gu) ** 2, axis=-1))))
    return l2, h1
