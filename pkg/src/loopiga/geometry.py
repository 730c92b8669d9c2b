"""First fundamental form, tangential gradients and integrals on the limit surface.

All sample quantities are arrays with arbitrary leading shape, so a whole
group of patches times quadrature points is handled in one call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import PatchBasis, evaluate
from .mesh import ControlMesh
from .quadrature import QuadratureRule, quadrature

#: determinant of the metric below this times (edge length)^4 is degenerate
DEGENERATE_TOL = 1e-14


class DegenerateSampleError(ValueError):
    """Tangents are (numerically) parallel at a sample point."""


@dataclass
class SurfaceSample:
    """Limit-surface point with its first fundamental form.

    Attributes
    ----------
    position, x_u, x_v, normal : ndarray, shape (..., 3)
    g11, g12, g22, det : ndarray, shape (...)
        Metric coefficients and ``det = g11 g22 - g12^2``.
    inverse : ndarray, shape (..., 2, 2)
    area_element : ndarray
        ``sqrt(det)``.
    degenerate : ndarray of bool
    """

    position: np.ndarray
    x_u: np.ndarray
    x_v: np.ndarray
    g11: np.ndarray
    g12: np.ndarray
    g22: np.ndarray
    det: np.ndarray
    inverse: np.ndarray
    area_element: np.ndarray
    normal: np.ndarray
    degenerate: np.ndarray

    @property
    def metric(self):
        return np.stack(
            [np.stack([self.g11, self.g12], -1), np.stack([self.g12, self.g22], -1)], -2
        )


def make_sample(position, x_u, x_v, length_scale=1.0) -> SurfaceSample:
    """Build a :class:`SurfaceSample` from a point and its coordinate tangents."""
    x_u = np.asarray(x_u, dtype=float)
    x_v = np.asarray(x_v, dtype=float)
    g11 = np.einsum("...i,...i->...", x_u, x_u)
    g12 = np.einsum("...i,...i->...", x_u, x_v)
    g22 = np.einsum("...i,...i->...", x_v, x_v)
    det = g11 * g22 - g12 * g12
    degenerate = det <= DEGENERATE_TOL * np.asarray(length_scale, dtype=float) ** 4
    safe = np.where(degenerate, 1.0, det)
    inverse = np.stack([np.stack([g22, -g12], -1), np.stack([-g12, g11], -1)], -2) / safe[..., None, None]
    cross = np.cross(x_u, x_v)
    area = np.sqrt(np.maximum(det, 0.0))
    normal = cross / np.where(degenerate, 1.0, area)[..., None]
    return SurfaceSample(
        np.asarray(position, dtype=float), x_u, x_v, g11, g12, g22, det, inverse, area, normal, degenerate
    )


def _face_edge_scale(mesh, faces):
    p = mesh.positions[mesh.faces[faces]]
    d = np.linalg.norm(p - np.roll(p, 1, axis=-2), axis=-1)
    return d.mean(axis=-1)


def sample_surface(mesh: ControlMesh, face, xi, eta) -> SurfaceSample:
    """Sample the limit surface of ``mesh`` on one patch."""
    ev = evaluate(mesh, face, xi, eta)
    f = face.face if hasattr(face, "face") else int(face)
    return make_sample(ev.value, ev.d_xi, ev.d_eta, _face_edge_scale(mesh, f))


def tangential_gradient(sample: SurfaceSample, f_u, f_v):
    """Surface gradient ``[x_u, x_v] G^{-1} [f_u, f_v]^T`` of a scalar.

    ``f_u`` and ``f_v`` may carry extra trailing dimensions beyond the
    sample's shape (e.g. one column per basis function).
    """
    if np.any(sample.degenerate):
        raise DegenerateSampleError("tangential gradient at a degenerate sample")
    f_u = np.asarray(f_u, dtype=float)
    f_v = np.asarray(f_v, dtype=float)
    extra = f_u.ndim - sample.det.ndim
    inv = sample.inverse.reshape(sample.inverse.shape[:-2] + (1,) * extra + (2, 2))
    a = inv[..., 0, 0] * f_u + inv[..., 0, 1] * f_v
    b = inv[..., 1, 0] * f_u + inv[..., 1, 1] * f_v
    xu = sample.x_u.reshape(sample.x_u.shape[:-1] + (1,) * extra + (3,))
    xv = sample.x_v.reshape(sample.x_v.shape[:-1] + (1,) * extra + (3,))
    return a[..., None] * xu + b[..., None] * xv


@dataclass
class GroupSamples:
    """Quadrature samples of one basis group: arrays of shape (faces, nq, ...)."""

    group: object
    sample: SurfaceSample
    jxw: np.ndarray  # quadrature weight times area element


def iter_samples(mesh: ControlMesh, rule: QuadratureRule, basis: PatchBasis | None = None, chunk=20000):
    """Yield :class:`GroupSamples` covering every patch of ``mesh``.

    Raises :class:`DegenerateSampleError` naming the first degenerate patch.
    """
    if basis is None:
        basis = PatchBasis(mesh, rule.points)
    P = mesh.positions
    for g in basis.groups:
        for lo in range(0, len(g.faces), chunk):
            sl = slice(lo, lo + chunk)
            cp = P[g.stencils[sl]]  # (F, s, 3)
            x = np.einsum("qs,fsd->fqd", g.values, cp)
            xu = np.einsum("qs,fsd->fqd", g.d_xi, cp)
            xv = np.einsum("qs,fsd->fqd", g.d_eta, cp)
            scale = _face_edge_scale(mesh, g.faces[sl])[:, None]
            s = make_sample(x, xu, xv, scale)
            if np.any(s.degenerate):
                bad = g.faces[sl][np.any(s.degenerate, axis=1)][0]
                raise DegenerateSampleError(f"degenerate surface sample on patch {bad}")
            sub = _Slice(g, sl)
            yield GroupSamples(sub, s, s.area_element * rule.weights)


class _Slice:
    """View of a basis group restricted to a range of its faces."""

    def __init__(self, g, sl):
        self.faces = g.faces[sl]
        self.stencils = g.stencils[sl]
        self.values = g.values
        self.d_xi = g.d_xi
        self.d_eta = g.d_eta
        self.patch_class = g.patch_class


def surface_integral(mesh: ControlMesh, integrand, rule: QuadratureRule | str = "twelve_point", basis=None):
    """Integrate ``integrand(sample)`` over the limit surface.

    ``integrand`` receives a vectorized :class:`SurfaceSample` and returns an
    array of the sample's shape.
    """
    if isinstance(rule, str):
        rule = quadrature(rule)
    total = 0.0
    for gs in iter_samples(mesh, rule, basis):
        vals = np.broadcast_to(np.asarray(integrand(gs.sample), dtype=float), gs.jxw.shape)
        total += float(np.sum(gs.jxw * vals))
    return total


def surface_area(mesh: ControlMesh, rule="twelve_point", basis=None):
    """Area of the limit surface."""
    return surface_integral(mesh, lambda s: np.ones_like(s.det), rule, basis)
