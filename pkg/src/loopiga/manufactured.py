"""Manufactured solutions of the benchmark suites.

Each :class:`Manufactured` bundles the exact solution ``u`` (a function of
the ambient point), its ambient gradient, the source ``f`` derived on the
analytic surface, the problem order and the control mesh it lives on.
Sources are evaluated at limit-surface points as given, with no projection
onto the analytic surface.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SUITES = (
    "harmonic_quarter_cylinder",
    "harmonic_octant_sphere",
    "biharmonic_cylinder",
    "triharmonic_sphere",
)


@dataclass(frozen=True)
class Manufactured:
    """Exact pair ``(u, f)`` for one suite.

    ``u``, ``f`` map ``(N, 3)`` points to ``(N,)``; ``grad_u`` to ``(N, 3)``.
    """

    suite: str
    order: int
    mesh_kind: str
    u: object
    grad_u: object
    f: object
    mesh_options: dict = field(default_factory=dict)
    homogeneous: bool = True

    def boundary_values(self, points):
        """Dirichlet data for ``u`` at boundary points."""
        return self.u(points)


def _xyz(p):
    p = np.asarray(p, dtype=float)
    return p[..., 0], p[..., 1], p[..., 2]


def _theta(p):
    x, y, _ = _xyz(p)
    return np.arctan2(y, x)


def _grad_theta(p):
    x, y, _ = _xyz(p)
    r2 = x * x + y * y
    return np.stack([-y / r2, x / r2, np.zeros_like(x)], axis=-1)


# ------------------------------------------------------------------ suites
def _quarter_cylinder():
    def u(p):
        x, y, z = _xyz(p)
        return (1 - x) * (1 - y) * np.sin(np.pi * z)

    def grad_u(p):
        x, y, z = _xyz(p)
        s, c = np.sin(np.pi * z), np.cos(np.pi * z)
        return np.stack([-(1 - y) * s, -(1 - x) * s, np.pi * (1 - x) * (1 - y) * c], axis=-1)

    def f(p):
        t = _theta(p)
        z = _xyz(p)[2]
        c, s = np.cos(t), np.sin(t)
        g = (1 - c) * (1 - s)
        g2 = c + s - 4 * s * c
        return (np.pi**2 * g - g2) * np.sin(np.pi * z)

    return Manufactured("harmonic_quarter_cylinder", 2, "quarter_cylinder", u, grad_u, f)


def _xyz_solution(suite, order, kind, f_scale):
    def u(p):
        x, y, z = _xyz(p)
        return x * y * z

    def grad_u(p):
        x, y, z = _xyz(p)
        return np.stack([y * z, x * z, x * y], axis=-1)

    def f(p):
        return f_scale * u(p)

    return Manufactured(suite, order, kind, u, grad_u, f)


def _cylinder_biharmonic(height):
    # u = A(theta) Z(z), A = sin^2(2 theta), Z = sin^2(2 z); f = Δ²u with the flat Δ
    def u(p):
        t, z = _theta(p), _xyz(p)[2]
        return np.sin(2 * t) ** 2 * np.sin(2 * z) ** 2

    def grad_u(p):
        t, z = _theta(p), _xyz(p)[2]
        du_dt = 2 * np.sin(4 * t) * np.sin(2 * z) ** 2
        du_dz = 2 * np.sin(2 * t) ** 2 * np.sin(4 * z)
        ez = np.zeros(np.shape(t) + (3,))
        ez[..., 2] = 1.0
        return du_dt[..., None] * _grad_theta(p) + du_dz[..., None] * ez

    def f(p):
        t, z = _theta(p), _xyz(p)[2]
        A, Z = np.sin(2 * t) ** 2, np.sin(2 * z) ** 2
        c4t, c4z = np.cos(4 * t), np.cos(4 * z)
        return -128 * c4t * Z + 128 * c4t * c4z - 128 * A * c4z

    homogeneous = bool(np.isclose(np.sin(2 * height), 0.0) and np.isclose(np.sin(4 * height), 0.0))
    return Manufactured(
        "biharmonic_cylinder", 4, "full_cylinder", u, grad_u, f, {"height": float(height)}, homogeneous
    )


def manufactured(suite: str, **options) -> Manufactured:
    """Exact solution and source for ``suite``.

    ``biharmonic_cylinder`` accepts ``height``: ``pi`` (default) satisfies
    ``u = du/dn = 0`` on both boundary circles, ``1.0`` is the shorter
    cylinder whose top boundary carries nonzero data.
    """
    if suite == "harmonic_quarter_cylinder":
        return _quarter_cylinder()
    if suite == "harmonic_octant_sphere":
        return _xyz_solution(suite, 2, "octant_sphere", 12.0)
    if suite == "triharmonic_sphere":
        return _xyz_solution(suite, 6, "sphere", 1728.0)
    if suite == "biharmonic_cylinder":
        return _cylinder_biharmonic(options.get("height", np.pi))
    raise ValueError(f"unknown suite {suite!r}; expected one of {SUITES}")
