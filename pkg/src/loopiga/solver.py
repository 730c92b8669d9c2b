"""Direct and iterative solves of the assembled systems.

The mixed systems are block upper triangular with ``K`` blocks on the
diagonal, so the default strategy solves the last field first and
substitutes upward; every step is a Dirichlet Laplace solve (SPD) or a
mean-constrained one. The monolithic block system is kept as a cross-check.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import LinearSystem

logger = logging.getLogger(__name__)

METHODS = ("direct", "iterative")
STRATEGIES = ("block", "monolithic")
CG_RTOL = 1e-12


class SolverError(RuntimeError):
    """Factorization failure, non-convergence, or residual above tolerance."""


@dataclass
class SolveReport:
    """Solution fields with diagnostics.

    ``fields`` maps ``"U"``, ``"V"``, ``"W"`` to per-vertex coefficient
    vectors (``U`` includes its Dirichlet values). ``residual`` is the
    relative residual of the monolithic system.
    """

    fields: dict
    residual: float
    iterations: int
    seconds: float
    method: str
    strategy: str
    multipliers: dict = field(default_factory=dict)
    vector: np.ndarray | None = None

    @property
    def U(self):
        return self.fields["U"]


class _LaplaceSolver:
    """Repeated solves with one Laplace block, optionally mean-constrained.

    Solves ``K x = b`` (SPD) or ``[[K, c], [c^T, 0]] [x; lam] = [b; 0]``.
    """

    def __init__(self, K, c=None, method="direct"):
        self.K = K.tocsr()
        self.c = c
        self.method = method
        self.iterations = 0
        n = K.shape[0]
        if method == "direct":
            A = self.K
            if c is not None:
                cc = sp.csr_matrix(c.reshape(1, -1))
                A = sp.bmat([[self.K, cc.T], [cc, None]], format="csc")
            try:
                self._lu = spla.splu(A.tocsc())
            except RuntimeError as exc:  # exactly singular
                raise SolverError(f"factorization failed: {exc}") from exc
        elif method == "iterative":
            d = self.K.diagonal()
            if np.any(d <= 0):
                raise SolverError("nonpositive diagonal; cannot precondition")
            self._P = spla.LinearOperator((n, n), matvec=lambda x: x / d, dtype=float)
        else:
            raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")

    def solve(self, b):
        n = self.K.shape[0]
        if self.method == "direct":
            if self.c is None:
                return self._lu.solve(b), None
            sol = self._lu.solve(np.append(b, 0.0))
            return sol[:n], float(sol[n])
        lam = None
        rhs = b
        if self.c is not None:
            # K has constants in its kernel: split b into range(K) and c
            lam = float(b.sum() / self.c.sum())
            rhs = b - lam * self.c
        x, info = spla.cg(self.K, rhs, rtol=CG_RTOL, atol=0.0, maxiter=10 * n, M=self._P,
                          callback=self._count)
        if info != 0:
            raise SolverError(f"conjugate gradient did not converge (info={info})")
        if self.c is not None:
            x = x - (self.c @ x) / self.c.sum()
        return x, lam

    def _count(self, _):
        self.iterations += 1


def _solve_block(system: LinearSystem, method):
    blocks = system.blocks
    K, M = blocks.K, blocks.M
    c = system.meta["mean_weights"]
    fields = system.fields
    cache = {}

    def laplace(f):
        constrained = f.multiplier is not None
        key = (constrained, len(f.dofs))
        if key not in cache:
            Kf = K[f.dofs][:, f.dofs]
            cache[key] = _LaplaceSolver(Kf, c[f.dofs] if constrained else None, method)
        return cache[key]

    sols, mults = {}, {}
    # last field first, then substitute upward
    for r in range(len(fields) - 1, -1, -1):
        f = fields[r]
        lo = f.offset
        b = system.rhs[lo : lo + len(f.dofs)].copy()
        if r + 1 < len(fields):
            nxt = fields[r + 1]
            b -= M[f.dofs][:, nxt.dofs] @ sols[nxt.name]
        x, lam = laplace(f).solve(b)
        sols[f.name] = x
        if lam is not None:
            mults[f.name] = lam
    x = np.zeros(system.size)
    for f in fields:
        x[f.offset : f.offset + len(f.dofs)] = sols[f.name]
        if f.multiplier is not None:
            x[f.multiplier] = mults[f.name]
    iters = sum(s.iterations for s in cache.values())
    return x, iters


def _solve_monolithic(system: LinearSystem, method):
    A = system.matrix
    if method == "direct":
        try:
            return spla.splu(A.tocsc()).solve(system.rhs), 0
        except RuntimeError as exc:
            raise SolverError(f"factorization failed: {exc}") from exc
    count = [0]
    ilu = spla.spilu(A.tocsc(), drop_tol=1e-6, fill_factor=20)
    P = spla.LinearOperator(A.shape, matvec=ilu.solve, dtype=float)
    x, info = spla.gmres(A, system.rhs, rtol=CG_RTOL, atol=0.0, restart=200,
                         maxiter=10 * A.shape[0], M=P, callback=lambda _: count.__setitem__(0, count[0] + 1),
                         callback_type="pr_norm")
    if info != 0:
        raise SolverError(f"GMRES did not converge (info={info})")
    return x, count[0]


def solve(system: LinearSystem, method="direct", strategy="block", tol=1e-10) -> SolveReport:
    """Solve ``system`` and check the relative residual against ``tol``.

    Parameters
    ----------
    system : LinearSystem
    method : {'direct', 'iterative'}
        Sparse LU, or Jacobi-preconditioned CG (GMRES for the monolithic path).
    strategy : {'block', 'monolithic'}
    tol : float
        Largest accepted relative residual.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    t0 = time.perf_counter()
    if strategy == "block":
        x, iters = _solve_block(system, method)
    else:
        x, iters = _solve_monolithic(system, method)
    seconds = time.perf_counter() - t0
    res = system.relative_residual(x)
    if not np.isfinite(res) or res > tol:
        raise SolverError(f"relative residual {res:.3e} exceeds tolerance {tol:.1e}")
    mults = {f.name: float(x[f.multiplier]) for f in system.fields if f.multiplier is not None}
    logger.debug("solved order-%d system of size %d: residual %.2e", system.order, system.size, res)
    return SolveReport(system.unpack(x), res, iters, seconds, method, strategy, mults, x)
