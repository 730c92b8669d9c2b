import numpy as np
import pytest
import scipy.sparse as sp

from loopiga.assembly import SystemBlocks, assemble, build_system
from loopiga.generators import generate_test_mesh
from loopiga.solver import METHODS, STRATEGIES, SolverError, _LaplaceSolver, solve


def source(p):
    return p[:, 0] * p[:, 1] * p[:, 2] + 0.3 * np.sin(3 * p[:, 2])


@pytest.fixture(scope="module")
def cylinder():
    return assemble(generate_test_mesh("quarter_cylinder", 1), source)


@pytest.fixture(scope="module")
def sphere():
    return assemble(generate_test_mesh("sphere", 1), lambda p: p[:, 0] * p[:, 1] * p[:, 2])


@pytest.mark.parametrize("method", METHODS)
def test_random_spd_matches_dense_oracle(method):
    rng = np.random.default_rng(0)
    Q = rng.normal(size=(10, 10))
    A = Q @ Q.T + 10 * np.eye(10)
    b = rng.normal(size=10)
    x, lam = _LaplaceSolver(sp.csr_matrix(A), method=method).solve(b)
    assert lam is None
    assert np.allclose(x, np.linalg.solve(A, b), atol=1e-10, rtol=0)


@pytest.mark.parametrize("method", METHODS)
def test_identity_like_system(method):
    rng = np.random.default_rng(1)
    A = np.diag(rng.uniform(1, 2, 30))
    x, _ = _LaplaceSolver(sp.csr_matrix(A), method=method).solve(A @ np.ones(30))
    assert np.allclose(x, 1.0, atol=1e-12)


@pytest.mark.parametrize("method", METHODS)
def test_constrained_laplace_against_dense_saddle(method, sphere):
    K, c = sphere.K, sphere.mean_weights()
    b = sphere.B
    x, lam = _LaplaceSolver(K, c, method).solve(b)
    n = len(b)
    S = np.block([[K.toarray(), c[:, None]], [c[None], np.zeros((1, 1))]])
    ref = np.linalg.solve(S, np.append(b, 0.0))
    assert np.allclose(x, ref[:n], atol=1e-9 * np.abs(ref).max())
    assert lam == pytest.approx(ref[n], abs=1e-10)
    assert abs(c @ x) <= 1e-10 * np.abs(c) @ np.abs(x)


@pytest.mark.parametrize("order", [2, 4])
@pytest.mark.parametrize("method", METHODS)
def test_homogeneous_problem_gives_zero(order, method, cylinder):
    blocks = SystemBlocks(cylinder.K, cylinder.M, np.zeros(cylinder.n), cylinder.interior, cylinder.boundary)
    rep = solve(build_system(blocks, order), method)
    for name, vals in rep.fields.items():
        assert np.abs(vals).max() == 0.0, name


@pytest.mark.parametrize("order", [2, 4])
@pytest.mark.parametrize("method", METHODS)
def test_block_matches_monolithic_open(order, method, cylinder):
    g = np.linspace(-0.5, 0.5, len(cylinder.boundary))
    system = build_system(cylinder, order, g)
    a = solve(system, method, "block")
    b = solve(system, method, "monolithic")
    assert a.residual <= 1e-10 and b.residual <= 1e-10
    for name in a.fields:
        scale = np.abs(a.fields[name]).max()
        assert np.abs(a.fields[name] - b.fields[name]).max() <= 1e-8 * max(scale, 1.0)


@pytest.mark.parametrize("order", [2, 4, 6])
@pytest.mark.parametrize("method", METHODS)
def test_block_matches_monolithic_closed(order, method, sphere):
    system = build_system(sphere, order)
    a = solve(system, method, "block")
    b = solve(system, method, "monolithic")
    for name in a.fields:
        scale = np.abs(a.fields[name]).max()
        assert np.abs(a.fields[name] - b.fields[name]).max() <= 1e-8 * scale
    c = sphere.mean_weights()
    for f in system.fields:
        x = a.fields[f.name]
        assert abs(c @ x) <= 1e-10 * (np.abs(c) @ np.abs(x))


def test_block_solution_satisfies_dense_system(sphere):
    system = build_system(sphere, 6)
    rep = solve(system)
    A = system.matrix.toarray()
    ref = np.linalg.solve(A, system.rhs)
    assert np.allclose(rep.vector, ref, rtol=0, atol=1e-8 * np.abs(ref).max())


def test_report_contents(sphere):
    rep = solve(build_system(sphere, 4), "iterative")
    assert set(rep.fields) == {"U", "V"}
    assert set(rep.multipliers) == {"U", "V"}
    assert rep.iterations > 0 and rep.seconds >= 0
    assert rep.method == "iterative" and rep.strategy == "block"
    assert rep.U is rep.fields["U"]


def test_dirichlet_values_returned(cylinder):
    g = np.full(len(cylinder.boundary), 0.7)
    rep = solve(build_system(cylinder, 2, g))
    assert np.array_equal(rep.U[cylinder.boundary], g)


@pytest.mark.parametrize("strategy", STRATEGIES)
def test_singular_system_reported(strategy):
    # interior block is a pure-Neumann Laplacian; the boundary vertex is decoupled
    K = sp.csr_matrix(np.array([[1.0, -1.0, 0.0], [-1.0, 1.0, 0.0], [0.0, 0.0, 1.0]]))
    blocks = SystemBlocks(K, -sp.eye(3, format="csr"), np.array([1.0, -1.0, 0.0]), np.array([0, 1]), np.array([2]))
    with pytest.raises(SolverError):
        solve(build_system(blocks, 2), "direct", strategy)


def test_tolerance_enforced(cylinder):
    system = build_system(cylinder, 2)
    with pytest.raises(SolverError, match="residual"):
        solve(system, "direct", tol=1e-30)


def test_unknown_options(cylinder):
    system = build_system(cylinder, 2)
    with pytest.raises(ValueError):
        solve(system, "multigrid")
    with pytest.raises(ValueError):
        solve(system, strategy="schur")
    assert STRATEGIES == ("block", "monolithic")


def test_nonpositive_diagonal_rejected_for_cg():
    with pytest.raises(SolverError):
        _LaplaceSolver(sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 2.0]])), method="iterative")
