import numpy as np
import pytest
import scipy.linalg as sla

from spectral_partitions.eigensolver import (
    PenalizedOperator,
    dense_eigenvalues,
    eigen_residual,
    smallest_eigenpairs,
    solve_eigenpairs,
)
from spectral_partitions.errors import ConvergenceError, DimensionError
from spectral_partitions.grid import BC, GridSpec
from spectral_partitions.reference import Disk, rasterize
from spectral_partitions.studies import table_grid


def free_box_lambda1(g, L):
    return (2 / g.hx**2) * (1 - np.cos(np.pi * g.hx / L)) + (2 / g.hy**2) * (1 - np.cos(np.pi * g.hy / L))


def dense_oracle(g, phi, C):
    # independent assembly: explicit loops over the stencil
    n = g.size
    K = np.zeros((n, n))
    per = g.bc is BC.PERIODIC
    for j in range(g.ny):
        for i in range(g.nx):
            r = j * g.nx + i
            K[r, r] += 2 / g.hx**2 + 2 / g.hy**2 + C * (1 - phi[j, i])
            for di, dj, h in ((1, 0, g.hx), (-1, 0, g.hx), (0, 1, g.hy), (0, -1, g.hy)):
                ii, jj = i + di, j + dj
                if per:
                    ii, jj = ii % g.nx, jj % g.ny
                elif not (0 <= ii < g.nx and 0 <= jj < g.ny):
                    continue
                K[r, jj * g.nx + ii] -= 1 / h**2
    return sla.eigh(K, eigvals_only=True)


def test_free_box_first_eigenvalue():
    L = 3.0
    g = GridSpec.centered_square(L, 30)
    op = PenalizedOperator(g, np.ones(g.shape), 1e4)
    pair = smallest_eigenpairs(op, 1, 1e-10)[0]
    assert pair.lam == pytest.approx(free_box_lambda1(g, L), rel=1e-10)


def test_anisotropic_free_box():
    g = GridSpec(2.0, 1.0, 24, 11)
    op = PenalizedOperator(g, np.ones(g.shape), 5.0)
    lam = smallest_eigenpairs(op, 1, 1e-10)[0].lam
    expect = (2 / g.hx**2) * (1 - np.cos(np.pi * g.hx / 2.0)) + (2 / g.hy**2) * (1 - np.cos(np.pi * g.hy / 1.0))
    assert lam == pytest.approx(expect, rel=1e-10)


def test_zero_density_bounded_by_C():
    g = GridSpec.centered_square(3.0, 12)
    op = PenalizedOperator(g, g.zeros(), 1e6)
    assert smallest_eigenpairs(op, 1)[0].lam >= 1e6


@pytest.mark.parametrize("method", ["lobpcg", "inverse"])
@pytest.mark.parametrize("bc", [BC.DIRICHLET, BC.PERIODIC])
def test_contracts_against_dense_oracle(method, bc):
    rng = np.random.default_rng(11)
    g = GridSpec(1.3, 1.0, 14, 12, bc)
    phi = rng.uniform(size=g.shape)
    op = PenalizedOperator(g, phi, 300.0)
    tol = 1e-9
    sol = solve_eigenpairs(op, 6, tol, seed=4, method=method)
    ref = dense_oracle(g, phi, 300.0)[:6]
    lam = np.array([p.lam for p in sol.pairs])
    assert np.allclose(lam, ref, rtol=1e-9)
    U = np.array([p.u.ravel() for p in sol.pairs])
    gram = g.cell_area * U @ U.T
    assert np.abs(gram - np.eye(6)).max() < 1e-8
    for p in sol.pairs:
        assert p.residual <= tol * max(1.0, p.lam)
        assert eigen_residual(op, p) <= tol * max(1.0, p.lam)
        assert p.u.ravel()[np.argmax(np.abs(p.u))] > 0
        rq = g.inner(op.apply(p.u.ravel()).reshape(g.shape), p.u)
        assert abs(rq - p.lam) <= 10 * tol * max(1.0, p.lam)


def test_deterministic_for_seed():
    g = GridSpec(1.0, 1.0, 15, 15, BC.PERIODIC)
    phi = np.random.default_rng(2).uniform(size=g.shape)
    op = PenalizedOperator(g, phi, 1e3)
    a = solve_eigenpairs(op, 3, seed=9)
    b = solve_eigenpairs(op, 3, seed=9)
    assert all(np.array_equal(p.u, q.u) and p.lam == q.lam for p, q in zip(a.pairs, b.pairs))


def test_clustered_pairs_span_same_subspace():
    # the disk has double eigenvalues: compare spectral projectors, not vectors
    g = GridSpec.centered_square(3.0, 19)
    phi = rasterize(Disk(1.0), g)
    op = PenalizedOperator(g, phi, 1e4)
    sol = solve_eigenpairs(op, 3, 1e-10)
    K = op.assemble().toarray()
    w, V = sla.eigh(K)
    P_ref = V[:, 1:3] @ V[:, 1:3].T
    U = np.array([p.u.ravel() for p in sol.pairs[1:3]]).T * np.sqrt(g.cell_area)
    assert np.abs(U @ U.T - P_ref).max() < 1e-7


def test_dimension_errors():
    g = GridSpec(1.0, 1.0, 3, 3)
    op = PenalizedOperator(g, np.ones(g.shape), 1.0)
    with pytest.raises(DimensionError):
        solve_eigenpairs(op, 9)
    with pytest.raises(DimensionError):
        PenalizedOperator(g, np.ones((2, 2)), 1.0)


@pytest.mark.parametrize("phi,C", [(1.5, 1.0), (-0.1, 1.0), (0.5, -1.0)])
def test_operator_validation(phi, C):
    g = GridSpec(1.0, 1.0, 3, 3)
    with pytest.raises(ValueError):
        PenalizedOperator(g, np.full(g.shape, phi), C)


def test_convergence_error_carries_residual():
    g = GridSpec(1.0, 1.0, 20, 20)
    phi = np.random.default_rng(0).uniform(size=g.shape)
    op = PenalizedOperator(g, phi, 1e3)
    with pytest.raises(ConvergenceError) as info:
        solve_eigenpairs(op, 2, 1e-12, preconditioner=None, max_applies=20)
    assert info.value.best_residual > 0


def test_residual_of_exact_and_perturbed_pairs():
    L = 2.0
    g = GridSpec(L, L, 25, 25)
    X, Y = g.mesh()
    u = np.sin(np.pi * X / L) * np.sin(np.pi * Y / L)
    u /= g.norm(u)
    lam = free_box_lambda1(g, L)
    op = PenalizedOperator(g, np.ones(g.shape), 10.0)
    from spectral_partitions.eigensolver import EigenPair

    assert eigen_residual(op, EigenPair(lam, u, 0.0)) <= 1e-10
    w = np.random.default_rng(1).standard_normal(g.shape)
    w -= g.inner(w, u) * u
    w /= g.norm(w)
    r = [eigen_residual(op, EigenPair(lam, u + e * w, 0.0)) for e in (1e-3, 1e-4)]
    assert 8 < r[0] / r[1] < 12
    rnd = np.random.default_rng(5).standard_normal(g.shape)
    rnd /= g.norm(rnd)
    rq = g.inner(op.apply(rnd.ravel()).reshape(g.shape), rnd)
    assert eigen_residual(op, EigenPair(rq, rnd, 0.0)) >= 0


def test_monotone_in_density_and_C():
    rng = np.random.default_rng(8)
    g = GridSpec(1.0, 1.0, 10, 10)
    for _ in range(5):
        phi = rng.uniform(size=g.shape)
        bigger = np.minimum(1.0, phi + rng.uniform(0, 0.5, size=g.shape))
        a = dense_eigenvalues(PenalizedOperator(g, phi, 200.0), 8)
        b = dense_eigenvalues(PenalizedOperator(g, bigger, 200.0), 8)
        assert np.all(b <= a + 1e-9)
        c = dense_eigenvalues(PenalizedOperator(g, phi, 2000.0), 8)
        assert np.all(c >= a - 1e-9)


def test_paper_table_value_disk_n200():
    # published: max relative error 5.5e-4 for the unit disk at N=200, C=1e6
    grid, phi = table_grid("disk", 200, "paper")
    sol = solve_eigenpairs(PenalizedOperator(grid, phi, 1e6), 10, 1e-9)
    lam = np.array([p.lam for p in sol.pairs])
    ref = Disk(1.0).eigenvalues(10)
    assert np.max(np.abs(lam - ref) / ref) == pytest.approx(5.5e-4, rel=0.1)
