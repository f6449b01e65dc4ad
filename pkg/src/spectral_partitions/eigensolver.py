"""Smallest eigenpairs of the penalized operator ``-Delta_h + C*(1 - phi)``.

Two matrix-free solvers share one contract:

* ``"lobpcg"`` (default): block locally optimal preconditioned conjugate
  gradient iteration with soft locking.  The default preconditioner is a
  sparse LU factorization of the slightly shifted operator, which keeps the
  iteration count flat in ``C``; Jacobi or a user callable can be used
  instead.
* ``"inverse"``: block inverse (shift-and-invert) subspace iteration whose
  inner solves are Jacobi-preconditioned conjugate gradients.

Eigenvectors are returned normalized in the discrete L2 norm
``hx*hy*sum(u**2) = 1``, with the entry of largest magnitude positive.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, DimensionError
from .grid import GridSpec, assemble_laplacian, laplacian_apply_block

log = logging.getLogger(__name__)

MAX_APPLIES_PER_PAIR = 50_000
CLUSTER_GAP = 1e-8


@dataclass(frozen=True, eq=False)
class PenalizedOperator:
    grid: GridSpec
    phi: np.ndarray
    C: float

    def __post_init__(self):
        phi = self.grid.check(self.phi, "phi")
        if not np.all(np.isfinite(phi)):
            raise ValueError("phi has non-finite values")
        if phi.min() < -1e-12 or phi.max() > 1 + 1e-12:
            raise ValueError("phi must take values in [0, 1]")
        if not self.C >= 0:
            raise ValueError("C must be nonnegative")
        object.__setattr__(self, "phi", phi)

    @property
    def n(self) -> int:
        return self.grid.size

    @property
    def potential(self) -> np.ndarray:
        """Flattened diagonal penalty ``C*(1 - phi)``."""
        return self.C * (1.0 - self.phi.ravel())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Apply to a flat vector or to the columns of an ``(n, m)`` block."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            return self.apply(X[:, None])[:, 0]
        return laplacian_apply_block(self.grid, X) + self.potential[:, None] * X

    def diagonal(self) -> np.ndarray:
        g = self.grid
        return 2.0 / g.hx**2 + 2.0 / g.hy**2 + self.potential

    def assemble(self) -> sp.csr_matrix:
        return (assemble_laplacian(self.grid) + sp.diags(self.potential)).tocsr()


@dataclass
class EigenPair:
    lam: float
    u: np.ndarray
    residual: float


@dataclass
class EigenSolution:
    """Full solver output: the wanted pairs plus the Ritz block for warm starts."""

    pairs: list
    ritz_values: np.ndarray
    block: np.ndarray = field(repr=False)
    applies: int = 0
    iterations: int = 0

    def gap_after(self, k: int) -> float:
        """Relative distance from the k-th Ritz value (1-based) to its neighbours."""
        vals = self.ritz_values
        lam = vals[k - 1]
        gaps = []
        if k >= 2:
            gaps.append(lam - vals[k - 2])
        if k < len(vals):
            gaps.append(vals[k] - lam)
        if not gaps:
            return np.inf
        return min(gaps) / max(abs(lam), 1e-300)


def lu_preconditioner(op: PenalizedOperator, shift: float | None = None) -> Callable:
    """Return ``R -> (A + shift*I)^{-1} R`` from a sparse LU factorization.

    The small positive shift keeps the factorization nonsingular for periodic
    grids with ``phi == 1``.  A factorization built for one density is a
    good preconditioner for nearby densities too.
    """
    g = op.grid
    if shift is None:
        shift = 1e-6 * (2.0 / g.hx**2 + 2.0 / g.hy**2)
    K = (op.assemble() + shift * sp.identity(op.n)).tocsc()
    lu = spla.splu(K, permc_spec="MMD_AT_PLUS_A")
    return lu.solve


def jacobi_preconditioner(op: PenalizedOperator) -> Callable:
    d = op.diagonal()
    return lambda R: R / (d[:, None] if R.ndim == 2 else d)


def _resolve_preconditioner(op, preconditioner):
    if preconditioner is None:
        return lambda R: R
    if callable(preconditioner):
        return preconditioner
    if preconditioner == "lu":
        return lu_preconditioner(op)
    if preconditioner == "jacobi":
        return jacobi_preconditioner(op)
    raise ValueError(f"unknown preconditioner {preconditioner!r}")


def _orthonormalize(V: np.ndarray, against=(), rtol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis of span(V) with the components along ``against``
    removed; near-dependent directions are dropped."""
    if V.shape[1] == 0:
        return V
    scale = np.linalg.norm(V, axis=0)
    scale[scale == 0] = 1.0
    V = V / scale
    for _ in range(2):
        for Q in against:
            if Q.shape[1]:
                V = V - Q @ (Q.T @ V)
    U, s, _ = np.linalg.svd(V, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return V[:, :0]
    return U[:, s > rtol * max(1.0, s[0])]


def _initial_block(n, m, x0, rng):
    X = rng.standard_normal((n, m))
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        if x0.ndim == 1:
            x0 = x0[:, None]
        if x0.shape[0] != n:
            raise DimensionError(f"warm start has {x0.shape[0]} rows, operator has {n}")
        c = min(m, x0.shape[1])
        X[:, :c] = x0[:, :c]
    return X


def _rayleigh_ritz(Q, AQ, m):
    H = Q.T @ AQ
    H = 0.5 * (H + H.T)
    theta, Cm = sla.eigh(H)
    return theta[:m], Cm[:, :m]


def _lobpcg(op, k, m, X, T, tol, max_applies):
    n = op.n
    X = _orthonormalize(X)
    AX = op.apply(X)
    applies = X.shape[1]
    theta, Cm = _rayleigh_ritz(X, AX, m)
    X, AX = X @ Cm, AX @ Cm
    P = np.empty((n, 0))
    it = 0
    while True:
        R = AX - X * theta
        rnorm = np.linalg.norm(R, axis=0)
        bound = tol * np.maximum(1.0, np.abs(theta))
        conv = rnorm <= bound
        if conv[:k].all():
            return theta, X, rnorm, applies, it
        if applies >= max_applies:
            raise ConvergenceError(
                f"LOBPCG did not converge within {max_applies} operator applications",
                best_residual=float(np.max(rnorm[:k])),
            )
        it += 1
        W = T(R[:, ~conv])
        W = _orthonormalize(W, against=(X,))
        Pq = _orthonormalize(P, against=(X, W)) if P.shape[1] else P
        Q = np.hstack([X, W, Pq])
        AQ = np.hstack([AX, op.apply(np.hstack([W, Pq]))])
        applies += W.shape[1] + Pq.shape[1]
        mm = min(m, Q.shape[1])
        theta, Cm = _rayleigh_ritz(Q, AQ, mm)
        Xn, AXn = Q @ Cm, AQ @ Cm
        # search direction: the part of the new iterate outside the old block
        nx_ = X.shape[1]
        P = Q[:, nx_:] @ Cm[nx_:, :]
        X, AX = Xn, AXn
        if Q.shape[1] >= n:
            # the basis spans the whole space; Ritz pairs are exact
            R = AX - X * theta
            return theta, X, np.linalg.norm(R, axis=0), applies, it


def _inverse_iteration(op, k, m, X, tol, max_applies):
    n = op.n
    g = op.grid
    shift = 1e-6 * (2.0 / g.hx**2 + 2.0 / g.hy**2)
    d = op.diagonal() + shift
    K = spla.LinearOperator((n, n), matvec=lambda v: op.apply(v) + shift * v, dtype=float)
    M = spla.LinearOperator((n, n), matvec=lambda v: v / d, dtype=float)
    counter = {"n": 0}

    def count(_):
        counter["n"] += 1

    X = _orthonormalize(X)
    AX = op.apply(X)
    applies = X.shape[1]
    theta, Cm = _rayleigh_ritz(X, AX, m)
    X, AX = X @ Cm, AX @ Cm
    it = 0
    while True:
        R = AX - X * theta
        rnorm = np.linalg.norm(R, axis=0)
        if (rnorm[:k] <= tol * np.maximum(1.0, np.abs(theta[:k]))).all():
            return theta, X, rnorm, applies + counter["n"], it
        if applies + counter["n"] >= max_applies:
            raise ConvergenceError(
                f"inverse iteration did not converge within {max_applies} operator applications",
                best_residual=float(np.max(rnorm[:k])),
            )
        it += 1
        Y = np.empty_like(X)
        for c in range(X.shape[1]):
            Y[:, c], info = spla.cg(K, X[:, c], x0=X[:, c] / max(theta[c] + shift, 1e-300),
                                    rtol=min(1e-3, tol) * 1e-2, maxiter=10 * n, M=M, callback=count)
        Q = _orthonormalize(Y)
        AQ = op.apply(Q)
        applies += Q.shape[1]
        mm = min(m, Q.shape[1])
        theta, Cm = _rayleigh_ritz(Q, AQ, mm)
        X, AX = Q @ Cm, AQ @ Cm


def solve_eigenpairs(
    op: PenalizedOperator,
    k: int,
    tol: float = 1e-8,
    seed: int = 0,
    *,
    x0=None,
    method: str = "lobpcg",
    preconditioner="lu",
    guard: int | None = None,
    max_applies: int | None = None,
) -> EigenSolution:
    """Compute the ``k`` smallest eigenpairs and keep the Ritz block.

    ``x0`` (an ``(n, c)`` array) seeds the first ``c`` columns of the
    initial block; the rest come from ``numpy.random.default_rng(seed)``.
    ``guard`` extra block columns speed up convergence near clusters.
    """
    n = op.n
    if k < 1:
        raise ValueError("k must be at least 1")
    if k >= n:
        raise DimensionError(f"asked for {k} eigenpairs of a {n}-dimensional operator")
    if not tol > 0:
        raise ValueError("tol must be positive")
    if guard is None:
        guard = max(3, k // 2)
    m = min(k + guard, n - 1) if n > 1 else 1
    m = max(m, k)
    if max_applies is None:
        max_applies = MAX_APPLIES_PER_PAIR * k
    rng = np.random.default_rng(seed)
    X = _initial_block(n, m, x0, rng)

    if method == "lobpcg":
        T = _resolve_preconditioner(op, preconditioner)
        theta, X, rnorm, applies, it = _lobpcg(op, k, m, X, T, tol, max_applies)
    elif method == "inverse":
        theta, X, rnorm, applies, it = _inverse_iteration(op, k, m, X, tol, max_applies)
    else:
        raise ValueError(f"unknown method {method!r}")

    w = np.sqrt(op.grid.cell_area)
    pairs = []
    for c in range(k):
        x = X[:, c].copy()
        x /= np.linalg.norm(x)
        if x[np.argmax(np.abs(x))] < 0:
            x = -x
        lam = float(theta[c])
        # residual in the discrete L2 norm of the normalized vector
        res = float(np.linalg.norm(op.apply(x) - lam * x))
        pairs.append(EigenPair(lam, (x / w).reshape(op.grid.shape), res))
    log.debug("eigensolve: n=%d k=%d iterations=%d applies=%d", n, k, it, applies)
    return EigenSolution(pairs, np.asarray(theta, dtype=float).copy(), X, applies, it)


def smallest_eigenpairs(op: PenalizedOperator, k: int, tol: float = 1e-8, seed: int = 0, **kwargs) -> list:
    """The ``k`` smallest eigenpairs in ascending order."""
    return solve_eigenpairs(op, k, tol, seed, **kwargs).pairs


def eigen_residual(op: PenalizedOperator, pair: EigenPair) -> float:
    """``||A u - lam u||`` in the discrete L2 norm, recomputed from scratch."""
    u = op.grid.check(pair.u, "eigenvector")
    r = op.apply(u.ravel()) - pair.lam * u.ravel()
    return float(np.sqrt(op.grid.cell_area) * np.linalg.norm(r))


def dense_eigenvalues(op: PenalizedOperator, count: int | None = None) -> np.ndarray:
    """Reference spectrum from a dense symmetric eigendecomposition."""
    K = op.assemble().toarray()
    vals = sla.eigh(K, eigvals_only=True, subset_by_index=None if count is None else [0, count - 1])
    return vals
