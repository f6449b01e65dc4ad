"""Uniform rectangular grids and the 5-point finite-difference Laplacian.

Fields live on the grid as ``(ny, nx)`` float arrays, so that flattening in
C order gives the node index ``j * nx + i``.  The Laplacian is stored with a
positive sign (``A = -Delta_h``), which makes it positive semidefinite.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError


class BC(str, enum.Enum):
    DIRICHLET = "dirichlet"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class GridSpec:
    """Node layout on the box ``[x0, x0 + width] x [y0, y0 + height]``.

    With ``BC.DIRICHLET`` only the ``nx * ny`` interior nodes are stored and
    the field is implicitly zero on the box boundary, so ``hx = width/(nx+1)``.
    With ``BC.PERIODIC`` the nodes are ``x0 + i*hx`` with ``hx = width/nx``
    and indices wrap.
    """

    width: float
    height: float
    nx: int
    ny: int
    bc: BC = BC.DIRICHLET
    x0: float = 0.0
    y0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "bc", BC(self.bc))
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))
        if not (self.width > 0 and self.height > 0):
            raise ValueError("box extents must be positive")
        # a periodic stencil needs three distinct nodes per axis
        nmin = 3 if self.bc is BC.PERIODIC else 1
        if self.nx < nmin or self.ny < nmin:
            raise ValueError(f"need at least {nmin} nodes per axis for {self.bc.value} grids")

    @classmethod
    def centered_square(cls, side, n, bc=BC.DIRICHLET):
        return cls(side, side, n, n, bc, -side / 2, -side / 2)

    @property
    def hx(self) -> float:
        if self.bc is BC.DIRICHLET:
            return self.width / (self.nx + 1)
        return self.width / self.nx

    @property
    def hy(self) -> float:
        if self.bc is BC.DIRICHLET:
            return self.height / (self.ny + 1)
        return self.height / self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def cell_area(self) -> float:
        """Weight of one node in the discrete L2 inner product."""
        return self.hx * self.hy

    @property
    def x(self) -> np.ndarray:
        off = 1 if self.bc is BC.DIRICHLET else 0
        return self.x0 + (np.arange(self.nx) + off) * self.hx

    @property
    def y(self) -> np.ndarray:
        off = 1 if self.bc is BC.DIRICHLET else 0
        return self.y0 + (np.arange(self.ny) + off) * self.hy

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinate arrays ``X, Y`` of shape ``(ny, nx)``."""
        return np.meshgrid(self.x, self.y, indexing="xy")

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def check(self, u, name="field") -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != self.shape:
            if u.ndim == 1 and u.size == self.size:
                return u.reshape(self.shape)
            raise DimensionError(f"{name} has shape {u.shape}, grid expects {self.shape}")
        return u

    def inner(self, u, w) -> float:
        """Discrete L2 inner product ``hx*hy * sum(u*w)``."""
        return float(self.cell_area * np.vdot(self.check(u), self.check(w)))

    def norm(self, u) -> float:
        return float(np.sqrt(self.inner(u, u)))


def node_coordinates(grid: GridSpec, i: int, j: int) -> tuple[float, float]:
    if not (0 <= i < grid.nx and 0 <= j < grid.ny):
        raise IndexError(f"node ({i}, {j}) outside a {grid.nx}x{grid.ny} grid")
    off = 1 if grid.bc is BC.DIRICHLET else 0
    return (grid.x0 + (i + off) * grid.hx, grid.y0 + (j + off) * grid.hy)


def _stencil(grid: GridSpec, u: np.ndarray) -> np.ndarray:
    # u has shape (ny, nx, ...); trailing axes are independent columns
    cx = 1.0 / grid.hx**2
    cy = 1.0 / grid.hy**2
    v = (2.0 * cx + 2.0 * cy) * u
    if grid.bc is BC.PERIODIC:
        v -= cx * (np.roll(u, 1, axis=1) + np.roll(u, -1, axis=1))
        v -= cy * (np.roll(u, 1, axis=0) + np.roll(u, -1, axis=0))
    else:
        v[:, 1:] -= cx * u[:, :-1]
        v[:, :-1] -= cx * u[:, 1:]
        v[1:] -= cy * u[:-1]
        v[:-1] -= cy * u[1:]
    return v


def laplacian_apply(grid: GridSpec, u) -> np.ndarray:
    """Apply ``-Delta_h`` to a field (shape ``(ny, nx)`` or flat ``nx*ny``)."""
    arr = np.asarray(u, dtype=float)
    if arr.shape == grid.shape:
        return _stencil(grid, arr)
    if arr.ndim == 1 and arr.size == grid.size:
        return _stencil(grid, arr.reshape(grid.shape)).ravel()
    raise DimensionError(f"field of shape {arr.shape} does not live on a {grid.nx}x{grid.ny} grid")


def laplacian_apply_block(grid: GridSpec, X: np.ndarray) -> np.ndarray:
    """Apply ``-Delta_h`` to the columns of an ``(nx*ny, m)`` block."""
    if X.ndim != 2 or X.shape[0] != grid.size:
        raise DimensionError(f"block of shape {X.shape} does not match grid size {grid.size}")
    m = X.shape[1]
    return _stencil(grid, X.reshape(grid.ny, grid.nx, m)).reshape(grid.size, m)


def _second_difference(n: int, h: float, periodic: bool) -> sp.csr_matrix:
    T = sp.diags([-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="lil")
    if periodic:
        T[0, n - 1] -= 1.0
        T[n - 1, 0] -= 1.0
    return (T / h**2).tocsr()


def assemble_laplacian(grid: GridSpec) -> sp.csr_matrix:
    """Sparse matrix of ``-Delta_h`` built from Kronecker products.

    This is a second, independent route to the operator applied by
    :func:`laplacian_apply`; the tests compare the two.
    """
    periodic = grid.bc is BC.PERIODIC
    Tx = _second_difference(grid.nx, grid.hx, periodic)
    Ty = _second_difference(grid.ny, grid.hy, periodic)
    # row-major: x varies fastest
    return (sp.kron(sp.identity(grid.ny), Tx) + sp.kron(Ty, sp.identity(grid.nx))).tocsr()
