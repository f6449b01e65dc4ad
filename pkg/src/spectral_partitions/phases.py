"""Multiphase densities and the nodewise projection onto the simplex.

A :class:`PhaseSystem` stores ``h`` competing densities plus the empty phase
as one array of shape ``(h + 1, ny, nx)``; the last slice is the empty phase.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fileio
from .errors import DimensionError
from .grid import BC, GridSpec

SUM_TOL = 1e-12


def project_simplex(raw) -> np.ndarray:
    """Nodewise ``x -> |x| / sum|x|`` along the first axis.

    This is deliberately not the Euclidean projection: it preserves zeros
    and is invariant under per-node rescaling.  Nodes where every component
    vanishes are sent to the barycentre ``1/(h+1)``.
    """
    a = np.abs(np.asarray(raw, dtype=float))
    s = a.sum(axis=0)
    zero = s == 0
    out = a / np.where(zero, 1.0, s)
    if zero.any():
        out[:, zero] = 1.0 / a.shape[0]
    return out


@dataclass(eq=False)
class PhaseSystem:
    grid: GridSpec
    fields: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.fields, dtype=float)
        if f.ndim != 3 or f.shape[1:] != self.grid.shape:
            raise DimensionError(f"phase array of shape {f.shape} does not match grid {self.grid.shape}")
        if f.shape[0] < 2:
            raise ValueError("need at least one competing phase and the empty phase")
        self.fields = f

    @property
    def h(self) -> int:
        return self.fields.shape[0] - 1

    @property
    def empty(self) -> np.ndarray:
        return self.fields[-1]

    def validate(self, tol: float = SUM_TOL) -> None:
        f = self.fields
        if not np.all(np.isfinite(f)):
            raise ValueError("non-finite density")
        if f.min() < 0.0 or f.max() > 1.0:
            raise ValueError("densities must lie in [0, 1]")
        dev = np.max(np.abs(f.sum(axis=0) - 1.0))
        if dev > tol:
            raise ValueError(f"densities do not sum to one (deviation {dev:.3g})")

    def copy(self) -> "PhaseSystem":
        return PhaseSystem(self.grid, self.fields.copy())

    def permuted(self, order) -> "PhaseSystem":
        """Reorder the competing phases; the empty phase stays last."""
        order = list(order)
        if sorted(order) != list(range(self.h)):
            raise ValueError("order must be a permutation of the competing phases")
        return PhaseSystem(self.grid, self.fields[order + [self.h]])

    @classmethod
    def from_raw(cls, grid: GridSpec, raw) -> "PhaseSystem":
        return cls(grid, project_simplex(raw))

    @classmethod
    def from_labels(cls, grid: GridSpec, labels, h: int) -> "PhaseSystem":
        """Indicator system from a label field with values in ``1..h+1``."""
        labels = grid.check(labels, "labels")
        return cls(grid, np.stack([(labels == l).astype(float) for l in range(1, h + 2)]))

    def save(self, path) -> None:
        Path(path).write_bytes(fileio.encode_fields(self.grid, list(self.fields)))

    @classmethod
    def load(cls, path, grid: GridSpec) -> "PhaseSystem":
        with open(path, "rb") as fh:
            values, _ = fileio.decode_fields(fh, grid)
        return cls(grid, values)


def random_init(grid: GridSpec, h: int, seed: int) -> PhaseSystem:
    """Uniform(0, 1) densities per node and phase, projected on the simplex."""
    if h < 1:
        raise ValueError("h must be at least 1")
    rng = np.random.default_rng(seed)
    return PhaseSystem.from_raw(grid, rng.uniform(size=(h + 1,) + grid.shape))


def argmax_partition(ps: PhaseSystem) -> np.ndarray:
    """Per-node label (1-based) of the largest density; ties go to the lowest index."""
    return np.argmax(ps.fields, axis=0) + 1


def phase_areas(labels, grid: GridSpec, h: int) -> np.ndarray:
    """Area ``hx*hy * #nodes`` of each competing label ``1..h``."""
    counts = np.bincount(np.asarray(labels).ravel(), minlength=h + 2)[1 : h + 1]
    return counts * grid.cell_area


def _neighbour_pairs(labels, periodic: bool):
    if periodic:
        yield labels, np.roll(labels, -1, axis=1)
        yield labels, np.roll(labels, -1, axis=0)
    else:
        yield labels[:, :-1], labels[:, 1:]
        yield labels[:-1], labels[1:]


def cell_adjacency(labels, h: int, periodic: bool) -> list:
    """For each competing label, the set of other competing labels sharing an
    edge of the node lattice with it."""
    adj = [set() for _ in range(h)]
    for a, b in _neighbour_pairs(np.asarray(labels), periodic):
        mask = (a != b) & (a <= h) & (b <= h)
        for p, q in set(zip(a[mask].tolist(), b[mask].tolist())):
            adj[p - 1].add(q)
            adj[q - 1].add(p)
    return adj


def triple_blocks(labels, h: int, periodic: bool) -> int:
    """Number of 2x2 node blocks holding three or more distinct competing labels."""
    L = np.asarray(labels)
    if periodic:
        blocks = [L, np.roll(L, -1, axis=1), np.roll(L, -1, axis=0), np.roll(np.roll(L, -1, axis=0), -1, axis=1)]
    else:
        blocks = [L[:-1, :-1], L[:-1, 1:], L[1:, :-1], L[1:, 1:]]
    B = np.stack(blocks).reshape(4, -1)
    count = 0
    for col in B.T[np.any(B <= h, axis=0)]:
        if len({int(v) for v in col if v <= h}) >= 3:
            count += 1
    return count


def partition_agreement(a, b, h: int, periodic: bool = True) -> float:
    """Best fraction of matching nodes between two label fields over cyclic
    translations (periodic grids only) and permutations of the competing
    labels.  The empty label ``h + 1`` is never relabelled."""
    from scipy.optimize import linear_sum_assignment

    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError("label fields differ in shape")
    n = a.size
    L = h + 1
    ind_a = np.stack([(a == l).astype(float) for l in range(1, L + 1)])
    ind_b = np.stack([(b == l).astype(float) for l in range(1, L + 1)])
    if periodic:
        # overlap[p, q, s] = #nodes where a == p and shifted b == q, for every shift s
        Fa = np.fft.rfft2(ind_a)
        Fb = np.fft.rfft2(ind_b)
        overlap = np.fft.irfft2(np.conj(Fa)[:, None] * Fb[None, :], s=a.shape)
        overlap = np.rint(overlap).reshape(L, L, -1)
    else:
        overlap = np.einsum("pij,qij->pq", ind_a, ind_b)[:, :, None]
    best = 0.0
    for s in range(overlap.shape[2]):
        M = overlap[:h, :h, s]
        r, c = linear_sum_assignment(-M)
        score = M[r, c].sum() + overlap[h, h, s]
        best = max(best, score)
    return float(best / n)


def is_periodic(grid: GridSpec) -> bool:
    return grid.bc is BC.PERIODIC
