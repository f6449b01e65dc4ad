"""The relaxed eigenvalue ``lambda_k(phi, C)`` and the multiphase cost.

The multiphase cost of ``h`` competing densities plus an empty phase is::

    sum_l lambda_k(phi_l, C)  -  alpha * volume_term,
    volume_term = (1 / (nx*ny)) * sum_nodes phi_empty

i.e. the empty-phase volume is measured as a fraction of the box (the
``1/N^2`` node weight).  ``alpha`` therefore carries the box area: it equals
``|D| * alpha_physical`` where ``alpha_physical`` multiplies true areas.
Use :func:`physical_alpha` / :func:`grid_alpha` to convert.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .eigensolver import CLUSTER_GAP, PenalizedOperator, solve_eigenpairs
from .errors import ConvergenceError, NonDifferentiableError
from .grid import GridSpec
from .phases import PhaseSystem

log = logging.getLogger(__name__)


class HigherEigenvalueWarning(UserWarning):
    pass


@dataclass
class RelaxedEigenResult:
    lam: float
    u: np.ndarray
    k: int
    C: float
    grid: GridSpec
    gap: float = np.inf
    block: np.ndarray | None = field(default=None, repr=False)

    @property
    def clustered(self) -> bool:
        return self.gap < CLUSTER_GAP


def _check_k(k: int, allow_higher: bool) -> None:
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > 1:
        if not allow_higher:
            raise ValueError("k > 1 is experimental; pass allow_higher=True")
        warnings.warn(
            "eigenvalues with k >= 2 may be multiple and are not differentiable there; "
            "convergence of the relaxation is not established for k >= 2",
            HigherEigenvalueWarning,
            stacklevel=3,
        )


def relaxed_eigenvalue(
    grid: GridSpec,
    phi,
    C: float,
    k: int = 1,
    tol: float = 1e-8,
    seed: int = 0,
    *,
    x0=None,
    preconditioner="lu",
    allow_higher: bool = False,
) -> RelaxedEigenResult:
    """k-th eigenpair of ``-Delta_h + C(1 - phi)`` on the whole box."""
    _check_k(k, allow_higher)
    if not C > 0:
        raise ValueError("C must be positive")
    op = PenalizedOperator(grid, phi, C)
    sol = solve_eigenpairs(op, k, tol, seed, x0=x0, preconditioner=preconditioner)
    pair = sol.pairs[k - 1]
    return RelaxedEigenResult(pair.lam, pair.u, k, C, grid, sol.gap_after(k), sol.block)


def eigenvalue_gradient(result: RelaxedEigenResult, allow_cluster: bool = False) -> np.ndarray:
    """L2 gradient ``-C u^2`` of ``lambda_k`` with respect to the density.

    Paired with the discrete inner product ``hx*hy*sum(g*delta)`` it gives the
    directional derivative.  Raises :class:`NonDifferentiableError` for a
    clustered eigenvalue unless ``allow_cluster`` is set, in which case the
    returned field is a subgradient.
    """
    if result.clustered and not allow_cluster:
        raise NonDifferentiableError(
            f"lambda_{result.k} is clustered (relative gap {result.gap:.2e}); only a subgradient exists"
        )
    return -result.C * result.u**2


@dataclass(frozen=True)
class CostBreakdown:
    total: float
    per_phase_eigenvalue: tuple
    volume_term: float
    alpha: float

    @property
    def occupied_form(self) -> float:
        """``sum lambda + alpha * occupied fraction``; equals ``total + alpha``."""
        return float(sum(self.per_phase_eigenvalue)) + self.alpha * (1.0 - self.volume_term)

    def csv_row(self, iteration: int) -> list:
        return [iteration, repr(self.total), *map(repr, self.per_phase_eigenvalue), repr(self.volume_term)]

    @staticmethod
    def csv_header(h: int) -> list:
        return ["iteration", "total", *[f"lambda_{l}" for l in range(1, h + 1)], "volume_term"]


@dataclass
class CostEvaluation:
    breakdown: CostBreakdown
    results: list


def volume_fraction(field_values) -> float:
    f = np.asarray(field_values)
    return float(f.sum() / f.size)


def evaluate_phases(
    phases: PhaseSystem,
    C: float,
    k: int,
    alpha: float,
    tol: float = 1e-8,
    seed: int = 0,
    *,
    warm=None,
    preconditioners=None,
    allow_higher: bool = False,
) -> CostEvaluation:
    """Cost plus the per-phase eigen results (kept for gradients and warm starts).

    ``warm`` and ``preconditioners`` are optional per-phase lists.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    grid = phases.grid
    results = []
    for l in range(phases.h):
        x0 = None if warm is None else warm[l]
        pre = "lu" if preconditioners is None else preconditioners[l]
        try:
            res = relaxed_eigenvalue(grid, phases.fields[l], C, k, tol, seed + l, x0=x0,
                                     preconditioner=pre, allow_higher=allow_higher)
        except ConvergenceError as exc:
            raise ConvergenceError(f"phase {l + 1}: {exc}", exc.best_residual, phase=l + 1) from exc
        results.append(res)
    vol = volume_fraction(phases.empty)
    lams = tuple(float(r.lam) for r in results)
    total = float(sum(lams) - alpha * vol)
    return CostEvaluation(CostBreakdown(total, lams, vol, float(alpha)), results)


def multiphase_cost(phases: PhaseSystem, C: float, k: int, alpha: float, tol: float = 1e-8, seed: int = 0,
                    **kwargs) -> CostBreakdown:
    return evaluate_phases(phases, C, k, alpha, tol, seed, **kwargs).breakdown


def gradient_from_results(phases: PhaseSystem, results, alpha: float) -> np.ndarray:
    """Descent field of the multiphase cost, one slice per phase.

    Competing phases get the L2 gradient ``-C * u^2`` (``u`` normalized by
    ``hx*hy*sum(u^2) = 1``); the empty phase gets the nodal derivative
    ``-alpha/(nx*ny)`` of the volume term.  The two parts are therefore
    measured in different inner products; this is the weighting the
    optimizer descends along.  :func:`cost_partials` gives the plain nodal
    partial derivatives instead.
    """
    g = np.empty_like(phases.fields)
    for l, res in enumerate(results):
        if res.clustered:
            log.warning("phase %d: clustered eigenvalue (gap %.2e), using a subgradient", l + 1, res.gap)
        g[l] = eigenvalue_gradient(res, allow_cluster=True)
    g[-1] = -alpha / phases.grid.size
    return g


def cost_partials(grid: GridSpec, gradient) -> np.ndarray:
    """Nodal partial derivatives of the cost from :func:`gradient_from_results`."""
    g = np.array(gradient, dtype=float)
    g[:-1] *= grid.cell_area
    return g


def multiphase_gradient(phases: PhaseSystem, C: float, k: int, alpha: float, tol: float = 1e-8, seed: int = 0,
                        **kwargs) -> list:
    ev = evaluate_phases(phases, C, k, alpha, tol, seed, **kwargs)
    for l, res in enumerate(ev.results):
        if res.clustered:
            raise NonDifferentiableError(f"phase {l + 1}: lambda_{k} is clustered")
    return list(gradient_from_results(phases, ev.results, alpha))


def grid_alpha(alpha_physical: float, grid: GridSpec) -> float:
    """Convert an area weight on true areas to the weight used with the
    box-fraction volume term."""
    return alpha_physical * grid.size * grid.cell_area


def physical_alpha(alpha: float, grid: GridSpec) -> float:
    return alpha / (grid.size * grid.cell_area)


def disk_radius_for_alpha(alpha_physical: float, lambda1_unit_disk: float) -> float:
    """Radius ``(lambda_1(B_1) / (alpha*pi))^(1/4)`` of the single-phase optimum."""
    return (lambda1_unit_disk / (alpha_physical * np.pi)) ** 0.25


def alpha_for_disk_radius(radius: float, lambda1_unit_disk: float) -> float:
    return lambda1_unit_disk / (np.pi * radius**4)
