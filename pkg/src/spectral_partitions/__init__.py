"""Penalized fixed-grid Dirichlet eigenvalues and projected-gradient
optimization of multiphase spectral partitions."""
from .eigensolver import (
    EigenPair,
    EigenSolution,
    PenalizedOperator,
    dense_eigenvalues,
    eigen_residual,
    smallest_eigenpairs,
    solve_eigenpairs,
)
from .errors import ConvergenceError, DimensionError, DomainError, InsufficientDataError, NonDifferentiableError
from .grid import BC, GridSpec, assemble_laplacian, laplacian_apply, node_coordinates
from .optimizer import OptimizerConfig, RunLog, Termination, linesearch, load_config, optimize
from .phases import (
    PhaseSystem,
    argmax_partition,
    partition_agreement,
    phase_areas,
    project_simplex,
    random_init,
    triple_blocks,
)
from .reference import Disk, Rectangle, bessel_zero, disk_eigenvalues, rasterize, rectangle_eigenvalues
from .relaxed import (
    CostBreakdown,
    cost_partials,
    eigenvalue_gradient,
    grid_alpha,
    multiphase_cost,
    multiphase_gradient,
    relaxed_eigenvalue,
)
from .studies import (
    ErrorTable,
    SweepResult,
    alpha_sweep,
    calibrate_alpha,
    decay_exponent,
    error_table,
    stability_study,
)

__version__ = "0.1.0"
