"""One phase in a Dirichlet box: the optimizer should settle on a disk
whose radius balances the first eigenvalue against the area penalty,
r = (j_{0,1}^2 / (alpha pi))^(1/4).

    python demos/02_single_disk.py [N] [radius]
"""
import sys

import numpy as np

from spectral_partitions import GridSpec, OptimizerConfig, optimize
from spectral_partitions.reference import disk_eigenvalues
from spectral_partitions.relaxed import alpha_for_disk_radius, grid_alpha

N = int(sys.argv[1]) if len(sys.argv) > 1 else 64
r = float(sys.argv[2]) if len(sys.argv) > 2 else 0.75

grid = GridSpec.centered_square(3.0, N)
alpha_phys = alpha_for_disk_radius(r, disk_eigenvalues(1.0, 1)[0])
# configs carry alpha in box-fraction units
cfg = OptimizerConfig(grid, 1, grid_alpha(alpha_phys, grid), C=1e4, gamma0=1.0, p_max=300)


def progress(rec, ps):
    if rec.iteration % 20 == 0:
        print(f"iter {rec.iteration:4d}  cost {rec.cost.total:.6f}  step {rec.gamma:.3g}")


runlog = optimize(cfg, callback=progress)
area = np.count_nonzero(runlog.labels() == 1) * grid.cell_area
print(f"stopped: {runlog.termination.value} after {len(runlog.records) - 1} iterations")
print(f"argmax area {area:.4f}   disk area {np.pi * r * r:.4f}   ratio {area / (np.pi * r * r):.3f}")
