"""Cells shrink as the area penalty grows: a warm-started alpha sweep with
four phases on the periodic unit square.

    python demos/04_alpha_sweep.py [N]
"""
import sys
from pathlib import Path

from spectral_partitions import BC, GridSpec, OptimizerConfig, alpha_sweep

N = int(sys.argv[1]) if len(sys.argv) > 1 else 48
grid = GridSpec(1.0, 1.0, N, N, BC.PERIODIC)
base = OptimizerConfig(grid, 4, 150.0, C=1e4, gamma0=10.0, p_max=200, adaptive_step=True)
out = Path("out/alpha_sweep")
res = alpha_sweep(base, [150.0, 200.0, 250.0, 300.0], out_dir=out)
print(res.csv_text())
print(f"rasters in {out}/")
