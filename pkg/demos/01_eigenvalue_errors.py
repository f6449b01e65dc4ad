"""Penalized eigenvalues of the unit disk against the Bessel-zero reference.

For each penalization C the first ten eigenvalues of -Delta_h + C(1 - phi)
are compared with j_{m,n}^2; the error first drops with C and then settles
on a plateau set by how well the grid resolves the disk.

    python demos/01_eigenvalue_errors.py [N]
"""
import sys

from spectral_partitions.studies import decay_exponent, error_table

N = int(sys.argv[1]) if len(sys.argv) > 1 else 100
Cs = (1e3, 1e4, 1e5, 1e6, 1e7, 1e8, 1e9)

table = error_table("disk", (N,), Cs)
for C, e in zip(Cs, table.row(N)):
    print(f"C = {C:8.0e}   max relative error (k <= 10) = {e:.3e}")

try:
    print(f"slope of log(error) vs log(C) before the plateau: {decay_exponent(table, N):.3f}")
except Exception as exc:  # too few pre-plateau columns at coarse N
    print(f"no decay fit: {exc}")
