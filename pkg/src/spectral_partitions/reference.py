"""Analytic Dirichlet eigenvalues of disks and rectangles, and node sampling
of those shapes on a grid.

Bessel zeros are computed here from scratch: the ascending series of
``J_m`` is summed in ``decimal`` arithmetic (the terms cancel heavily for
large arguments), zeros are bracketed on a fine scan and refined by
bisection, and each zero is checked against the three-term recurrence.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from decimal import Decimal, localcontext
from functools import lru_cache

import numpy as np

from .errors import DomainError
from .grid import GridSpec


def _bessel_j_decimal(m: int, x: Decimal, prec: int) -> Decimal:
    with localcontext() as ctx:
        ctx.prec = prec
        half = x / 2
        q = -(half * half)
        term = half**m / math.factorial(m)
        total = term
        k = 0
        eps = Decimal(10) ** (-prec)
        while True:
            k += 1
            term = term * q / (k * (k + m))
            total += term
            if k > float(half) and abs(term) < eps:
                break
        return +total


def _working_precision(x: float) -> int:
    # largest series term is about exp(x); keep ~25 significant digits after cancellation
    return 30 + int(x / math.log(10)) + 5


def bessel_j(m: int, x: float) -> float:
    """``J_m(x)`` for integer ``m >= 0`` and ``x >= 0`` via the ascending series."""
    if m < 0:
        raise ValueError("order must be nonnegative")
    if x < 0:
        raise ValueError("argument must be nonnegative")
    if x == 0:
        return 1.0 if m == 0 else 0.0
    return float(_bessel_j_decimal(m, Decimal(repr(float(x))), _working_precision(x)))


def _bisect_zero(m: int, a: float, b: float, fa: float) -> float:
    for _ in range(200):
        c = 0.5 * (a + b)
        if c == a or c == b or (b - a) <= 4e-16 * c:
            break
        fc = bessel_j(m, c)
        if fc == 0:
            return c
        if (fc > 0) == (fa > 0):
            a, fa = c, fc
        else:
            b = c
    return 0.5 * (a + b)


@lru_cache(maxsize=None)
def bessel_zeros(m: int, upper: float) -> tuple:
    """All positive zeros of ``J_m`` below ``upper``, ascending."""
    step = 0.1
    zeros = []
    # J_m has no positive zero below m (for m >= 1 the first one exceeds sqrt(m(m+2)))
    a = max(float(m), step)
    fa = bessel_j(m, a)
    while a < upper:
        b = min(a + step, upper)
        fb = bessel_j(m, b)
        if fb == 0.0:
            zeros.append(b)
        elif (fa > 0) != (fb > 0) and fa != 0.0:
            z = _bisect_zero(m, a, b, fa)
            _check_recurrence(m, z)
            zeros.append(z)
        a, fa = b, fb
    return tuple(zeros)


def _check_recurrence(m: int, z: float) -> None:
    # at a zero of J_m: J_{m-1}(z) = -J_{m+1}(z)  (J_{-1} = -J_1)
    lo = bessel_j(m - 1, z) if m >= 1 else -bessel_j(1, z)
    hi = bessel_j(m + 1, z)
    if abs(lo + hi) > 1e-9 * max(1.0, abs(hi)):
        raise ArithmeticError(f"recurrence check failed for zero {z} of J_{m}")


def bessel_zero(m: int, n: int) -> float:
    """The n-th positive zero ``j_{m,n}`` (n >= 1)."""
    upper = m + math.pi * (n + 2) + 2.0
    zs = bessel_zeros(m, upper)
    while len(zs) < n:
        upper *= 1.5
        zs = bessel_zeros(m, upper)
    return zs[n - 1]


@lru_cache(maxsize=None)
def _unit_disk_spectrum(count: int) -> tuple:
    # Weyl: #{j^2 <= B^2} ~ B^2 / 4 on the unit disk
    bound = 2.0 * math.sqrt(count) + 6.0
    while True:
        vals = []
        for m in range(int(bound) + 1):
            for z in bessel_zeros(m, bound):
                vals.extend([z * z] * (1 if m == 0 else 2))
        if len(vals) >= count:
            return tuple(sorted(vals)[:count])
        bound *= 1.3


def disk_eigenvalues(radius: float, count: int) -> np.ndarray:
    """First ``count`` Dirichlet eigenvalues of a disk, with multiplicity."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    if count < 1:
        raise ValueError("count must be at least 1")
    return np.array(_unit_disk_spectrum(count)) / radius**2


def rectangle_eigenvalues(width: float, height: float, count: int) -> np.ndarray:
    """First ``count`` values of ``pi^2 (m^2/width^2 + n^2/height^2)``, m, n >= 1."""
    if not (width > 0 and height > 0):
        raise ValueError("rectangle sides must be positive")
    idx = np.arange(1, count + 1)
    vals = np.pi**2 * ((idx[:, None] / width) ** 2 + (idx[None, :] / height) ** 2)
    return np.sort(vals.ravel())[:count]


@dataclass(frozen=True)
class Disk:
    radius: float
    center: tuple = (0.0, 0.0)

    def bounds(self):
        cx, cy = self.center
        r = self.radius
        return cx - r, cx + r, cy - r, cy + r

    def contains(self, X, Y):
        cx, cy = self.center
        return (X - cx) ** 2 + (Y - cy) ** 2 < self.radius**2

    def eigenvalues(self, count):
        return disk_eigenvalues(self.radius, count)

    @property
    def area(self):
        return math.pi * self.radius**2


@dataclass(frozen=True)
class Rectangle:
    width: float
    height: float
    center: tuple = (0.0, 0.0)

    def bounds(self):
        cx, cy = self.center
        return cx - self.width / 2, cx + self.width / 2, cy - self.height / 2, cy + self.height / 2

    def contains(self, X, Y):
        cx, cy = self.center
        return (np.abs(X - cx) < self.width / 2) & (np.abs(Y - cy) < self.height / 2)

    def eigenvalues(self, count):
        return rectangle_eigenvalues(self.width, self.height, count)

    @property
    def area(self):
        return self.width * self.height


def rasterize(shape, grid: GridSpec) -> np.ndarray:
    """Indicator of the nodes lying strictly inside ``shape`` (no antialiasing)."""
    xmin, xmax, ymin, ymax = shape.bounds()
    if xmin <= grid.x0 or ymin <= grid.y0 or xmax >= grid.x0 + grid.width or ymax >= grid.y0 + grid.height:
        raise DomainError(f"{shape} is not strictly inside the box")
    X, Y = grid.mesh()
    return shape.contains(X, Y).astype(float)


def write_reference_csv(path, shape, count: int) -> None:
    vals = shape.eigenvalues(count)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "lambda"])
        for i, v in enumerate(vals, 1):
            w.writerow([i, repr(float(v))])
