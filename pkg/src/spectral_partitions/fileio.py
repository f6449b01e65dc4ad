"""Binary field checkpoints and PGM/PPM label rasters.

ScalarField checkpoint (little-endian)::

    b"SPF1" | nx: u64 | ny: u64 | bc: u8 (0 dirichlet, 1 periodic) | nx*ny f64, row-major

A phase-system checkpoint is ``b"PHS1" | count: u64`` followed by ``count``
ScalarField checkpoints.  The box extents are not stored; pass the grid when
reading to validate the layout.
"""
from __future__ import annotations

import io
import re
import struct
from pathlib import Path

import numpy as np

from .errors import DimensionError
from .grid import BC, GridSpec

_FIELD_MAGIC = b"SPF1"
_PHASE_MAGIC = b"PHS1"
_HEADER = struct.Struct("<4sQQB")
_BC_CODE = {BC.DIRICHLET: 0, BC.PERIODIC: 1}
_CODE_BC = {v: k for k, v in _BC_CODE.items()}

# 12-colour palette for label rasters; label l uses entry (l - 1) % 12
PALETTE = np.array(
    [
        (230, 25, 75), (60, 180, 75), (0, 130, 200), (245, 130, 48),
        (145, 30, 180), (70, 240, 240), (240, 50, 230), (210, 245, 60),
        (250, 190, 190), (0, 128, 128), (170, 110, 40), (255, 250, 200),
    ],
    dtype=np.uint8,
)
EMPTY_COLOR = np.array((255, 255, 255), dtype=np.uint8)


def encode_field(grid: GridSpec, u) -> bytes:
    u = grid.check(u)
    head = _HEADER.pack(_FIELD_MAGIC, grid.nx, grid.ny, _BC_CODE[grid.bc])
    return head + np.ascontiguousarray(u, dtype="<f8").tobytes()


def decode_field(stream, grid: GridSpec | None = None):
    """Read one field from a binary stream.

    Returns ``(values, bc)`` with ``values`` of shape ``(ny, nx)``.
    """
    raw = stream.read(_HEADER.size)
    if len(raw) != _HEADER.size:
        raise ValueError("truncated field header")
    magic, nx, ny, code = _HEADER.unpack(raw)
    if magic != _FIELD_MAGIC:
        raise ValueError(f"bad field magic {magic!r}")
    if code not in _CODE_BC:
        raise ValueError(f"unknown boundary code {code}")
    bc = _CODE_BC[code]
    nbytes = 8 * nx * ny
    data = stream.read(nbytes)
    if len(data) != nbytes:
        raise ValueError("truncated field data")
    values = np.frombuffer(data, dtype="<f8").astype(float).reshape(ny, nx)
    if grid is not None and (grid.nx, grid.ny, grid.bc) != (nx, ny, bc):
        raise DimensionError(f"checkpoint is {nx}x{ny} {bc.value}, grid is {grid.nx}x{grid.ny} {grid.bc.value}")
    return values, bc


def save_field(path, grid: GridSpec, u) -> None:
    Path(path).write_bytes(encode_field(grid, u))


def load_field(path, grid: GridSpec | None = None):
    with open(path, "rb") as fh:
        return decode_field(fh, grid)


def encode_fields(grid: GridSpec, fields) -> bytes:
    buf = io.BytesIO()
    buf.write(_PHASE_MAGIC + struct.pack("<Q", len(fields)))
    for f in fields:
        buf.write(encode_field(grid, f))
    return buf.getvalue()


def decode_fields(stream, grid: GridSpec | None = None):
    head = stream.read(12)
    if len(head) != 12 or head[:4] != _PHASE_MAGIC:
        raise ValueError("not a phase-system checkpoint")
    (count,) = struct.unpack("<Q", head[4:])
    out = [decode_field(stream, grid) for _ in range(count)]
    bcs = {bc for _, bc in out}
    if len(bcs) > 1:
        raise ValueError("mixed boundary conditions in one checkpoint")
    return np.stack([v for v, _ in out]), out[0][1]


def label_image(labels, n_labels: int, color: bool = True) -> np.ndarray:
    """Turn a label field (values 1..n_labels) into image rows.

    The last label is the empty phase and is drawn white (or black in
    grayscale).  Image row 0 is the top of the box, i.e. the largest ``y``.
    """
    labels = np.asarray(labels)[::-1]
    if color:
        img = PALETTE[(labels - 1) % len(PALETTE)]
        img[labels == n_labels] = EMPTY_COLOR
        return img
    if n_labels <= 1:
        return np.zeros(labels.shape, dtype=np.uint8)
    gray = np.rint(255.0 * (labels - 1) / (n_labels - 1)).astype(np.uint8)
    return 255 - gray


def write_pgm(path, labels, n_labels: int) -> None:
    img = label_image(labels, n_labels, color=False)
    h, w = img.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + img.tobytes())


def write_ppm(path, labels, n_labels: int) -> None:
    img = label_image(labels, n_labels, color=True)
    h, w = img.shape[:2]
    Path(path).write_bytes(b"P6\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(img).tobytes())


def read_pnm(path) -> np.ndarray:
    """Minimal reader for the P5/P6 files written here (used in tests)."""
    data = Path(path).read_bytes()
    m = re.match(rb"(P[56])\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if m is None:
        raise ValueError("unsupported raster header")
    magic, w, h, maxval = m.group(1), int(m.group(2)), int(m.group(3)), int(m.group(4))
    if maxval != 255:
        raise ValueError("only 8-bit rasters are supported")
    body = data[m.end():]
    if magic == b"P5":
        return np.frombuffer(body, dtype=np.uint8).reshape(h, w)
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3)
