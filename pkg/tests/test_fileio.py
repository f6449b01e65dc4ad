import io
import struct

import numpy as np
import pytest

from spectral_partitions import fileio
from spectral_partitions.errors import DimensionError
from spectral_partitions.grid import BC, GridSpec
from spectral_partitions.phases import PhaseSystem, random_init


def test_field_layout_bytes():
    g = GridSpec(1.0, 1.0, 4, 3, BC.PERIODIC)
    u = np.arange(12, dtype=float).reshape(3, 4)
    raw = fileio.encode_field(g, u)
    assert raw[:4] == b"SPF1"
    assert struct.unpack("<QQB", raw[4:21]) == (4, 3, 1)
    assert np.array_equal(np.frombuffer(raw[21:], "<f8"), np.arange(12.0))
    assert fileio.encode_field(GridSpec(1.0, 1.0, 4, 3), u)[20] == 0


def test_field_roundtrip(tmp_path):
    g = GridSpec(2.0, 1.0, 5, 4)
    u = np.random.default_rng(3).standard_normal(g.shape)
    p = tmp_path / "u.bin"
    fileio.save_field(p, g, u)
    v, bc = fileio.load_field(p, g)
    assert bc is BC.DIRICHLET and np.array_equal(u, v)


def test_field_grid_mismatch(tmp_path):
    g = GridSpec(2.0, 1.0, 5, 4)
    p = tmp_path / "u.bin"
    fileio.save_field(p, g, g.zeros())
    with pytest.raises(DimensionError):
        fileio.load_field(p, GridSpec(2.0, 1.0, 4, 5))
    with pytest.raises(DimensionError):
        fileio.load_field(p, GridSpec(2.0, 1.0, 5, 4, BC.PERIODIC))


@pytest.mark.parametrize("mutate", [lambda b: b"XXXX" + b[4:], lambda b: b[:10], lambda b: b[:-3]])
def test_corrupt_field(mutate):
    g = GridSpec(1.0, 1.0, 3, 3)
    raw = mutate(fileio.encode_field(g, g.zeros()))
    with pytest.raises(ValueError):
        fileio.decode_field(io.BytesIO(raw))


def test_phase_checkpoint_roundtrip(tmp_path):
    g = GridSpec(1.0, 1.0, 6, 5, BC.PERIODIC)
    ps = random_init(g, 3, 7)
    p = tmp_path / "ps.bin"
    ps.save(p)
    raw = p.read_bytes()
    assert raw[:4] == b"PHS1" and struct.unpack("<Q", raw[4:12]) == (4,)
    back = PhaseSystem.load(p, g)
    assert np.array_equal(back.fields, ps.fields)


def test_rasters(tmp_path):
    labels = np.array([[1, 2, 3], [3, 3, 1]])
    fileio.write_ppm(tmp_path / "a.ppm", labels, 3)
    fileio.write_pgm(tmp_path / "a.pgm", labels, 3)
    rgb = fileio.read_pnm(tmp_path / "a.ppm")
    gray = fileio.read_pnm(tmp_path / "a.pgm")
    assert rgb.shape == (2, 3, 3) and gray.shape == (2, 3)
    # row 0 of the image is the largest y, i.e. the last label row
    assert tuple(rgb[0, 2]) == tuple(fileio.PALETTE[0])
    assert tuple(rgb[1, 0]) == tuple(fileio.PALETTE[0])
    assert tuple(rgb[0, 0]) == (255, 255, 255)
    assert gray[0, 0] == 0 and gray[1, 0] == 255
    assert len(set(gray.ravel().tolist())) == 3


def test_raster_header_bytes(tmp_path):
    fileio.write_pgm(tmp_path / "b.pgm", np.ones((2, 4), dtype=int), 2)
    assert (tmp_path / "b.pgm").read_bytes().startswith(b"P5\n4 2\n255\n")
