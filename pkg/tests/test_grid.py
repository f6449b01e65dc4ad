import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spectral_partitions.errors import DimensionError
from spectral_partitions.grid import BC, GridSpec, assemble_laplacian, laplacian_apply, node_coordinates


def stencil_eigenvalue(h, L, m=1):
    # closed-form eigenvalue of the 1-D Dirichlet second difference for mode m
    return (2.0 / h**2) * (1.0 - np.cos(m * np.pi * h / L))


def test_spacings_follow_boundary_condition():
    g = GridSpec(3.0, 2.0, 5, 3)
    assert g.hx == pytest.approx(3.0 / 6) and g.hy == pytest.approx(2.0 / 4)
    p = GridSpec(3.0, 2.0, 5, 4, BC.PERIODIC)
    assert p.hx == pytest.approx(3.0 / 5) and p.hy == pytest.approx(0.5)


@pytest.mark.parametrize("args", [(0, 1, 4, 4), (1, -1, 4, 4), (1, 1, 0, 4)])
def test_invalid_grid_rejected(args):
    with pytest.raises(ValueError):
        GridSpec(*args)


def test_periodic_grid_needs_three_nodes():
    with pytest.raises(ValueError):
        GridSpec(1, 1, 2, 5, BC.PERIODIC)


def test_periodic_constants_in_kernel():
    g = GridSpec(1.0, 1.3, 7, 5, BC.PERIODIC)
    assert np.abs(laplacian_apply(g, np.ones(g.shape))).max() < 1e-10


@pytest.mark.parametrize("n,L", [(5, 1.0), (17, 3.0), (40, 2.5)])
def test_dirichlet_sine_mode_is_exact_eigenvector(n, L):
    g = GridSpec(L, L, n, n)
    X, Y = g.mesh()
    u = np.sin(np.pi * X / L) * np.sin(np.pi * Y / L)
    lam = 2 * stencil_eigenvalue(g.hx, L)
    v = laplacian_apply(g, u)
    assert np.abs(v - lam * u).max() <= 1e-9 * lam


def test_anisotropic_sine_mode():
    g = GridSpec(2.0, 1.0, 9, 6)
    X, Y = g.mesh()
    u = np.sin(2 * np.pi * X / 2.0) * np.sin(np.pi * Y)
    lam = stencil_eigenvalue(g.hx, 2.0, 2) + stencil_eigenvalue(g.hy, 1.0)
    assert np.allclose(laplacian_apply(g, u), lam * u, atol=1e-10 * lam)


def test_stencil_entries_by_hand():
    g = GridSpec(4.0, 4.0, 3, 3)  # h = 1
    u = np.zeros(g.shape)
    u[1, 1] = 1.0
    v = laplacian_apply(g, u)
    expect = np.array([[0, -1, 0], [-1, 4, -1], [0, -1, 0]], dtype=float)
    assert np.array_equal(v, expect)


def test_periodic_wraps():
    g = GridSpec(3.0, 3.0, 3, 3, BC.PERIODIC)
    u = np.zeros(g.shape)
    u[0, 0] = 1.0
    v = laplacian_apply(g, u)
    assert v[0, 0] == 4.0 and v[0, 2] == -1.0 and v[2, 0] == -1.0 and v[1, 1] == 0.0


@pytest.mark.parametrize("bc", [BC.DIRICHLET, BC.PERIODIC])
def test_matrix_free_matches_assembled(bc):
    g = GridSpec(1.7, 1.1, 8, 6, bc)
    u = np.random.default_rng(1).standard_normal(g.shape)
    A = assemble_laplacian(g)
    assert np.allclose(laplacian_apply(g, u).ravel(), A @ u.ravel(), rtol=1e-13, atol=1e-10)


def test_flat_and_block_input():
    g = GridSpec(1.0, 1.0, 4, 5)
    u = np.random.default_rng(0).standard_normal(g.size)
    v = laplacian_apply(g, u)
    assert v.shape == (g.size,)
    assert np.array_equal(v, laplacian_apply(g, u.reshape(g.shape)).ravel())


def test_dimension_mismatch():
    g = GridSpec(1.0, 1.0, 4, 5)
    with pytest.raises(DimensionError):
        laplacian_apply(g, np.zeros((4, 4)))


grids = st.builds(
    GridSpec,
    width=st.floats(0.5, 4.0),
    height=st.floats(0.5, 4.0),
    nx=st.integers(3, 12),
    ny=st.integers(3, 12),
    bc=st.sampled_from([BC.DIRICHLET, BC.PERIODIC]),
)


@settings(max_examples=60, deadline=None)
@given(grids, st.integers(0, 2**32 - 1))
def test_symmetry_linearity_positivity(g, seed):
    rng = np.random.default_rng(seed)
    u, w = rng.standard_normal((2,) + g.shape)
    Au, Aw = laplacian_apply(g, u), laplacian_apply(g, w)
    scale = np.abs(Au).max() + np.abs(Aw).max()
    assert abs(np.vdot(Au, w) - np.vdot(u, Aw)) <= 1e-12 * scale * np.linalg.norm(u) * np.linalg.norm(w)
    a, b = rng.standard_normal(2)
    assert np.allclose(laplacian_apply(g, a * u + b * w), a * Au + b * Aw, atol=1e-12 * scale * 4)
    q = np.vdot(Au, u)
    assert q >= -1e-12 * scale * np.vdot(u, u)
    if g.bc is BC.DIRICHLET:
        assert q > 0


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 10), st.integers(3, 10), st.integers(0, 9), st.integers(0, 9))
def test_periodic_translation_equivariance(nx, ny, sx, sy):
    g = GridSpec(1.0, 1.0, nx, ny, BC.PERIODIC)
    u = np.random.default_rng(nx * ny).standard_normal(g.shape)
    shifted = np.roll(u, (sy, sx), axis=(0, 1))
    assert np.allclose(laplacian_apply(g, shifted), np.roll(laplacian_apply(g, u), (sy, sx), axis=(0, 1)))


def test_node_coordinates_examples():
    g = GridSpec.centered_square(3.0, 2)
    pts = {node_coordinates(g, i, j) for i in range(2) for j in range(2)}
    assert pts == {(-0.5, -0.5), (0.5, -0.5), (-0.5, 0.5), (0.5, 0.5)}
    p = GridSpec(1.0, 1.0, 4, 4, BC.PERIODIC)
    assert [node_coordinates(p, i, 0)[0] for i in range(4)] == [0.0, 0.25, 0.5, 0.75]
    c = GridSpec.centered_square(3.0, 7)
    x, y = node_coordinates(c, 3, 3)
    assert abs(x) < 1e-15 and abs(y) < 1e-15


def test_node_coordinates_out_of_range():
    g = GridSpec(1.0, 1.0, 4, 4)
    with pytest.raises(IndexError):
        node_coordinates(g, 4, 0)
    with pytest.raises(IndexError):
        node_coordinates(g, 0, -1)


def test_mesh_matches_node_coordinates():
    g = GridSpec(2.0, 1.0, 5, 3, x0=-1.0, y0=0.5)
    X, Y = g.mesh()
    for j in range(3):
        for i in range(5):
            assert (X[j, i], Y[j, i]) == pytest.approx(node_coordinates(g, i, j))
