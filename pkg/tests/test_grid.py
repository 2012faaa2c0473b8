import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from convfeat.approx.grid import GridNet, active_bumps, grid_build, grid_eval, grid_eval_dense, psi_delta
from convfeat.errors import DimensionMismatch, PreconditionError


def relu(u):
    return np.maximum(u, 0.0)


def psi_four_relu(t, n, delta):
    return n / delta * (relu(t + 1 / n) - relu(t + 1 / n - delta / n) - relu(t - 1 / n + delta / n) + relu(t - 1 / n))


def lipschitz_test_function(y):
    """1-Lipschitz in the Euclidean norm: |y - c| for a fixed c."""
    return np.linalg.norm(y - 0.37, axis=-1)


def test_psi_examples():
    n, delta = 8, 0.1
    assert psi_delta(0.0, n, delta) == 1.0
    assert psi_delta(1 / n, n, delta) == 0.0
    assert psi_delta(-1 / n, n, delta) == 0.0
    assert psi_delta(-1 / n + delta / (2 * n), n, delta) == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("n, delta", [(4, 0.05), (8, 0.1), (16, 0.3), (3, 0.5)])
def test_psi_exact_flat_regions(n, delta):
    rng = np.random.default_rng(n)
    plateau = rng.uniform(-(1 - delta) / n, (1 - delta) / n, 10_000)
    outside = np.concatenate([rng.uniform(1 / n, 2, 5000), rng.uniform(-2, -1 / n, 5000)])
    assert np.all(psi_delta(plateau, n, delta) == 1.0)
    assert np.all(psi_delta(outside, n, delta) == 0.0)
    ramp = rng.uniform(-1 / n, -(1 - delta) / n, 10_000)
    np.testing.assert_allclose(psi_delta(ramp, n, delta), (ramp + 1 / n) * n / delta, atol=1e-9)


@settings(max_examples=200, deadline=None)
@given(t=st.floats(-1, 1), n=st.integers(1, 40), delta=st.floats(0.01, 0.99))
def test_psi_matches_four_relu_form(t, n, delta):
    assert psi_delta(t, n, delta) == pytest.approx(psi_four_relu(t, n, delta), abs=1e-9)


def test_psi_rejects_bad_delta():
    with pytest.raises(PreconditionError):
        psi_delta(0.0, 4, 1.0)


def test_widths_and_values_shape():
    g = grid_build(lambda y: y.sum(-1), 2, 7, 0.05)
    assert g.half == 4
    assert g.widths == (4 * 2 * 4, 4**2)
    assert g.values.shape == (4, 4)


def test_constant_function():
    g = grid_build(lambda y: np.full(len(y), 2.5), 2, 8, 0.05)
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 1, (5000, 2))
    mask = g.in_plateau(x)
    assert mask.any()
    assert np.all(g(x[mask]) == 2.5)


def test_cell_centres_exact():
    f = lambda y: np.sin(3 * y).sum(-1)
    g = grid_build(f, 2, 6, 0.1)
    pts = g.grid_points()
    np.testing.assert_array_equal(g(pts), f(pts))


def test_plateau_edge_1d():
    n, delta = 10, 0.1
    f = lambda y: y[..., 0] ** 2
    g = grid_build(f, 1, n, delta)
    for k in (1, 3, 5, 7, 9):
        x = 0.999 * (1 / n - delta / n) + k / n
        assert g(np.array([x])) == f(np.array([k / n]))


def test_linear_1d_sup_error():
    n, delta = 10, 0.1
    g = grid_build(lambda y: y[..., 0], 1, n, delta)
    x = np.linspace(0, 1, 100_001)[:, None]
    mask = g.in_plateau(x)
    assert np.max(np.abs(g(x[mask]) - x[mask, 0])) <= 0.1 + 1e-12


def test_2d_sup_error_and_slab_measure():
    n, delta = 8, 0.05
    g = grid_build(lipschitz_test_function, 2, n, delta)
    x = np.random.default_rng(1).uniform(0, 1, (20_000, 2))
    mask = g.in_plateau(x)
    assert np.max(np.abs(g(x[mask]) - lipschitz_test_function(x[mask]))) <= np.sqrt(2) / n
    assert 1 - mask.mean() <= 2 * delta + 0.01


def test_facet_midpoint_bounded_by_neighbours_and_zero():
    # Between two cells the network damps toward 0; it never leaves the hull of
    # 0 and the neighbouring cell values.
    n, delta = 8, 0.2
    f = lambda y: 1.0 + y.sum(-1)
    g = grid_build(f, 2, n, delta)
    c = g.grid_points().reshape(4, 4, 2)
    for i in range(3):
        a, b = c[i, 1], c[i + 1, 1]
        for s in np.linspace(-delta / n, delta / n, 11):
            x = (a + b) / 2 + np.array([s, 0.0])
            lo, hi = min(0.0, f(a), f(b)), max(0.0, f(a), f(b))
            assert lo - 1e-12 <= g(x) <= hi + 1e-12
        assert g((a + b) / 2) == 0.0


@pytest.mark.parametrize("m, n", [(1, 9), (2, 6), (3, 4)])
def test_fast_path_matches_dense_sum(m, n):
    rng = np.random.default_rng(m)
    g = grid_build(lambda y: np.cos(y).prod(-1), m, n, 0.3)
    x = rng.uniform(-0.1, 1.1, (3000, m))
    np.testing.assert_allclose(grid_eval(g, x), grid_eval_dense(g, x), atol=1e-12)


@pytest.mark.parametrize("m, n", [(1, 8), (2, 8), (3, 4)])
def test_partition_property(m, n):
    g = grid_build(lambda y: y.sum(-1), m, n, 0.1)
    axis = np.linspace(0, 1, {1: 4001, 2: 121, 3: 31}[m])
    x = np.stack(np.meshgrid(*[axis] * m, indexing="ij"), -1).reshape(-1, m)
    inside = g.in_plateau(x)
    counts = active_bumps(g, x)
    assert np.all(counts[inside] == 1)
    assert np.all(counts[~inside] == 0)
    for cell in itertools.product(range(g.half), repeat=m):
        b = g.bump(x[inside], np.array(cell))
        assert np.all((b == 0.0) | (b == 1.0))


def test_box_coordinates():
    g = grid_build(lambda y: y[..., 0] - y[..., 1], 2, 8, 0.05, lower=[1.0, -2.0], upper=[3.0, 2.0])
    pts = g.grid_points()
    assert np.all(pts[:, 0] > 1) and np.all(pts[:, 1] < 2)
    np.testing.assert_array_equal(g(pts), pts[:, 0] - pts[:, 1])


def test_outside_box_is_zero_and_dim_checked():
    g = grid_build(lambda y: np.ones(len(y)), 2, 4, 0.1)
    assert g(np.array([1.5, 0.5])) == 0.0
    with pytest.raises(DimensionMismatch):
        g(np.zeros(3))


def test_values_shape_validated():
    with pytest.raises(PreconditionError):
        GridNet(2, 4, 0.1, np.zeros((3, 3)))
