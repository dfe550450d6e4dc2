import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptsg import grid1d
from adaptsg.sparse_grid import (
    QOI_ONLY,
    DuplicatePointError,
    EmptyGridError,
    PayloadSchema,
    SparseGrid,
    is_admissible,
    load_grid,
    save_grid,
    subspace_points,
)


def full_grid(dim, levels_1d, basis="lagrange", func=None, schema=QOI_ONLY):
    """Grid holding every subspace with |l|_inf <= L (a full tensor grid)."""
    grid = SparseGrid(dim, basis, schema=schema)
    for l in itertools.product(range(levels_1d + 1), repeat=dim):
        idx, coords = subspace_points(l, grid.rule)
        vals = func(coords).reshape(len(coords), -1)
        grid.add_points(np.tile(l, (len(idx), 1)), idx, vals)
    return grid


def smolyak_grid(dim, total, basis="lagrange", func=None, schema=QOI_ONLY):
    grid = SparseGrid(dim, basis, schema=schema)
    for l in itertools.product(range(total + 1), repeat=dim):
        if sum(l) > total:
            continue
        idx, coords = subspace_points(l, grid.rule)
        grid.add_points(np.tile(l, (len(idx), 1)), idx, func(coords).reshape(len(coords), -1))
    return grid


def test_root_only():
    g = SparseGrid(3)
    g.add_points([[0, 0, 0]], [[0, 0, 0]], [[7.0]])
    np.testing.assert_array_equal(g(np.random.default_rng(0).random((5, 3))), 7.0)
    assert g.integrate()[0] == 7.0


def test_empty_grid_errors():
    g = SparseGrid(2)
    with pytest.raises(EmptyGridError):
        g(np.zeros((1, 2)))
    with pytest.raises(EmptyGridError):
        g.integrate()


def test_hat_reproduces_linear():
    g = full_grid(1, 1, "hat", lambda x: x[:, 0])
    assert g(np.array([[0.25]]))[0] == pytest.approx(0.25, abs=1e-15)
    assert g.integrate()[0] == pytest.approx(0.5, abs=1e-15)


def test_lagrange_quartic():
    g = full_grid(1, 2, "lagrange", lambda x: x[:, 0] ** 4)
    assert g(np.array([[0.3]]))[0] == pytest.approx(0.0081, abs=1e-14)


def test_compute_surplus():
    g = SparseGrid(1, "hat")
    assert g.compute_surplus([0], [0], [3.0])[0] == 3.0
    g.add_points([[0]], [[0]], [[0.5]])
    # f(x) = x: surplus at node 0 is f(0) - f(0.5)
    assert g.compute_surplus([1], [0], [0.0])[0] == pytest.approx(-0.5)
    with pytest.raises(DuplicatePointError):
        g.compute_surplus([0], [0], [1.0])
    with pytest.raises(DuplicatePointError):
        g.add_points([[0]], [[0]], [[1.0]])


def test_surplus_zero_where_exact():
    g = full_grid(1, 1, "hat", lambda x: x[:, 0])
    assert g.compute_surplus([2], [0], [0.25])[0] == pytest.approx(0.0, abs=1e-15)


def test_integrate_2d_root():
    g = SparseGrid(2)
    g.add_points([[0, 0]], [[0, 0]], [[1.5]])
    assert g.integrate()[0] == 1.5


def test_admissibility():
    assert is_admissible({(0, 0)}, (1, 0))
    assert not is_admissible({(0, 0), (1, 0)}, (1, 1))
    assert is_admissible({(0, 0), (1, 0), (0, 1)}, (1, 1))
    assert is_admissible(set(), (0, 0))


def test_subspace_points():
    idx, coords = subspace_points((0, 0))
    np.testing.assert_array_equal(coords, [[0.5, 0.5]])
    idx, coords = subspace_points((1, 0))
    np.testing.assert_array_equal(coords, [[0.0, 0.5], [1.0, 0.5]])
    idx, coords = subspace_points((1, 1))
    assert len(coords) == 4
    assert len(subspace_points((3, 2, 0))[0]) == 4 * 2 * 1


@pytest.mark.parametrize("basis,tol", [("lagrange", 1e-10), ("hat", 1e-12)])
def test_interpolation_property(basis, tol):
    f = lambda x: np.exp(np.sin(3 * x[:, 0]) + x[:, 1] * x[:, 2])
    g = smolyak_grid(3, 4, basis, f)
    np.testing.assert_allclose(g(g.coords), f(g.coords), atol=tol)
    np.testing.assert_allclose(g.interpolate(g.coords)[:, 0], g.values[:, 0], atol=tol)


@pytest.mark.parametrize("L", range(1, 6))
def test_isotropic_exactness_1d(L, rng):
    coeffs = rng.standard_normal(2**L + 1)
    f = lambda x: np.polynomial.polynomial.polyval(x[:, 0], coeffs)
    g = full_grid(1, L, "lagrange", f)
    X = rng.random((100, 1))
    np.testing.assert_allclose(g(X), f(X), atol=1e-9)


def test_hat_locality(rng):
    f = lambda x: np.sin(4 * x[:, 0]) * np.cos(3 * x[:, 1])
    g = smolyak_grid(2, 4, "hat", f)
    X = rng.random((400, 2))
    before = g(X)
    row = g.row(((2, 2), (1, 0)))
    g._surpluses[row, 0] += 1.0
    changed = np.abs(g(X) - before) > 0
    # support of the tensor hat: |x - x_node| < half-width in both directions
    node = g.coords[row]
    inside = (np.abs(X[:, 0] - node[0]) < 0.25) & (np.abs(X[:, 1] - node[1]) < 0.25)
    assert not np.any(changed & ~inside)
    assert np.any(changed)


def _midpoint(g, n, dim):
    t = (np.arange(n) + 0.5) / n
    mesh = np.array(list(itertools.product(t, repeat=dim)))
    return g(mesh).mean()


@pytest.mark.parametrize("dim", [1, 2])
def test_integrate_matches_tensor_midpoint_lagrange(dim):
    f = lambda x: np.exp(x.sum(axis=1)) * (1 + x[:, 0] ** 2)
    g = smolyak_grid(dim, 3, "lagrange", f)
    # 101**d midpoint rule, Richardson-extrapolated with 303**d to remove the h**2 term
    brute = (9 * _midpoint(g, 303, dim) - _midpoint(g, 101, dim)) / 8
    assert g.integrate()[0] == pytest.approx(brute, abs=1e-8)


@pytest.mark.parametrize("dim", [1, 2])
def test_integrate_matches_tensor_midpoint_hat(dim):
    f = lambda x: np.exp(x.sum(axis=1)) * (1 + x[:, 0] ** 2)
    g = smolyak_grid(dim, 3, "hat", f)
    # the interpolant is multilinear on cells of width 1/8, where the midpoint rule is exact
    assert g.integrate()[0] == pytest.approx(_midpoint(g, 128, dim), abs=1e-12)


def test_vector_payload():
    schema = PayloadSchema(forward=3, adjoint=2)
    f = lambda x: np.column_stack([x.sum(axis=1), x, x[:, :1] * 2, x[:, 1:2] ** 2, x[:, :1] - x[:, 1:2]])[:, :6]
    g = smolyak_grid(2, 2, "lagrange", f, schema)
    X = np.random.default_rng(1).random((10, 2))
    qoi, fwd, adj = schema.split(g.interpolate(X))
    assert fwd.shape == (10, 3) and adj.shape == (10, 2)
    np.testing.assert_allclose(qoi, X.sum(axis=1), atol=1e-13)
    np.testing.assert_allclose(g(X), qoi)


def test_with_values_recomputes_surpluses():
    f = lambda x: x[:, 0] * x[:, 1]
    g = smolyak_grid(2, 3, "lagrange", f)
    h = g.with_values(g.values + 1.0)
    np.testing.assert_allclose(h.surpluses[1:], g.surpluses[1:], atol=1e-14)
    assert h.surpluses[0, 0] == pytest.approx(g.surpluses[0, 0] + 1.0)


def test_add_points_group_order_independent():
    f = lambda x: np.exp(x[:, 0] - 2 * x[:, 1])
    g = smolyak_grid(2, 3, "hat", f)
    h = SparseGrid(2, "hat")
    order = np.random.default_rng(3).permutation(len(g))
    h.add_points(g.levels[order], g.indices[order], g.values[order])
    X = np.random.default_rng(4).random((50, 2))
    np.testing.assert_allclose(h(X), g(X), atol=1e-13)


def test_point_identity_injective():
    seen = {}
    for l in itertools.product(range(5), repeat=2):
        idx, coords = subspace_points(l, "dyadic")
        for i, c in zip(idx, coords):
            key = tuple(np.round(c, 15))
            assert key not in seen
            seen[key] = (l, tuple(i))


def test_serialisation_roundtrip(tmp_path):
    schema = PayloadSchema(forward=2, adjoint=1)
    f = lambda x: np.column_stack([x[:, 0], x, x[:, 1] ** 2])
    g = smolyak_grid(2, 2, "lagrange", f, schema)
    path = tmp_path / "g.json"
    save_grid(g, path, note="x")
    h, extra = load_grid(path)
    assert extra["note"] == "x" and extra["version"] == 1
    X = np.random.default_rng(0).random((7, 2))
    np.testing.assert_array_equal(h.interpolate(X), g.interpolate(X))
    assert h.schema == schema and h.basis == g.basis and h.rule == g.rule


@settings(max_examples=25, deadline=None)
@given(
    levels=st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=8),
    basis=st.sampled_from(["lagrange", "hat"]),
)
def test_interpolation_on_downward_closed_sets(levels, basis):
    # close the random set downwards, then check the interpolation property
    closed = set()
    for l in levels:
        closed.update(itertools.product(range(l[0] + 1), range(l[1] + 1)))
    f = lambda x: np.cos(2 * x[:, 0]) + x[:, 1] ** 3
    g = SparseGrid(2, basis)
    for l in sorted(closed, key=lambda t: (sum(t), t)):
        idx, coords = subspace_points(l, g.rule)
        g.add_points(np.tile(l, (len(idx), 1)), idx, f(coords)[:, None])
    np.testing.assert_allclose(g(g.coords), f(g.coords), atol=1e-10)
