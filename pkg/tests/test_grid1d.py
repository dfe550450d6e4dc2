import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptsg import grid1d


def test_cc_points_low_levels():
    assert grid1d.points("clenshaw_curtis", 0).tolist() == [0.5]
    assert grid1d.points("clenshaw_curtis", 1).tolist() == [0.0, 0.5, 1.0]
    # (1 - cos(pi j / 4)) / 2 evaluated independently
    expected = [(1 - np.cos(np.pi * j / 4)) / 2 for j in range(5)]
    np.testing.assert_allclose(grid1d.points("clenshaw_curtis", 2), expected, atol=1e-15)
    np.testing.assert_allclose(grid1d.points("clenshaw_curtis", 2)[1], 0.146447, atol=1e-6)


def test_new_points():
    np.testing.assert_array_equal(grid1d.new_points("clenshaw_curtis", 1), [0.0, 1.0])
    np.testing.assert_allclose(grid1d.new_points("clenshaw_curtis", 2), [0.146447, 0.853553], atol=1e-6)
    np.testing.assert_array_equal(grid1d.new_points("dyadic", 2), [0.25, 0.75])
    np.testing.assert_array_equal(grid1d.new_points("dyadic", 0), [0.5])


@pytest.mark.parametrize("kind", grid1d.RULES)
def test_point_counts(kind):
    assert [grid1d.num_new_points(l) for l in range(5)] == [1, 2, 2, 4, 8]
    for l in range(8):
        assert len(grid1d.points(kind, l)) == (1 if l == 0 else 2**l + 1)
        assert sum(grid1d.num_new_points(k) for k in range(l + 1)) == grid1d.num_points(kind, l)


@pytest.mark.parametrize("kind", grid1d.RULES)
@pytest.mark.parametrize("level", range(1, 9))
def test_nesting_sorted_symmetric(kind, level):
    fine = grid1d.points(kind, level)
    coarse = grid1d.points(kind, level - 1)
    assert np.all(np.diff(fine) > 0)
    assert fine[0] >= 0 and fine[-1] <= 1
    np.testing.assert_allclose(fine, 1 - fine[::-1], atol=1e-15)
    for x in coarse:
        assert np.min(np.abs(fine - x)) < 1e-15
    # old plus new points make up the full set
    both = np.sort(np.concatenate([coarse, grid1d.new_points(kind, level)]))
    np.testing.assert_array_equal(both, fine)


def test_hat_values():
    assert grid1d.eval_basis("hat", "dyadic", 0, 0, 0.3) == 1.0
    assert grid1d.eval_basis("hat", "dyadic", 1, 0, 0.25) == 0.5
    assert grid1d.eval_basis("hat", "dyadic", 1, 1, 0.25) == 0.0
    assert grid1d.eval_basis("hat", "dyadic", 2, 0, 0.125) == 0.5
    assert grid1d.eval_basis("hat", "dyadic", 2, 0, 0.5) == 0.0


def test_lagrange_value():
    # (x - 0.5)(x - 1) / ((0 - 0.5)(0 - 1)) at 0.25
    assert grid1d.eval_basis("lagrange", "clenshaw_curtis", 1, 0, 0.25) == pytest.approx(0.375, abs=1e-15)


def test_invalid_basis_id():
    with pytest.raises(grid1d.BasisIndexError):
        grid1d.eval_basis("hat", "dyadic", 2, 2, 0.3)
    with pytest.raises(grid1d.BasisIndexError):
        grid1d.eval_basis("lagrange", "clenshaw_curtis", -1, 0, 0.3)
    with pytest.raises(grid1d.BasisIndexError):
        grid1d.basis_weight("hat", "dyadic", 0, 1)


def test_weights():
    assert grid1d.basis_weight("hat", "dyadic", 0, 0) == 1.0
    assert grid1d.basis_weight("hat", "dyadic", 1, 0) == 0.25
    for i in range(2):
        assert grid1d.basis_weight("hat", "dyadic", 2, i) == 0.25
    # integral of 2 (x - 0.5)(x - 1) over [0, 1] is 1/6
    assert grid1d.basis_weight("lagrange", "clenshaw_curtis", 1, 0) == pytest.approx(1 / 6, abs=1e-14)


@pytest.mark.parametrize("level", range(1, 8))
def test_lagrange_cardinality(level):
    nodes = grid1d.points("clenshaw_curtis", level)
    vals = grid1d.eval_level("lagrange", "clenshaw_curtis", level, nodes)
    new = grid1d.new_points("clenshaw_curtis", level)
    expected = (nodes[:, None] == new[None, :]).astype(float)
    np.testing.assert_allclose(vals, expected, atol=1e-12)


@pytest.mark.parametrize("level", range(2, 7))
def test_hat_vanishes_at_other_nodes(level):
    nodes = grid1d.points("dyadic", level)
    vals = grid1d.eval_level("hat", "dyadic", level, nodes)
    new = grid1d.new_points("dyadic", level)
    np.testing.assert_array_equal(vals, (nodes[:, None] == new[None, :]).astype(float))


@pytest.mark.parametrize("basis,kind", [("hat", "dyadic"), ("lagrange", "clenshaw_curtis")])
@pytest.mark.parametrize("level", range(0, 6))
def test_weights_match_numerical_integral(basis, kind, level):
    from scipy.integrate import quad

    for i in range(grid1d.num_new_points(level)):
        brk = list(grid1d.points("dyadic", level + 1)) if basis == "hat" else None
        val = quad(lambda x: grid1d.eval_basis(basis, kind, level, i, x), 0, 1, points=brk, limit=200)[0]
        assert grid1d.basis_weight(basis, kind, level, i) == pytest.approx(val, abs=1e-10)


@pytest.mark.parametrize("kind", grid1d.RULES)
def test_parent_child_consistency(kind):
    for level in range(0, 7):
        for i in range(grid1d.num_new_points(level)):
            for cl, ci in grid1d.children(level, i):
                assert grid1d.parent(cl, ci) == (level, i)
    for level in range(2, 7):
        # a child lies strictly between its parent and the parent's neighbours
        for i in range(grid1d.num_new_points(level)):
            pl, pi = grid1d.parent(level, i)
            x = grid1d.coordinate("dyadic", level, i)
            xp = grid1d.coordinate("dyadic", pl, pi)
            assert abs(x - xp) == pytest.approx(2.0**-level)


def _hier_interp_1d(basis, kind, L, f, x):
    """Hierarchise f on levels 0..L and evaluate at x (independent of SparseGrid)."""
    total = np.zeros_like(x)
    coefs = []
    for l in range(L + 1):
        nodes = grid1d.new_points(kind, l)
        prev = sum(c @ grid1d.eval_level(basis, kind, ll, nodes).T for ll, c in enumerate(coefs)) if coefs else 0.0
        coefs.append(f(nodes) - prev)
    for l, c in enumerate(coefs):
        total = total + grid1d.eval_level(basis, kind, l, x) @ c
    return total, coefs


@pytest.mark.parametrize("L", range(0, 5))
def test_partition_of_unity_at_nodes(L):
    for basis, kind in [("hat", "dyadic"), ("lagrange", "clenshaw_curtis")]:
        nodes = grid1d.points(kind, L)
        vals, _ = _hier_interp_1d(basis, kind, L, np.ones_like, nodes)
        np.testing.assert_allclose(vals, 1.0, atol=1e-13)


@pytest.mark.parametrize("L", range(0, 4))
def test_weighted_surpluses_integrate_polynomials(L):
    deg = 2**L
    f = lambda x: x**deg + 0.3 * x - 1
    exact = 1.0 / (deg + 1) + 0.15 - 1
    _, coefs = _hier_interp_1d("lagrange", "clenshaw_curtis", L, f, np.zeros(1))
    total = sum(c @ grid1d.level_weights("lagrange", "clenshaw_curtis", l) for l, c in enumerate(coefs))
    if L == 0:
        exact = f(np.array([0.5]))[0]
    assert total == pytest.approx(exact, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(level=st.integers(0, 10), x=st.floats(0, 1))
def test_hat_values_bounded(level, x):
    vals = grid1d.eval_level("hat", "dyadic", level, np.array([x]))
    assert np.all(vals >= 0) and np.all(vals <= 1)
    # at most one hat of a level is non-zero, except exactly at shared endpoints
    assert np.count_nonzero(vals) <= 2


@settings(max_examples=50, deadline=None)
@given(level=st.integers(1, 9), x=st.floats(0, 1))
def test_lagrange_reproduces_constant(level, x):
    interp, _ = _hier_interp_1d("lagrange", "clenshaw_curtis", level, np.ones_like, np.array([x]))
    assert interp[0] == pytest.approx(1.0, abs=1e-9)
