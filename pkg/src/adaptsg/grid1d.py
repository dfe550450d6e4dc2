"""Nested one-dimensional point families and hierarchical bases on [0, 1].

Two nested rules are provided:

``"clenshaw_curtis"``
    Level 0 is the midpoint, level ``l >= 1`` holds the ``2**l + 1`` extrema
    ``(1 - cos(pi j / 2**l)) / 2``.
``"dyadic"``
    Level 0 is the midpoint, level 1 adds the two boundary points and every
    further level adds the midpoints of the existing gaps.

A 1D basis function is identified by ``(level, index)`` where ``index``
enumerates, in ascending order, the points that are *new* at ``level``.
Both rules share the same parent/child structure in that numbering, which is
what local refinement walks.
"""

from functools import lru_cache

import numpy as np

RULES = ("clenshaw_curtis", "dyadic")
BASES = ("lagrange", "hat")

#: Rule used by each basis unless told otherwise.
DEFAULT_RULE = {"lagrange": "clenshaw_curtis", "hat": "dyadic"}


class BasisIndexError(ValueError):
    """Raised for a ``(level, index)`` pair that names no basis function."""


def _check_rule(kind):
    if kind not in RULES:
        raise ValueError(f"unknown rule {kind!r}; expected one of {RULES}")


def num_points(kind, level):
    """Size of the full nested point set at ``level``."""
    _check_rule(kind)
    if level < 0:
        raise ValueError("level must be non-negative")
    return 1 if level == 0 else 2**level + 1


def num_new_points(level):
    """Number of points introduced at ``level`` (identical for both rules)."""
    if level < 0:
        raise ValueError("level must be non-negative")
    if level == 0:
        return 1
    if level == 1:
        return 2
    return 2 ** (level - 1)


@lru_cache(maxsize=None)
def _points(kind, level):
    _check_rule(kind)
    if level < 0:
        raise ValueError("level must be non-negative")
    if level == 0:
        pts = np.array([0.5])
    elif kind == "clenshaw_curtis":
        n = 2**level
        pts = 0.5 * (1.0 - np.cos(np.pi * np.arange(n + 1) / n))
        # exact symmetry; cos() is off by an ulp on the mirrored half
        pts = 0.5 * (pts + (1.0 - pts[::-1]))
        pts[n // 2] = 0.5
    else:
        pts = np.linspace(0.0, 1.0, 2**level + 1)
    pts.setflags(write=False)
    return pts


def points(kind, level):
    """Sorted full point set of the rule at ``level``."""
    return _points(kind, int(level))


@lru_cache(maxsize=None)
def _new_positions(level):
    # positions of the new points inside the sorted full set
    if level == 0:
        return np.array([0])
    if level == 1:
        return np.array([0, 2])
    return np.arange(1, 2**level, 2)


def new_points(kind, level):
    """Coordinates of the points new at ``level``, ordered by local index."""
    return points(kind, level)[_new_positions(int(level))]


def coordinate(kind, level, index):
    level, index = int(level), int(index)
    if not 0 <= index < num_new_points(level):
        raise BasisIndexError(f"no point with index {index} at level {level}")
    return float(new_points(kind, level)[index])


def parent(level, index):
    """1D hierarchical parent of ``(level, index)``; ``None`` for the root."""
    if level == 0:
        return None
    if level == 1:
        return (0, 0)
    if level == 2:
        return (1, index)
    return (level - 1, index // 2)


def children(level, index):
    """1D hierarchical children of ``(level, index)``."""
    if level == 0:
        return [(1, 0), (1, 1)]
    if level == 1:
        return [(2, index)]
    return [(level + 1, 2 * index), (level + 1, 2 * index + 1)]


@lru_cache(maxsize=None)
def _barycentric_weights(kind, level):
    x = points(kind, level)
    n = len(x)
    if kind == "clenshaw_curtis" and n > 1:
        w = (-1.0) ** np.arange(n)
        w[0] *= 0.5
        w[-1] *= 0.5
    else:
        # scaled product formula; the scale cancels in the barycentric ratio
        diff = (x[:, None] - x[None, :]) * 4.0
        np.fill_diagonal(diff, 1.0)
        w = 1.0 / np.prod(diff, axis=1)
    w.setflags(write=False)
    return w


def _lagrange_level(kind, level, x):
    nodes = points(kind, level)
    w = _barycentric_weights(kind, level)
    cols = _new_positions(level)
    diff = x[:, None] - nodes[None, :]
    # points this close to a node would overflow the barycentric terms
    hit = np.abs(diff) < 1e-250
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        terms = w / diff
        out = terms[:, cols] / terms.sum(axis=1, keepdims=True)
    rows = hit.any(axis=1)
    if rows.any():
        out[rows] = hit[rows][:, cols].astype(float)
    return out


def _hat_level(kind, level, x):
    if level == 0:
        return np.ones((len(x), 1))
    if level == 1:
        return np.stack([np.maximum(0.0, 1.0 - 2.0 * x), np.maximum(0.0, 2.0 * x - 1.0)], axis=1)
    nodes = new_points(kind, level)
    # half-width is the distance to the neighbouring coarser nodes
    full = points(kind, level)
    pos = _new_positions(level)
    left = nodes - full[pos - 1]
    right = full[pos + 1] - nodes
    d = x[:, None] - nodes[None, :]
    val = np.where(d < 0.0, 1.0 + d / left, 1.0 - d / right)
    return np.clip(val, 0.0, None)


def eval_level(basis, kind, level, x):
    """Evaluate every basis function new at ``level``.

    Parameters
    ----------
    basis : {"lagrange", "hat"}
    kind : {"clenshaw_curtis", "dyadic"}
    level : int
    x : array_like, shape (M,)

    Returns
    -------
    ndarray, shape (M, num_new_points(level))
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    level = int(level)
    if level < 0:
        raise BasisIndexError("level must be non-negative")
    if level == 0:
        return np.ones((len(x), 1))
    if basis == "lagrange":
        return _lagrange_level(kind, level, x)
    if basis == "hat":
        return _hat_level(kind, level, x)
    raise ValueError(f"unknown basis {basis!r}; expected one of {BASES}")


def eval_basis(basis, kind, level, index, x):
    """Value of the single basis function ``(level, index)`` at ``x``."""
    level, index = int(level), int(index)
    if level < 0 or not 0 <= index < num_new_points(level):
        raise BasisIndexError(f"no basis function ({level}, {index})")
    out = eval_level(basis, kind, level, x)[:, index]
    return float(out[0]) if np.ndim(x) == 0 else out


@lru_cache(maxsize=None)
def _level_weights(basis, kind, level):
    if level == 0:
        w = np.array([1.0])
    elif basis == "hat":
        if level == 1:
            w = np.array([0.25, 0.25])
        else:
            full = points(kind, level)
            pos = _new_positions(level)
            w = 0.5 * (full[pos + 1] - full[pos - 1])
    else:
        # Gauss-Legendre with m_l nodes integrates the degree m_l - 1 basis exactly
        gx, gw = np.polynomial.legendre.leggauss(num_points(kind, level))
        gx = 0.5 * (gx + 1.0)
        w = 0.5 * gw @ _lagrange_level(kind, level, gx)
    w.setflags(write=False)
    return w


def level_weights(basis, kind, level):
    """Integrals over [0, 1] of every basis function new at ``level``."""
    if basis not in BASES:
        raise ValueError(f"unknown basis {basis!r}; expected one of {BASES}")
    _check_rule(kind)
    return _level_weights(basis, kind, int(level))


def basis_weight(basis, kind, level, index):
    level, index = int(level), int(index)
    if level < 0 or not 0 <= index < num_new_points(level):
        raise BasisIndexError(f"no basis function ({level}, {index})")
    return float(level_weights(basis, kind, level)[index])
