"""Hierarchical sparse grid surrogates with scalar or vector payloads.

A :class:`SparseGrid` stores points ``(l, i)`` (a level multi-index and a
vector of 1D local indices), the raw function values observed there and the
hierarchical surpluses.  Evaluation is the usual weighted sum of tensor
product basis functions.

Payloads are dense rows.  Column 0 is always the quantity of interest; the
optional ``forward`` and ``adjoint`` blocks hold solution coefficients so
that solution fields can be interpolated in the random variables.
"""

import itertools
import json
from dataclasses import dataclass

import numpy as np

from . import grid1d


class EmptyGridError(ValueError):
    """Raised when evaluating a grid that holds no points."""


class DuplicatePointError(ValueError):
    """Raised when adding a point that is already part of the grid."""


@dataclass(frozen=True)
class PayloadSchema:
    """Column layout of the payload rows: ``[qoi | forward | adjoint]``."""

    forward: int = 0
    adjoint: int = 0

    @property
    def width(self):
        return 1 + self.forward + self.adjoint

    @property
    def has_fields(self):
        return self.forward > 0 and self.adjoint > 0

    def split(self, values):
        """Return ``(qoi, forward, adjoint)`` views of payload rows."""
        values = np.asarray(values)
        qoi = values[..., 0]
        fwd = values[..., 1 : 1 + self.forward]
        adj = values[..., 1 + self.forward :]
        return qoi, fwd, adj

    def join(self, qoi, forward=None, adjoint=None):
        qoi = np.asarray(qoi, dtype=float).reshape(-1, 1)
        blocks = [qoi]
        if self.forward:
            blocks.append(np.asarray(forward, dtype=float).reshape(len(qoi), self.forward))
        if self.adjoint:
            blocks.append(np.asarray(adjoint, dtype=float).reshape(len(qoi), self.adjoint))
        return np.hstack(blocks)


QOI_ONLY = PayloadSchema()


def is_admissible(accepted, candidate):
    """True iff every backward neighbour of ``candidate`` is in ``accepted``."""
    candidate = tuple(candidate)
    for k, lk in enumerate(candidate):
        if lk >= 1:
            back = candidate[:k] + (lk - 1,) + candidate[k + 1 :]
            if back not in accepted:
                return False
    return True


def subspace_points(levels, rule="clenshaw_curtis"):
    """Points of the hierarchical difference space ``W_l``.

    Returns
    -------
    indices : ndarray, shape (n, d)
        Local new-point indices, in lexicographic order.
    coords : ndarray, shape (n, d)
    """
    levels = tuple(int(l) for l in levels)
    per_dim = [range(grid1d.num_new_points(l)) for l in levels]
    indices = np.array(list(itertools.product(*per_dim)), dtype=int).reshape(-1, len(levels))
    coords = np.empty(indices.shape)
    for k, l in enumerate(levels):
        coords[:, k] = grid1d.new_points(rule, l)[indices[:, k]]
    return indices, coords


def point_coords(levels, indices, rule):
    levels = np.atleast_2d(levels)
    indices = np.atleast_2d(indices)
    coords = np.empty(levels.shape)
    for k in range(levels.shape[1]):
        for l in np.unique(levels[:, k]):
            m = levels[:, k] == l
            coords[m, k] = grid1d.new_points(rule, l)[indices[m, k]]
    return coords


class SparseGrid:
    """Hierarchical interpolant on ``[0, 1]**dim``.

    Parameters
    ----------
    dim : int
    basis : {"lagrange", "hat"}
    rule : str, optional
        Nested 1D rule; defaults to Clenshaw-Curtis for the Lagrange basis
        and the dyadic rule for hats.
    schema : PayloadSchema, optional
    """

    def __init__(self, dim, basis="lagrange", rule=None, schema=QOI_ONLY):
        if dim < 1:
            raise ValueError("dim must be positive")
        if basis not in grid1d.BASES:
            raise ValueError(f"unknown basis {basis!r}")
        self.dim = int(dim)
        self.basis = basis
        self.rule = rule or grid1d.DEFAULT_RULE[basis]
        self.schema = schema
        self._levels = np.zeros((0, self.dim), dtype=int)
        self._indices = np.zeros((0, self.dim), dtype=int)
        self._coords = np.zeros((0, self.dim))
        self._values = np.zeros((0, schema.width))
        self._surpluses = np.zeros((0, schema.width))
        self._lookup = {}

    def __len__(self):
        return len(self._lookup)

    @property
    def levels(self):
        return self._levels

    @property
    def indices(self):
        return self._indices

    @property
    def coords(self):
        return self._coords

    @property
    def values(self):
        return self._values

    @property
    def surpluses(self):
        return self._surpluses

    @staticmethod
    def key(levels, indices):
        return (tuple(int(v) for v in levels), tuple(int(v) for v in indices))

    def __contains__(self, key):
        return key in self._lookup

    def row(self, key):
        return self._lookup[key]

    def keys(self):
        return list(self._lookup)

    def subspaces(self):
        """Distinct level multi-indices present in the grid."""
        return {tuple(int(v) for v in l) for l in self._levels}

    def basis_matrix(self, X):
        """Tensor basis values, shape ``(len(X), len(self))``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        B = np.ones((len(X), len(self)))
        for k in range(self.dim):
            lk = self._levels[:, k]
            for l in np.unique(lk):
                if l == 0:
                    continue
                m = lk == l
                vals = grid1d.eval_level(self.basis, self.rule, l, X[:, k])
                B[:, m] *= vals[:, self._indices[m, k]]
        return B

    def interpolate(self, X):
        """Interpolated payload rows at ``X``, shape ``(M, schema.width)``."""
        if not len(self):
            raise EmptyGridError("cannot evaluate an empty sparse grid")
        return self.basis_matrix(X) @ self._surpluses

    def __call__(self, X):
        """Interpolated quantity of interest at ``X``."""
        if not len(self):
            raise EmptyGridError("cannot evaluate an empty sparse grid")
        return self.basis_matrix(X) @ self._surpluses[:, 0]

    def weights(self):
        """Integral of every stored basis function (product of 1D factors)."""
        w = np.ones(len(self))
        for k in range(self.dim):
            lk = self._levels[:, k]
            for l in np.unique(lk):
                if l == 0:
                    continue
                m = lk == l
                w[m] *= grid1d.level_weights(self.basis, self.rule, l)[self._indices[m, k]]
        return w

    def integrate(self):
        if not len(self):
            raise EmptyGridError("cannot integrate an empty sparse grid")
        return self.weights() @ self._surpluses

    def compute_surplus(self, levels, indices, raw):
        """Surplus of a prospective point: ``raw`` minus the current interpolant."""
        key = self.key(levels, indices)
        if key in self._lookup:
            raise DuplicatePointError(f"point {key} already in grid")
        raw = np.asarray(raw, dtype=float).reshape(self.schema.width)
        if not len(self):
            return raw.copy()
        x = point_coords(np.array([key[0]]), np.array([key[1]]), self.rule)
        return raw - self.interpolate(x)[0]

    def add_points(self, levels, indices, values):
        """Insert points with raw ``values`` and compute their surpluses.

        Points are processed in groups of equal ``|l|_1``.  Within such a
        group no point's basis function is non-zero at another's node, so
        each group is hierarchised against the grid as it stood before it.

        Returns
        -------
        ndarray
            Row numbers of the inserted points, in input order.
        """
        levels = np.asarray(levels, dtype=int).reshape(-1, self.dim)
        indices = np.asarray(indices, dtype=int).reshape(-1, self.dim)
        values = np.asarray(values, dtype=float).reshape(len(levels), self.schema.width)
        keys = [self.key(l, i) for l, i in zip(levels, indices)]
        if len(set(keys)) != len(keys):
            raise DuplicatePointError("batch contains repeated points")
        for key in keys:
            if key in self._lookup:
                raise DuplicatePointError(f"point {key} already in grid")
        coords = point_coords(levels, indices, self.rule)
        order = levels.sum(axis=1)
        rows = np.empty(len(keys), dtype=int)
        for total in np.unique(order):
            m = np.flatnonzero(order == total)
            surplus = values[m].copy()
            if len(self):
                surplus -= self.interpolate(coords[m])
            start = len(self)
            self._levels = np.vstack([self._levels, levels[m]])
            self._indices = np.vstack([self._indices, indices[m]])
            self._coords = np.vstack([self._coords, coords[m]])
            self._values = np.vstack([self._values, values[m]])
            self._surpluses = np.vstack([self._surpluses, surplus])
            for j, pos in enumerate(m):
                self._lookup[keys[pos]] = start + j
                rows[pos] = start + j
        return rows

    def with_values(self, values, schema=None):
        """A new grid on the same points with different raw values.

        All surpluses are recomputed hierarchically; rows keep their order.
        """
        schema = schema or self.schema
        other = SparseGrid(self.dim, self.basis, self.rule, schema)
        if len(self):
            rows = other.add_points(self._levels, self._indices, values)
            # keep the row order of this grid
            for name in ("_levels", "_indices", "_coords", "_values", "_surpluses"):
                setattr(other, name, getattr(other, name)[rows])
            other._lookup = dict(self._lookup)
        return other

    def copy(self):
        other = SparseGrid(self.dim, self.basis, self.rule, self.schema)
        other._levels = self._levels.copy()
        other._indices = self._indices.copy()
        other._coords = self._coords.copy()
        other._values = self._values.copy()
        other._surpluses = self._surpluses.copy()
        other._lookup = dict(self._lookup)
        return other

    def to_dict(self):
        return {
            "dim": self.dim,
            "basis": self.basis,
            "rule": self.rule,
            "schema": {"forward": self.schema.forward, "adjoint": self.schema.adjoint},
            "levels": self._levels.tolist(),
            "indices": self._indices.tolist(),
            "values": self._values.tolist(),
            "surpluses": self._surpluses.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        grid = cls(data["dim"], data["basis"], data["rule"], PayloadSchema(**data["schema"]))
        levels = np.asarray(data["levels"], dtype=int).reshape(-1, grid.dim)
        indices = np.asarray(data["indices"], dtype=int).reshape(-1, grid.dim)
        grid._levels = levels
        grid._indices = indices
        grid._coords = point_coords(levels, indices, grid.rule) if len(levels) else np.zeros((0, grid.dim))
        grid._values = np.asarray(data["values"], dtype=float).reshape(-1, grid.schema.width)
        grid._surpluses = np.asarray(data["surpluses"], dtype=float).reshape(-1, grid.schema.width)
        grid._lookup = {cls.key(l, i): r for r, (l, i) in enumerate(zip(levels, indices))}
        return grid


def save_grid(grid, path, **extra):
    """Write ``grid`` (and any JSON-serialisable ``extra`` entries) to ``path``."""
    payload = {"format": "adaptsg.sparse_grid", "version": 1, "grid": grid.to_dict()}
    payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_grid(path):
    """Read a grid written by :func:`save_grid`; returns ``(grid, extras)``."""
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format") != "adaptsg.sparse_grid":
        raise ValueError(f"{path} is not a sparse grid file")
    grid = SparseGrid.from_dict(payload.pop("grid"))
    return grid, payload
