"""Common interface for forward/adjoint model problems."""

import numpy as np


class ModelError(RuntimeError):
    """A forward or adjoint solve failed."""


class ModelProblem:
    """Forward/adjoint pair with a dual-weighted-residual error estimate.

    Subclasses set ``dim``, ``forward_size``, ``adjoint_size`` and
    ``cost_ratio`` and implement the three batched methods below.  All of
    them take ``xi`` as an ``(M, dim)`` array of points in the unit cube.
    """

    dim = None
    forward_size = 0
    adjoint_size = 0
    #: error estimates per unit of cost
    cost_ratio = 25.0

    def solve_forward(self, xi):
        """Return ``(qoi, forward)`` of shapes ``(M,)`` and ``(M, forward_size)``."""
        raise NotImplementedError

    def solve_adjoint(self, xi, forward):
        """Return adjoint coefficients, shape ``(M, adjoint_size)``."""
        raise NotImplementedError

    def error_estimate(self, forward, adjoint, xi):
        """Adjoint-weighted residual of ``forward`` at ``xi``, shape ``(M,)``."""
        raise NotImplementedError

    def qoi(self, xi):
        return self.solve_forward(xi)[0]

    def config(self):
        return {}


class FunctionModel(ModelProblem):
    """Wrap an analytic function as a model problem.

    The "forward solution" is the function value itself and the adjoint is
    the constant 1, so the residual estimate of an interpolated forward
    field is exact: ``phi * (f(xi) + delta(xi) - z)``.  The optional
    ``delta`` plays the part of a deterministic discretisation error.
    Mostly useful for tests and small demonstrations.
    """

    forward_size = 1
    adjoint_size = 1

    def __init__(self, func, dim, delta=None, cost_ratio=25.0):
        self.func = func
        self.dim = int(dim)
        self.delta = delta
        self.cost_ratio = float(cost_ratio)

    def _f(self, xi):
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        return np.asarray(self.func(xi), dtype=float).reshape(len(xi))

    def solve_forward(self, xi):
        f = self._f(xi)
        return f, f[:, None].copy()

    def solve_adjoint(self, xi, forward):
        return np.ones((len(np.atleast_2d(xi)), 1))

    def error_estimate(self, forward, adjoint, xi):
        target = self._f(xi)
        if self.delta is not None:
            target = target + np.asarray(self.delta(np.atleast_2d(xi)), dtype=float).reshape(len(target))
        return np.asarray(adjoint)[:, 0] * (target - np.asarray(forward)[:, 0])
