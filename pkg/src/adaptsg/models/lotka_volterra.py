"""Competitive Lotka-Volterra system for three species.

``dz_i/dt = r_i z_i (1 - sum_j alpha_ij z_j)`` on (0, T].  The nine random
inputs are the growth rates and the off-diagonal interaction coefficients;
the quantity of interest is ``z_3(T)``.  The forward problem is stepped with
backward Euler, the linearised adjoint with the trapezoidal rule.
"""

import numpy as np

from .base import ModelError, ModelProblem

#: parameter order of the random vector
PARAMETERS = ("r1", "r2", "r3", "a12", "a13", "a21", "a23", "a31", "a32")
_OFFDIAG = [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]


def rhs(z, r, alpha):
    """Right-hand side for batched states ``z`` of shape (M, 3)."""
    return r * z * (1.0 - np.einsum("mij,mj->mi", alpha, z))


def jacobian(z, r, alpha):
    """``d rhs_i / d z_j = r_i [delta_ij (1 - (alpha z)_i) - z_i alpha_ij]``, shape (M, 3, 3)."""
    az = np.einsum("mij,mj->mi", alpha, z)
    J = -(r * z)[:, :, None] * alpha
    idx = np.arange(3)
    J[:, idx, idx] += r * (1.0 - az)
    return J


def backward_euler(z0, r, alpha, dt, n_steps, tol=1e-12, max_iter=50, max_halvings=10):
    """Backward Euler trajectories, shape ``(M, n_steps + 1, 3)``.

    Each step is solved with Newton's method started from an explicit Euler
    predictor; a step that increases the residual is halved up to
    ``max_halvings`` times.
    """
    r = np.atleast_2d(r)
    alpha = np.asarray(alpha, dtype=float).reshape(len(r), 3, 3)
    M = len(r)
    traj = np.empty((M, n_steps + 1, 3))
    z = np.broadcast_to(np.asarray(z0, dtype=float), (M, 3)).copy()
    traj[:, 0] = z
    eye = np.eye(3)
    for n in range(n_steps):
        y = z + dt * rhs(z, r, alpha)
        G = y - z - dt * rhs(y, r, alpha)
        for it in range(max_iter):
            if np.max(np.abs(G)) < tol:
                break
            step = np.linalg.solve(eye - dt * jacobian(y, r, alpha), -G[:, :, None])[:, :, 0]
            norm = np.linalg.norm(G, axis=1)
            lam = np.ones(M)
            for _ in range(max_halvings):
                trial = y + lam[:, None] * step
                G_new = trial - z - dt * rhs(trial, r, alpha)
                worse = np.linalg.norm(G_new, axis=1) > norm
                if not worse.any():
                    break
                lam[worse] *= 0.5
            y, G = trial, G_new
            if np.max(np.abs(step * lam[:, None])) < tol:
                break
        else:
            raise ModelError(f"Newton iteration did not converge in step {n}")
        if not np.all(np.isfinite(y)):
            raise ModelError(f"non-finite state in step {n}")
        z = y
        traj[:, n + 1] = z
    return traj


def trapezoidal_adjoint(traj, r, alpha, dt, terminal=(0.0, 0.0, 1.0)):
    """Solve ``-dphi/dt = J(z(t))^T phi`` backwards from ``phi(T) = terminal``."""
    traj = np.asarray(traj, dtype=float)
    M, n1, _ = traj.shape
    r = np.atleast_2d(r)
    alpha = np.asarray(alpha, dtype=float).reshape(M, 3, 3)
    phi = np.empty_like(traj)
    phi[:, -1] = terminal
    eye = np.eye(3)
    Jt_next = np.swapaxes(jacobian(traj[:, -1], r, alpha), 1, 2)
    for n in range(n1 - 2, -1, -1):
        Jt = np.swapaxes(jacobian(traj[:, n], r, alpha), 1, 2)
        b = phi[:, n + 1] + 0.5 * dt * np.einsum("mij,mj->mi", Jt_next, phi[:, n + 1])
        phi[:, n] = np.linalg.solve(eye - 0.5 * dt * Jt, b[:, :, None])[:, :, 0]
        Jt_next = Jt
    return phi


_GAUSS2 = 0.5 + np.array([-1.0, 1.0]) / (2.0 * np.sqrt(3.0))


def weighted_residual(traj, phi, r, alpha, dt):
    """``-int_0^T phi . (dz/dt - f(z)) dt`` for piecewise linear ``z`` and ``phi``.

    Two-point Gauss quadrature per step is exact for the cubic integrand.
    """
    traj = np.asarray(traj, dtype=float)
    phi = np.asarray(phi, dtype=float)
    M = len(traj)
    r = np.atleast_2d(r)
    alpha = np.asarray(alpha, dtype=float).reshape(M, 3, 3)
    dz = (traj[:, 1:] - traj[:, :-1]) / dt
    total = np.zeros(M)
    for s in _GAUSS2:
        zq = (1.0 - s) * traj[:, :-1] + s * traj[:, 1:]
        pq = (1.0 - s) * phi[:, :-1] + s * phi[:, 1:]
        f = r[:, None, :] * zq * (1.0 - np.einsum("mij,mnj->mni", alpha, zq))
        total += 0.5 * dt * np.einsum("mni,mni->m", pq, dz - f)
    return -total


class LotkaVolterraModel(ModelProblem):
    """Three-species competition benchmark on the unit cube of 9 parameters.

    Parameters
    ----------
    n_steps : int
        Time steps on ``[0, T]``.
    horizon : float
    z0 : float or sequence of 3
        Initial populations.
    alpha_diag : float or sequence of 3
        Self-interaction coefficients.
    bounds : tuple
        Interval the unit-cube variables are mapped onto.
    cost_ratio : float
    """

    dim = 9

    def __init__(self, n_steps=1000, horizon=10.0, z0=0.5, alpha_diag=1.0, bounds=(0.3, 0.7), cost_ratio=25.0):
        self.n_steps = int(n_steps)
        self.horizon = float(horizon)
        self.dt = self.horizon / self.n_steps
        self.z0 = np.broadcast_to(np.asarray(z0, dtype=float), (3,)).copy()
        self.alpha_diag = np.broadcast_to(np.asarray(alpha_diag, dtype=float), (3,)).copy()
        self.bounds = tuple(bounds)
        self.cost_ratio = float(cost_ratio)
        self.forward_size = 3 * (self.n_steps + 1)
        self.adjoint_size = 3 * (self.n_steps + 1)

    def config(self):
        return {
            "model": "lotka_volterra",
            "d": self.dim,
            "N_t": self.n_steps,
            "T": self.horizon,
            "z0": self.z0.tolist(),
            "alpha_diag": self.alpha_diag.tolist(),
            "cost_ratio_C": self.cost_ratio,
        }

    def parameters(self, xi):
        """Map unit-cube points to ``(r, alpha)`` with ``r`` (M, 3) and ``alpha`` (M, 3, 3)."""
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        if xi.shape[1] != self.dim:
            raise ValueError(f"expected {self.dim} random variables, got {xi.shape[1]}")
        lo, hi = self.bounds
        p = lo + (hi - lo) * xi
        r = p[:, :3]
        alpha = np.zeros((len(p), 3, 3))
        alpha[:, np.arange(3), np.arange(3)] = self.alpha_diag
        for k, (i, j) in enumerate(_OFFDIAG):
            alpha[:, i, j] = p[:, 3 + k]
        return r, alpha

    def trajectory(self, r, alpha):
        """Forward trajectories for explicit parameters (no unit-cube mapping)."""
        return backward_euler(self.z0, r, alpha, self.dt, self.n_steps)

    def solve_forward(self, xi):
        r, alpha = self.parameters(xi)
        traj = self.trajectory(r, alpha)
        return traj[:, -1, 2].copy(), traj.reshape(len(traj), -1)

    def solve_adjoint(self, xi, forward):
        if forward is None:
            raise ValueError("the adjoint needs the forward trajectory")
        r, alpha = self.parameters(xi)
        traj = np.asarray(forward, dtype=float).reshape(len(r), self.n_steps + 1, 3)
        return trapezoidal_adjoint(traj, r, alpha, self.dt).reshape(len(r), -1)

    def error_estimate(self, forward, adjoint, xi):
        r, alpha = self.parameters(xi)
        M = len(r)
        forward = np.asarray(forward, dtype=float)
        adjoint = np.asarray(adjoint, dtype=float)
        if forward.shape != (M, self.forward_size) or adjoint.shape != (M, self.adjoint_size):
            raise ValueError("trajectory shapes do not match the model")
        traj = forward.reshape(M, self.n_steps + 1, 3)
        phi = adjoint.reshape(M, self.n_steps + 1, 3)
        # the initial state is exact, so only the residual term contributes
        return weighted_residual(traj, phi, r, alpha, self.dt)
