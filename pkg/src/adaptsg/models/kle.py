"""Karhunen-Loeve expansion of a squared-exponential random field on [0, 1]."""

from dataclasses import dataclass

import numpy as np


def squared_exponential(x1, x2, corr_length):
    return np.exp(-((x1 - x2) ** 2) / (2.0 * corr_length))


@dataclass(frozen=True)
class KLEField:
    """Truncated expansion ``mean + sigma * sum_k sqrt(lambda_k) phi_k(x) y_k``.

    ``nodes`` are the Nystrom nodes on which ``eigenfunctions`` (shape
    ``(n_nodes, d)``) are tabulated; values elsewhere are obtained by linear
    interpolation.
    """

    corr_length: float
    sigma: float
    mean: float
    nodes: np.ndarray
    node_weights: np.ndarray
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    all_eigenvalues: np.ndarray

    @property
    def dim(self):
        return len(self.eigenvalues)

    def modes_at(self, x):
        """Scaled modes ``sigma * sqrt(lambda_k) * phi_k(x)``, shape ``(len(x), d)``."""
        x = np.asarray(x, dtype=float).ravel()
        phi = np.column_stack(
            [np.interp(x, self.nodes, self.eigenfunctions[:, k]) for k in range(self.dim)]
        )
        return phi * (self.sigma * np.sqrt(np.maximum(self.eigenvalues, 0.0)))

    def __call__(self, x, y):
        """Field values at points ``x`` for coefficient rows ``y`` (shape ``(M, d)``)."""
        return self.mean + np.atleast_2d(y) @ self.modes_at(x).T


def kle_build(corr_length, sigma, dim, n_nodes=401, mean=0.0):
    """Nystrom discretisation of the covariance on a uniform midpoint grid.

    The kernel is sampled at ``n_nodes`` cell midpoints with equal
    quadrature weights ``1 / n_nodes``.  Eigenvectors are normalised so that
    ``sum_j phi_k(x_j)**2 / n_nodes == 1`` and signed so that their first
    non-negligible entry is positive.
    """
    if corr_length <= 0:
        raise ValueError("correlation length must be positive")
    if not 1 <= dim <= n_nodes:
        raise ValueError(f"dim must lie in [1, {n_nodes}], got {dim}")
    nodes = (np.arange(n_nodes) + 0.5) / n_nodes
    weight = 1.0 / n_nodes
    K = squared_exponential(nodes[:, None], nodes[None, :], corr_length)
    vals, vecs = np.linalg.eigh(K * weight)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    phi = vecs[:, :dim] / np.sqrt(weight)
    for k in range(dim):
        lead = np.flatnonzero(np.abs(phi[:, k]) > 1e-8 * np.abs(phi[:, k]).max())[0]
        if phi[lead, k] < 0:
            phi[:, k] *= -1.0
    return KLEField(
        corr_length=float(corr_length),
        sigma=float(sigma),
        mean=float(mean),
        nodes=nodes,
        node_weights=np.full(n_nodes, weight),
        eigenvalues=vals[:dim].copy(),
        eigenfunctions=phi,
        all_eigenvalues=vals,
    )
