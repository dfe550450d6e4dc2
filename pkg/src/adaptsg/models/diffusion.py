"""Steady 1D diffusion with a random Karhunen-Loeve diffusivity.

Forward problem ``-(a z')' = f`` on (0, 1), ``z(0) = z(1) = 0``, discretised
with continuous piecewise linear elements.  The quantity of interest is
``J = int psi z dx`` with a normalised Gaussian bump ``psi`` centred at 0.5.
The adjoint ``-(a phi')' = psi`` is solved with piecewise quadratics on the
same mesh so that the weighted residual also captures the spatial
discretisation error of the forward solve.
"""

import numpy as np
from scipy.special import erf

from ._banded import solve_banded_batch
from .base import ModelError, ModelProblem
from .kle import kle_build


def _quad_shape(s):
    """Quadratic Lagrange shape functions on [0, 1] (nodes 0, 1/2, 1) and derivatives."""
    N = np.stack([2 * (s - 0.5) * (s - 1), 4 * s * (1 - s), 2 * s * (s - 0.5)], axis=-1)
    dN = np.stack([4 * s - 3, 4 - 8 * s, 4 * s - 1], axis=-1)
    return N, dN


class DiffusionModel(ModelProblem):
    """Heterogeneous diffusion benchmark.

    Parameters
    ----------
    dim : int
        Number of retained KLE modes (= random dimensions).
    n_elements : int
        Uniform mesh size.
    corr_length, sigma, mean : float
        Covariance ``exp(-(x1 - x2)**2 / (2 corr_length))``, amplitude and
        mean of the expansion.
    log_field : bool
        If true the diffusivity is ``exp`` of the expansion, otherwise the
        expansion is used as is (and must stay positive).
    source : float
        Constant forcing.
    n_quad : int
        Gauss points per element for assembly, residual and QoI integrals.
    kle_nodes : int
        Nystrom nodes for the eigenproblem.
    cost_ratio : float
        Error estimates per unit of cost.
    """

    def __init__(
        self,
        dim=25,
        n_elements=100,
        corr_length=0.1,
        sigma=1.0,
        mean=0.0,
        log_field=True,
        source=10.0,
        n_quad=3,
        kle_nodes=401,
        cost_ratio=25.0,
        field=None,
    ):
        self.dim = int(dim)
        self.n_elements = int(n_elements)
        self.corr_length = corr_length
        self.sigma = sigma
        self.mean = mean
        self.log_field = log_field
        self.source = float(source)
        self.n_quad = int(n_quad)
        self.cost_ratio = float(cost_ratio)
        self.field = field if field is not None else kle_build(corr_length, sigma, dim, kle_nodes, mean)
        if self.field.dim != self.dim:
            raise ValueError("field dimension does not match dim")

        ne = self.n_elements
        self.h = 1.0 / ne
        self.vertices = np.linspace(0.0, 1.0, ne + 1)
        self.adjoint_nodes = np.linspace(0.0, 1.0, 2 * ne + 1)
        self.forward_size = ne + 1
        self.adjoint_size = 2 * ne + 1

        s, w = np.polynomial.legendre.leggauss(self.n_quad)
        self._s = 0.5 * (s + 1.0)
        self._w = 0.5 * w
        self._xq = self.vertices[:-1, None] + self.h * self._s[None, :]
        self._modes = self.field.modes_at(self._xq.ravel()).reshape(ne, self.n_quad, self.dim)
        self.psi_scale = 10.0 / (np.sqrt(np.pi) * erf(5.0))
        self._psi_q = self.psi(self._xq)
        self._N, self._dN = _quad_shape(self._s)
        self._element_order = np.arange(ne)

    def psi(self, x):
        """QoI weight, normalised to unit integral over [0, 1]."""
        return self.psi_scale * np.exp(-100.0 * (np.asarray(x) - 0.5) ** 2)

    def config(self):
        return {
            "model": "diffusion",
            "d": self.dim,
            "N_e": self.n_elements,
            "l_c": self.corr_length,
            "sigma_a": self.sigma,
            "mean": self.mean,
            "log_field": self.log_field,
            "cost_ratio_C": self.cost_ratio,
        }

    def diffusivity(self, xi):
        """Diffusivity at the element Gauss points, shape ``(M, n_elements, n_quad)``."""
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        if xi.shape[1] != self.dim:
            raise ValueError(f"expected {self.dim} random variables, got {xi.shape[1]}")
        y = 2.0 * xi - 1.0
        g = self.mean + np.einsum("md,eqd->meq", y, self._modes)
        if self.log_field:
            return np.exp(g)
        if np.any(g <= 0.0):
            raise ModelError("diffusivity is not positive")
        return g

    def _element_integrals(self, a):
        return self.h * (a @ self._w)

    def solve_forward(self, xi):
        a = self.diffusivity(xi)
        M, ne = a.shape[0], self.n_elements
        Ae = self._element_integrals(a) / self.h**2
        n = ne - 1
        band = np.zeros((M, ne + 1, 3))
        for e in self._element_order:
            band[:, e, 1] += Ae[:, e]
            band[:, e + 1, 1] += Ae[:, e]
            band[:, e, 2] -= Ae[:, e]
            band[:, e + 1, 0] -= Ae[:, e]
        rhs = np.full((M, n), self.source * self.h)
        try:
            z_int = solve_banded_batch(band[:, 1:-1], rhs, 1)
        except np.linalg.LinAlgError as exc:
            raise ModelError(f"singular diffusion system: {exc}") from exc
        z = np.zeros((M, ne + 1))
        z[:, 1:-1] = z_int
        return self.functional(z), z

    def functional(self, z):
        """``int psi z dx`` for linear nodal coefficients ``z``."""
        z = np.atleast_2d(z)
        zq = z[:, :-1, None] * (1.0 - self._s) + z[:, 1:, None] * self._s
        return self.h * np.einsum("meq,eq,q->m", zq, self._psi_q, self._w)

    def solve_adjoint(self, xi, forward=None):
        a = self.diffusivity(xi)
        M, ne = a.shape[0], self.n_elements
        # local stiffness (1/h) sum_q w a dN_i dN_j and load h sum_q w psi N_i
        Ke = np.einsum("meq,q,qi,qj->meij", a, self._w, self._dN, self._dN) / self.h
        Fe = self.h * np.einsum("eq,q,qi->ei", self._psi_q, self._w, self._N)
        n = 2 * ne + 1
        band = np.zeros((M, n, 5))
        rhs = np.zeros((M, n))
        for e in self._element_order:
            for i in range(3):
                gi = 2 * e + i
                rhs[:, gi] += Fe[e, i]
                for j in range(3):
                    band[:, gi, 2 + j - i] += Ke[:, e, i, j]
        try:
            phi_int = solve_banded_batch(band[:, 1:-1], rhs[:, 1:-1], 2)
        except np.linalg.LinAlgError as exc:
            raise ModelError(f"singular adjoint system: {exc}") from exc
        phi = np.zeros((M, n))
        phi[:, 1:-1] = phi_int
        return phi

    def error_estimate(self, forward, adjoint, xi):
        """Weighted residual ``(f, phi) - a(xi; z, phi)``."""
        z = np.atleast_2d(np.asarray(forward, dtype=float))
        phi = np.atleast_2d(np.asarray(adjoint, dtype=float))
        if z.shape[1] != self.forward_size or phi.shape[1] != self.adjoint_size:
            raise ValueError(
                f"expected coefficient widths {self.forward_size} and {self.adjoint_size}, "
                f"got {z.shape[1]} and {phi.shape[1]}"
            )
        a = self.diffusivity(xi)
        if not (len(z) == len(phi) == len(a)):
            raise ValueError("batch sizes of forward, adjoint and xi differ")
        ne = self.n_elements
        dz = (z[:, 1:] - z[:, :-1]) / self.h
        loc = np.stack([phi[:, 0 : 2 * ne : 2], phi[:, 1 : 2 * ne : 2], phi[:, 2 : 2 * ne + 1 : 2]], axis=-1)
        phi_q = np.einsum("mei,qi->meq", loc, self._N)
        dphi_q = np.einsum("mei,qi->meq", loc, self._dN) / self.h
        integrand = self.source * phi_q - a * dz[:, :, None] * dphi_q
        return self.h * np.einsum("meq,q->m", integrand, self._w)

    def linear_adjoint_projection(self, phi):
        """Interpolate quadratic adjoint coefficients into the linear space."""
        phi = np.atleast_2d(np.array(phi, dtype=float))
        phi[:, 1::2] = 0.5 * (phi[:, 0:-1:2] + phi[:, 2::2])
        return phi
