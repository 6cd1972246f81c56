"""Quadrature, contraction and spectral differentiation on the round Riemann sphere.

The sphere is covered by the affine chart z with omega = i rho dz ^ dzbar,
rho = (1 + |z|^2)^(-2), so that V = 2 pi. In the radial variable
t = |z|^2 / (1 + |z|^2) the form becomes dt dtheta and every Gram integrand of
monomial sections is a polynomial in t, integrated exactly by Gauss-Jacobi nodes.
"""
import logging
from typing import Union

import numpy as np
from numpy.polynomial import legendre
from scipy.special import roots_jacobi

from higgs_explorer.errors import DomainError, UnderResolvedError
from higgs_explorer.models import QuadGrid, ScalarField

LOGGER = logging.getLogger(__name__)

VOLUME = 2 * np.pi
RESOLUTION_TOLERANCE = 1e-8
NOISE_FLOOR = 1e-13


def build_grid(n_t: int, n_theta: int) -> QuadGrid:
    if n_t < 2 or n_theta < 4:
        raise DomainError(f"Grid too small: n_t={n_t} (min 2), n_theta={n_theta} (min 4)")
    x, w = roots_jacobi(n_t, 0.0, 0.0)
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    return QuadGrid(t_nodes=(x + 1) / 2, theta_nodes=theta, t_weights=w / 2)


def grid_for_degree(max_degree: int, extra_t: int = 12) -> QuadGrid:
    """Grid resolving sections of degree <= max_degree and smooth metric factors."""
    n_t = (max_degree + 2) // 2 + extra_t
    n_theta = max(8, 2 * (max_degree + 2))
    return build_grid(n_t, n_theta)


def integrate(f: Union[ScalarField, np.ndarray], grid: QuadGrid) -> complex:
    values = f.values if isinstance(f, ScalarField) else np.asarray(f)
    if values.shape[0] != grid.n_nodes:
        raise DomainError(f"Field has {values.shape[0]} values, grid has {grid.n_nodes} nodes")
    return complex(np.dot(grid.weights, values))


def integrate_array(values: np.ndarray, grid: QuadGrid) -> np.ndarray:
    """Integrate a node-indexed array of any trailing shape against omega."""
    if values.shape[0] != grid.n_nodes:
        raise DomainError(f"Array has {values.shape[0]} nodes, grid has {grid.n_nodes}")
    return np.tensordot(grid.weights, values, axes=(0, 0))


def lambda_contract(f_coeff: ScalarField, grid: QuadGrid) -> ScalarField:
    """Contraction with omega of the (1,1)-form i * f_coeff dz ^ dzbar."""
    return ScalarField(f_coeff.values / grid.rho, f_coeff.resolved)


def _barycentric_matrix(x: np.ndarray) -> np.ndarray:
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    w = 1.0 / np.prod(diff, axis=1)
    d = (w[None, :] / w[:, None]) / diff
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, -d.sum(axis=1))
    return d


def _is_resolved(modes: np.ndarray, radial: np.ndarray, grid: QuadGrid) -> bool:
    scale = np.max(np.abs(modes))
    if scale < NOISE_FLOOR:
        return True
    if grid.n_theta >= 8:
        top = np.abs(modes[:, [grid.n_theta // 2 - 1, grid.n_theta // 2, grid.n_theta // 2 + 1]])
        if np.max(top) > RESOLUTION_TOLERANCE * scale:
            return False
    coefficients = legendre.legfit(2 * grid.t_nodes - 1, radial, grid.n_t - 1)
    tail = np.max(np.abs(coefficients[-2:]))
    return bool(tail <= RESOLUTION_TOLERANCE * max(np.max(np.abs(coefficients)), scale))


def spectral_derivative(
        f: ScalarField,
        grid: QuadGrid,
        direction: str,
        weight: float = 0.0,
        strict: bool = False
) -> ScalarField:
    """Spectral d/dz or d/dzbar of f = (1 + |z|^2)^weight * g with g smooth on the sphere.

    g is split into Fourier modes in theta; mode n carries the factor
    (t (1 - t))^(|n|/2) of a smooth function at both poles, the remainder is
    differentiated with the barycentric collocation matrix in t.
    """
    if direction not in ("z", "zbar"):
        raise DomainError(f"Unknown direction {direction!r}")
    t_nodes = grid.t_nodes[:, None]
    g = (f.values * (1 - grid.t) ** weight).reshape(grid.n_t, grid.n_theta)

    modes = np.fft.fft(g, axis=1)
    modes[np.abs(modes) < NOISE_FLOOR * max(np.max(np.abs(modes)), 1.0)] = 0.0
    n = np.fft.fftfreq(grid.n_theta, 1.0 / grid.n_theta)
    if grid.n_theta % 2 == 0:
        modes_theta = 1j * n * modes
        modes_theta[:, grid.n_theta // 2] = 0.0
    else:
        modes_theta = 1j * n * modes
    half = np.abs(n)[None, :] / 2
    pole_factor = (t_nodes * (1 - t_nodes)) ** half
    radial = modes / pole_factor
    d_radial = _barycentric_matrix(grid.t_nodes) @ radial
    modes_t = half * (1 - 2 * t_nodes) / (t_nodes * (1 - t_nodes)) * modes + pole_factor * d_radial

    g_t = np.fft.ifft(modes_t, axis=1).ravel()
    g_theta = np.fft.ifft(modes_theta, axis=1).ravel()

    resolved = f.resolved and _is_resolved(modes, radial, grid)
    if not resolved:
        if strict:
            raise UnderResolvedError(f"Field is under-resolved on a {grid.n_t}x{grid.n_theta} grid")
        LOGGER.warning(f"Under-resolved field on a {grid.n_t}x{grid.n_theta} grid")

    t, r, phase = grid.t, grid.radius, np.exp(1j * grid.theta)
    if direction == "z":
        dg = np.conj(phase) / 2 * (2 * r * (1 - t) ** 2 * g_t - 1j / r * g_theta)
        dweight = weight * np.conj(grid.z) * (1 - t)
    else:
        dg = phase / 2 * (2 * r * (1 - t) ** 2 * g_t + 1j / r * g_theta)
        dweight = weight * grid.z * (1 - t)
    g_flat = g.ravel()
    values = (1 - t) ** (-weight) * (dweight * g_flat + dg)
    return ScalarField(values, resolved)


def laplacian(f: ScalarField, grid: QuadGrid) -> ScalarField:
    """(1/rho) d/dz d/dzbar f, the omega-Laplacian with nonpositive spectrum."""
    return lambda_contract(spectral_derivative(spectral_derivative(f, grid, "zbar"), grid, "z"), grid)
