import logging
from typing import Tuple

import numpy as np

from higgs_explorer.errors import DomainError
from higgs_explorer.geometry import VOLUME, integrate, spectral_derivative
from higgs_explorer.models import (BundleSpec, EndoField, HiggsSpec, MetricField, QuadGrid,
                                   ScalarField)

LOGGER = logging.getLogger(__name__)

SELF_ADJOINT_TOLERANCE = 1e-8


def reference_metric(spec: BundleSpec, grid: QuadGrid) -> MetricField:
    values = np.broadcast_to(np.eye(spec.rank, dtype=complex), (grid.n_nodes, spec.rank, spec.rank))
    return MetricField(values.copy(), spec.degrees)


def diagonal_metric(spec: BundleSpec, grid: QuadGrid, exponents: np.ndarray) -> MetricField:
    """h_ref * diag(exp(u_i)); ``exponents`` has shape (n_nodes, r) or (r,)."""
    u = np.broadcast_to(np.asarray(exponents, dtype=float), (grid.n_nodes, spec.rank))
    values = np.zeros((grid.n_nodes, spec.rank, spec.rank), dtype=complex)
    idx = np.arange(spec.rank)
    values[:, idx, idx] = np.exp(u)
    return MetricField(values, spec.degrees)


def check_positive(h: MetricField) -> None:
    hermitian = (h.values + np.conj(np.swapaxes(h.values, 1, 2))) / 2
    if not np.allclose(hermitian, h.values, atol=1e-10 * max(1.0, np.max(np.abs(h.values)))):
        raise DomainError("Metric is not hermitian")
    if np.min(np.linalg.eigvalsh(hermitian)) <= 0:
        raise DomainError("Metric is not positive definite")


def symmetrized(values: np.ndarray) -> np.ndarray:
    return (values + np.conj(np.swapaxes(values, -1, -2))) / 2


def self_adjoint_defect(h: MetricField, endo: EndoField) -> float:
    """Largest non-hermitian part of P * K, zero when K is h-self-adjoint."""
    product = h.values @ endo.values
    return float(np.max(np.abs(product - np.conj(np.swapaxes(product, 1, 2)))))


def conformal_change(h: MetricField, u: ScalarField) -> MetricField:
    return MetricField(h.values * np.exp(np.real(u.values))[:, None, None], h.degrees)


def normalize_scale(h: MetricField, grid: QuadGrid) -> MetricField:
    """Rescale h by a constant so that the integral of log det S vanishes."""
    _, logdet = np.linalg.slogdet(h.values)
    shift = integrate(logdet, grid).real / (h.rank * VOLUME)
    return MetricField(h.values * np.exp(-shift), h.degrees)


def _entry_derivatives(matrix: np.ndarray, weights: np.ndarray, grid: QuadGrid, direction: str):
    r = matrix.shape[-1]
    out = np.zeros_like(matrix)
    resolved = True
    for i in range(r):
        for j in range(r):
            if not np.any(matrix[:, i, j]):
                continue
            derivative = spectral_derivative(ScalarField(matrix[:, i, j]), grid, direction, weights[i, j])
            out[:, i, j] = derivative.values
            resolved = resolved and derivative.resolved
    return out, resolved


def curvature_contraction(h: MetricField, grid: QuadGrid) -> EndoField:
    """i Lambda F_h in the unitary frame of h_ref.

    With S = h_ref^(-1) H the Chern curvature is F_h = F_ref + dbar(S^(-1) d_ref S), where
    d_ref S = dS + g [A, S], g = -zbar / (1 + |z|^2), A = diag(a_i). The reference part
    contributes diag(a_i) analytically; only the bounded relative part is differentiated.
    """
    a = np.asarray(h.degrees, dtype=float)
    amat = np.diag(a).astype(complex)
    weights = (a[:, None] - a[None, :]) / 2
    s = h.relative(grid)

    ds, resolved_s = _entry_derivatives(s, weights, grid, "z")
    g = (-np.conj(grid.z) * (1 - grid.t))[:, None, None]
    commutator = amat @ s - s @ amat
    x = np.linalg.solve(s, ds + g * commutator)
    dx, resolved_x = _entry_derivatives(x, weights, grid, "zbar")

    chart = amat[None, :, :] - dx / grid.rho[:, None, None]
    unitary = chart * (1 - grid.t)[:, None, None] ** weights[None, :, :]
    field = EndoField(unitary, resolved_s and resolved_x)
    defect = self_adjoint_defect(h, field)
    if defect > SELF_ADJOINT_TOLERANCE:
        LOGGER.debug(f"Curvature self-adjointness defect {defect:.3e}")
    return field


def hitchin_constant(spec: BundleSpec) -> float:
    return spec.degree / spec.rank


def residual_sup_norm(endo: EndoField) -> float:
    """Sup over nodes of the h-operator norm of an h-self-adjoint endomorphism."""
    eigenvalues = np.linalg.eigvals(endo.values)
    return float(np.max(np.abs(eigenvalues)))


def hitchin_residual(
        h: MetricField,
        phi: HiggsSpec,
        grid: QuadGrid,
        tau: float = 1.0
) -> Tuple[EndoField, float]:
    from higgs_explorer.higgs import bracket_contracted

    curvature = curvature_contraction(h, grid)
    bracket = bracket_contracted(phi, h, grid)
    c = hitchin_constant(phi.bundle)
    values = curvature.values + tau * bracket.values - c * np.eye(h.rank)[None, :, :]
    residual = EndoField(values, curvature.resolved)
    return residual, residual_sup_norm(residual)


def metric_distance(h1: MetricField, h2: MetricField) -> float:
    if h1.values.shape != h2.values.shape:
        raise DomainError("Metrics live on different grids")
    relative = np.linalg.solve(h1.values, h2.values) - np.eye(h1.rank)[None, :, :]
    return float(np.max(np.linalg.norm(relative, ord=2, axis=(1, 2))))
