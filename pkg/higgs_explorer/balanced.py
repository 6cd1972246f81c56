"""The T-operator iteration for balanced metrics of a Higgs bundle.

The iteration runs on the Gram matrix G of the fixed monomial basis. One step
orthonormalizes the basis with respect to G, pulls back the Fubini-Study metric h_s,
deforms it to h_hat = h_s (Id - c(h_s)) and integrates again. A Gram matrix is a fixed
point exactly when the orthonormal basis is balanced.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from higgs_explorer.bergman import (bergman_function, density_matrix, fubini_study_from_basis, gram,
                                    integrated_form, orthonormal_frame)
from higgs_explorer.bundles import monomial_basis, weighted_evaluation
from higgs_explorer.errors import BaseLocusError, GramError
from higgs_explorer.geometry import VOLUME
from higgs_explorer.higgs import frak_c, hatted_metric
from higgs_explorer.metrics import reference_metric
from higgs_explorer.models import (BalanceReport, BundleSpec, EndoField, HiggsSpec, MetricField,
                                   QuadGrid, QuantizationParams, SectionBasis)

LOGGER = logging.getLogger(__name__)

DEGENERATION_FLOOR = 1e-10


@dataclass
class _StepState:
    frame: np.ndarray
    metric: MetricField
    c: EndoField
    hatted: MetricField
    hatted_gram: np.ndarray


def _step_state(G: np.ndarray, basis: SectionBasis, phi: HiggsSpec, params: QuantizationParams,
                grid: QuadGrid) -> _StepState:
    frame = orthonormal_frame(G)
    metric = fubini_study_from_basis(basis, G, grid)
    c = frak_c(phi, metric, params, grid)
    hatted = hatted_metric(metric, c)
    hatted_gram = integrated_form(weighted_evaluation(basis, grid), hatted.values, grid)
    return _StepState(frame, metric, c, hatted, hatted_gram)


def t_step(G: np.ndarray, basis: SectionBasis, phi: HiggsSpec, params: QuantizationParams,
           grid: QuadGrid) -> np.ndarray:
    """L2(h_hat) Gram of the G-orthonormal basis; Id at a balanced basis."""
    state = _step_state(G, basis, phi, params, grid)
    result = state.frame.conj().T @ state.hatted_gram @ state.frame
    return (result + result.conj().T) / 2


def moment_map_residual(G: np.ndarray, basis: SectionBasis, phi: HiggsSpec, params: QuantizationParams,
                        grid: QuadGrid) -> Tuple[np.ndarray, float]:
    """integral of (t_i, (Id - c) t_j)_{h_s} minus delta_ij over the G-orthonormal basis t."""
    frame, _ = density_matrix(basis, G, grid)
    metric = fubini_study_from_basis(basis, G, grid)
    c = frak_c(phi, metric, params, grid)
    integrand = metric.values @ (np.eye(metric.rank)[None, :, :] - c.values)
    matrix = integrated_form(frame, integrand, grid) - np.eye(len(basis))
    return matrix, float(np.linalg.norm(matrix))


def moment_map_trace(G: np.ndarray, basis: SectionBasis, phi: HiggsSpec, params: QuantizationParams,
                     grid: QuadGrid) -> float:
    matrix, _ = moment_map_residual(G, basis, phi, params, grid)
    return float(np.real(np.trace(matrix))) + len(basis)


def _random_start(reference: np.ndarray, seed: Optional[int]) -> np.ndarray:
    rng = np.random.default_rng(seed)
    n = len(reference)
    perturbation = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    perturbation *= 0.5 / np.linalg.norm(perturbation, ord=2)
    change = np.eye(n) + perturbation
    start = change.conj().T @ reference @ change
    return (start + start.conj().T) / 2


def solve_balanced(
        spec: BundleSpec,
        phi: HiggsSpec,
        params: QuantizationParams,
        grid: QuadGrid,
        max_iter: int = 500,
        tol: float = 1e-10,
        damping: float = 1.0,
        random_start: bool = False,
        seed: Optional[int] = None
) -> BalanceReport:
    if not 0 < damping <= 1:
        raise ValueError(f"Damping must lie in (0, 1], got {damping}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be at least 1, got {max_iter}")
    basis = monomial_basis(spec, params.k)
    n = len(basis)
    G = gram(reference_metric(spec, grid), basis, grid)
    if random_start:
        G = _random_start(G, seed)

    residuals, min_eigenvalues = [], []
    converged, reason, metric = False, None, None
    # Gram matrix whose Fubini-Study metric is `metric`.
    metric_gram = G
    iteration = 0
    for iteration in range(1, max_iter + 1):
        try:
            state = _step_state(G, basis, phi, params, grid)
        except (BaseLocusError, GramError) as e:
            LOGGER.warning(f"Iteration {iteration}: {e}")
            reason = "gram_degeneration"
            break
        metric, metric_gram = state.metric, G
        step = state.frame.conj().T @ state.hatted_gram @ state.frame
        residual = float(np.linalg.norm(step - np.eye(n)))
        residuals.append(residual)
        LOGGER.debug(f"Iteration {iteration}: residual {residual:.3e}")
        if residual < tol:
            converged = True
            break

        G = (1 - damping) * G + damping * state.hatted_gram
        G = (G + G.conj().T) / 2
        eigenvalues = np.linalg.eigvalsh(G)
        min_eigenvalues.append(float(eigenvalues[0]))
        if eigenvalues[0] < DEGENERATION_FLOOR * np.real(np.trace(G)) / n:
            LOGGER.warning(f"Gram matrix degenerates at iteration {iteration} "
                           f"(min eigenvalue {eigenvalues[0]:.3e})")
            reason = "gram_degeneration"
            break

    if not converged and reason is None and residuals:
        LOGGER.warning(f"No convergence after {max_iter} iterations, residual {residuals[-1]:.3e}")
    return BalanceReport(
        bundle=spec,
        params=params,
        converged=converged,
        iterations=iteration,
        residual_history=residuals,
        min_gram_eigenvalue_history=min_eigenvalues,
        final_gram=metric_gram,
        final_metric=metric,
        divergence_reason=reason,
        higgs=phi,
    )


def balanced_defect(report: BalanceReport, grid: QuadGrid) -> float:
    """sup over nodes of |B_k(h_hat) - (N / rV)(Id - c)| at the final Gram matrix."""
    basis = monomial_basis(report.bundle, report.params.k)
    state = _step_state(report.final_gram, basis, report.higgs, report.params, grid)
    bergman = bergman_function(state.hatted, basis, grid)
    target = len(basis) / (report.bundle.rank * VOLUME) * (np.eye(report.bundle.rank)[None, :, :] - state.c.values)
    return float(np.max(np.linalg.norm(bergman.values - target, ord=2, axis=(1, 2))))
