"""L2 Gram matrices, Fubini-Study metrics and the Bergman function."""
import logging
from typing import Iterable, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy import linalg

from higgs_explorer.bundles import monomial_basis, weighted_evaluation
from higgs_explorer.errors import BaseLocusError, DomainError, GramError
from higgs_explorer.geometry import VOLUME
from higgs_explorer.metrics import curvature_contraction
from higgs_explorer.models import BergmanField, BundleSpec, MetricField, QuadGrid, SectionBasis

LOGGER = logging.getLogger(__name__)

BATCH_SIZE = 256
SINGULAR_TOLERANCE = 1e-13
IDENTITY_TOLERANCE = 1e-10

_n_jobs = 1


def set_n_jobs(n_jobs: int) -> None:
    global _n_jobs
    _n_jobs = max(1, int(n_jobs))


def _batch_gram(evaluation: np.ndarray, metric: np.ndarray, weights: np.ndarray) -> np.ndarray:
    return np.einsum("n,nai,nab,nbj->ij", weights, np.conj(evaluation), metric, evaluation, optimize=True)


def integrated_form(evaluation: np.ndarray, metric: np.ndarray, grid: QuadGrid) -> np.ndarray:
    """sum_nodes w E^H P E, accumulated over node batches in fixed order."""
    weights = grid.weights
    bounds = list(range(0, grid.n_nodes, BATCH_SIZE)) + [grid.n_nodes]
    batches = list(zip(bounds[:-1], bounds[1:]))
    if _n_jobs > 1 and len(batches) > 1:
        parts = Parallel(n_jobs=_n_jobs, prefer="threads")(
            delayed(_batch_gram)(evaluation[lo:hi], metric[lo:hi], weights[lo:hi]) for lo, hi in batches
        )
    else:
        parts = [_batch_gram(evaluation[lo:hi], metric[lo:hi], weights[lo:hi]) for lo, hi in batches]
    total = np.zeros((evaluation.shape[-1], evaluation.shape[-1]), dtype=complex)
    for part in parts:
        total += part
    return (total + total.conj().T) / 2


def gram(h: MetricField, basis: SectionBasis, grid: QuadGrid) -> np.ndarray:
    """L2(h tensor h_L^k) Gram matrix, G_ij = (s_i, s_j) integrated against omega."""
    if tuple(h.degrees) != tuple(basis.bundle.degrees):
        raise DomainError(f"Metric degrees {h.degrees} do not match basis degrees {basis.bundle.degrees}")
    if grid.exactness_degree < max(basis.bundle.degrees) + basis.level_k:
        LOGGER.warning(f"Grid exact to t-degree {grid.exactness_degree}, sections need "
                       f"{max(basis.bundle.degrees) + basis.level_k}")
    matrix = integrated_form(weighted_evaluation(basis, grid), h.values, grid)
    eigenvalues = np.linalg.eigvalsh(matrix)
    if eigenvalues[0] <= 0:
        raise GramError(f"Gram matrix is not positive definite (min eigenvalue {eigenvalues[0]:.3e})")
    return matrix


def orthonormal_frame(G: np.ndarray) -> np.ndarray:
    """C = L^(-H) with G = L L^H, so that C^H G C = Id."""
    try:
        lower = linalg.cholesky(G, lower=True)
    except linalg.LinAlgError as e:
        raise GramError(f"Cholesky factorization failed: {e}")
    return linalg.solve_triangular(lower, np.eye(len(G)), lower=True).conj().T


def density_matrix(basis: SectionBasis, G: np.ndarray, grid: QuadGrid) -> Tuple[np.ndarray, np.ndarray]:
    """Orthonormalized evaluation T and M = sum_i t_i t_i^H per node."""
    frame = weighted_evaluation(basis, grid) @ orthonormal_frame(G)
    return frame, frame @ np.conj(np.swapaxes(frame, 1, 2))


def _check_base_locus(density: np.ndarray) -> None:
    eigenvalues = np.linalg.eigvalsh(density)
    scale = max(float(np.max(eigenvalues)), np.finfo(float).tiny)
    bad = np.nonzero(eigenvalues[:, 0] <= SINGULAR_TOLERANCE * scale)[0]
    if len(bad):
        raise BaseLocusError(int(bad[0]))


def fubini_study_from_basis(basis: SectionBasis, G: np.ndarray, grid: QuadGrid) -> MetricField:
    n, r = len(basis), basis.bundle.rank
    _, density = density_matrix(basis, G, grid)
    _check_base_locus(density)
    constant = n / (r * VOLUME)
    values = constant * np.linalg.inv(density)
    values = (values + np.conj(np.swapaxes(values, 1, 2))) / 2
    defect = np.max(np.abs(density @ values / constant - np.eye(r)[None, :, :]))
    if defect > IDENTITY_TOLERANCE:
        LOGGER.warning(f"Fubini-Study identity holds only to {defect:.3e}")
    return MetricField(values, basis.bundle.degrees)


def bergman_function(h: MetricField, basis: SectionBasis, grid: QuadGrid) -> BergmanField:
    _, density = density_matrix(basis, gram(h, basis, grid), grid)
    return BergmanField(values=density @ h.values, level_k=basis.level_k)


def expansion_check(
        h: MetricField,
        k_list: Iterable[int],
        grid: QuadGrid,
        twist: int = -2
) -> Tuple[pd.DataFrame, Optional[float]]:
    """Sup norm of D_k = 2 pi B_k(h) - k - i Lambda F_h - 1 per level, plus the fitted decay exponent."""
    spec = BundleSpec(degrees=tuple(h.degrees), twist=twist)
    k_list = list(k_list)
    if k_list != sorted(set(k_list)):
        raise DomainError(f"Levels must be strictly increasing, got {k_list}")
    curvature = curvature_contraction(h, grid)
    identity = np.eye(h.rank)[None, :, :]
    rows = []
    for k in k_list:
        bergman = bergman_function(h, monomial_basis(spec, k), grid)
        defect = 2 * np.pi * bergman.values - (k + 1) * identity - curvature.values
        sup_d = float(np.max(np.linalg.norm(defect, ord=2, axis=(1, 2))))
        LOGGER.debug(f"k={k}: sup|D_k| = {sup_d:.3e}")
        rows.append({"k": k, "sup_D": sup_d})
    frame = pd.DataFrame(rows, columns=["k", "sup_D"])
    exponent = None
    positive = frame[frame["sup_D"] > 1e-12]
    if len(positive) >= 2:
        exponent = float(np.polyfit(np.log(positive["k"]), np.log(positive["sup_D"]), 1)[0])
    frame["fit_exponent"] = exponent
    return frame, exponent
