import logging
from math import factorial
from pathlib import Path

import numpy as np
import pandas as pd

from higgs_explorer.bergman import gram
from higgs_explorer.bundles import monomial_basis
from higgs_explorer.config import ExperimentConfig
from higgs_explorer.geometry import VOLUME, grid_for_degree
from higgs_explorer.metrics import reference_metric
from higgs_explorer.models import BundleSpec, QuadGrid
from higgs_explorer.reports import artifact, write_csv, write_json

LOGGER = logging.getLogger(__name__)

TOLERANCE = 1e-12


def beta_integral(p: int, d: int) -> float:
    """Integral of |z^p|^2 (1 + |z|^2)^(-d) against omega."""
    return VOLUME * factorial(p) * factorial(d - p) / factorial(d + 1)


def oracle_gram(spec: BundleSpec, k: int) -> np.ndarray:
    diagonal = [beta_integral(p, a + k) for a in spec.degrees for p in range(a + k + 1)]
    return np.diag(diagonal).astype(complex)


def oracle_error(spec: BundleSpec, k: int, grid: QuadGrid) -> float:
    basis = monomial_basis(spec, k)
    expected = oracle_gram(spec, k)
    computed = gram(reference_metric(spec, grid), basis, grid)
    return float(np.max(np.abs(computed - expected)) / np.max(np.abs(np.diag(expected))))


class GramOracleCommand:
    """Reference-metric Gram matrices against the closed-form Beta integrals."""

    def __call__(self, config: ExperimentConfig, out_dir: Path) -> int:
        spec = config.bundle()
        levels = range(max(-min(spec.degrees), 0), int(config.gram_oracle["max_k"]) + 1)
        grid = grid_for_degree(max(spec.degrees) + levels[-1], extra_t=2)
        rows = [{"k": k, "relative_error": oracle_error(spec, k, grid)} for k in levels]
        table = pd.DataFrame(rows, columns=["k", "relative_error"])
        worst = float(table["relative_error"].max())
        LOGGER.info(f"Gram oracle: max relative error {worst:.3e}")

        write_csv(out_dir / "gram_oracle.csv", table)
        write_json(out_dir / "gram_oracle.json", artifact("gram-oracle", config.resolved, {
            "max_relative_error": worst,
            "passed": worst <= TOLERANCE,
        }))
        return 0 if worst <= TOLERANCE else 1
