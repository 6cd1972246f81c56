import logging
from pathlib import Path

import numpy as np

from higgs_explorer.bergman import expansion_check
from higgs_explorer.config import ExperimentConfig
from higgs_explorer.metrics import diagonal_metric
from higgs_explorer.reports import artifact, write_csv, write_json

LOGGER = logging.getLogger(__name__)


class BergmanCommand:
    """Checks the two-term Bergman expansion for h_ref * exp(s (t - 1/2) diag(1, -1, ...))."""

    def __call__(self, config: ExperimentConfig, out_dir: Path) -> int:
        spec = config.bundle()
        grid = config.grid()
        amplitude = float(config.bergman["perturbation"])
        signs = np.where(np.arange(spec.rank) % 2 == 0, 1.0, -1.0)
        exponents = amplitude * (grid.t - 0.5)[:, None] * signs[None, :]
        h = diagonal_metric(spec, grid, exponents)

        table, exponent = expansion_check(h, config.k_range, grid, twist=spec.twist)
        LOGGER.info(f"Bergman expansion: fitted decay exponent {exponent}")
        write_csv(out_dir / "bergman.csv", table)
        write_json(out_dir / "bergman.json", artifact("bergman", config.resolved, {
            "records": table[["k", "sup_D"]].to_dict(orient="records"),
            "fit_exponent": exponent,
        }))
        return 0
