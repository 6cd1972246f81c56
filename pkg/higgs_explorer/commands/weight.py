import logging
from pathlib import Path

import pandas as pd

from higgs_explorer.balanced import solve_balanced
from higgs_explorer.config import ExperimentConfig
from higgs_explorer.reports import artifact, balance_record, weight_record, write_csv, write_json
from higgs_explorer.stability import closed_form_weight, make_subbundle, numeric_weight_curve

LOGGER = logging.getLogger(__name__)


class WeightCommand:
    def __call__(self, config: ExperimentConfig, out_dir: Path) -> int:
        spec, phi, params = config.bundle(), config.higgs_field(), config.params()
        grid = config.grid(params.k)
        subbundle = config.subbundle() or self.top_summand(spec)
        balance = solve_balanced(spec, phi, params, grid, max_iter=config.balance["max_iter"],
                                 tol=config.balance["tol"], damping=config.balance["damping"])

        report = closed_form_weight(subbundle, balance, params, grid,
                                    alpha_beta_outside=config.weight["alpha_beta_outside"])
        curve, limit, truncated = numeric_weight_curve(subbundle, balance, params, grid, config.weight["t_list"])
        report.numeric_curve, report.numeric_limit, report.curve_truncated = curve, limit, truncated
        if report.agrees is False:
            LOGGER.warning(f"Numeric weight {limit:.6f} disagrees with the closed form {report.total:.6f}")

        write_csv(out_dir / "weight_curve.csv", pd.DataFrame(curve, columns=["t", "value"]))
        write_json(out_dir / "weight.json", artifact("weight", config.resolved, {
            "subbundle": {"degree": subbundle.degree, "embedding": subbundle.embedding},
            "balance": balance_record(balance),
            **weight_record(report),
        }))
        return 0

    @staticmethod
    def top_summand(spec):
        embedding = [[1]] + [[] for _ in spec.degrees[1:]]
        return make_subbundle(spec, spec.degrees[0], embedding)
