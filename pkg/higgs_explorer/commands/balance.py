import logging
from pathlib import Path

from higgs_explorer.balanced import balanced_defect, moment_map_residual, solve_balanced
from higgs_explorer.bundles import monomial_basis
from higgs_explorer.config import ExperimentConfig
from higgs_explorer.reports import artifact, balance_history, balance_record, metric_frame, write_csv, write_json

LOGGER = logging.getLogger(__name__)

EXIT_CODES = {"converged": 0, "diverged": 2, "max_iter": 3}


class BalanceCommand:
    def __call__(self, config: ExperimentConfig, out_dir: Path) -> int:
        spec, phi, params = config.bundle(), config.higgs_field(), config.params()
        grid = config.grid(params.k)
        report = solve_balanced(
            spec, phi, params, grid,
            max_iter=config.balance["max_iter"],
            tol=config.balance["tol"],
            damping=config.balance["damping"],
            random_start=config.balance["random_start"],
            seed=config.seed,
        )
        record = balance_record(report)
        if report.converged:
            basis = monomial_basis(spec, params.k)
            _, record["moment_map_norm"] = moment_map_residual(report.final_gram, basis, phi, params, grid)
            record["balanced_defect"] = balanced_defect(report, grid)
            write_csv(out_dir / "balance_metric.csv", metric_frame(report.final_metric, grid))
        LOGGER.info(f"Balance at k={params.k}: {report.status} after {report.iterations} iterations")

        write_csv(out_dir / "balance_history.csv", balance_history(report))
        write_json(out_dir / "balance.json", artifact("balance", config.resolved, record))
        return EXIT_CODES[report.status]
