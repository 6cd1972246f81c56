import logging
from pathlib import Path

from higgs_explorer.config import ExperimentConfig
from higgs_explorer.flow import heat_flow
from higgs_explorer.reports import artifact, flow_history, flow_record, metric_frame, write_csv, write_json

LOGGER = logging.getLogger(__name__)


class FlowCommand:
    def __call__(self, config: ExperimentConfig, out_dir: Path) -> int:
        grid = config.grid()
        report = heat_flow(
            config.bundle(), config.higgs_field(), grid,
            dt=config.flow["dt"],
            max_steps=config.flow["max_steps"],
            tol=config.flow["tol"],
            tau=config.tau,
        )
        LOGGER.info(f"Heat flow: converged={report.converged}, residual {report.plateau_value:.3e}")

        write_csv(out_dir / "flow_history.csv", flow_history(report))
        write_csv(out_dir / "flow_metric.csv", metric_frame(report.final_metric, grid))
        write_json(out_dir / "flow.json", artifact("flow", config.resolved, flow_record(report)))
        if report.converged:
            return 0
        return 2 if report.abort_reason else 3
