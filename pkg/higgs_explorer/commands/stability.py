from pathlib import Path

import pandas as pd

from higgs_explorer.config import ExperimentConfig
from higgs_explorer.reports import artifact, stability_record, write_csv, write_json
from higgs_explorer.stability import gieseker_report


class StabilityCommand:
    def __call__(self, config: ExperimentConfig, out_dir: Path) -> int:
        report = gieseker_report(config.bundle(), config.higgs_field(), config.k_range)
        columns = ["k", "subbundle_degree", "chi_F", "chi_E_over_r", "verdict"]
        write_csv(out_dir / "stability.csv", pd.DataFrame(report.table, columns=columns))
        write_json(out_dir / "stability.json", artifact("stability", config.resolved, stability_record(report)))
        return 0
