import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

import higgs_explorer
from higgs_explorer.models import BalanceReport, FlowReport, MetricField, QuadGrid, StabilityReport, WeightReport

LOGGER = logging.getLogger(__name__)

SCHEMA_VERSION = 1
FLOAT_FORMAT = "%.17g"


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as file:
            file.write(text)
        os.replace(tmp_path, path)
    except Exception:
        try:
            os.remove(tmp_path)
        except OSError:
            pass
        raise


def to_jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def write_json(path: Path, payload: Dict[str, Any]) -> None:
    _atomic_write(Path(path), json.dumps(to_jsonable(payload), sort_keys=True, indent=2) + "\n")
    LOGGER.info(f"Wrote {path}")


def write_csv(path: Path, frame: pd.DataFrame) -> None:
    _atomic_write(Path(path), frame.to_csv(index=False, float_format=FLOAT_FORMAT))
    LOGGER.info(f"Wrote {path}")


def artifact(kind: str, config: Dict[str, Any], body: Dict[str, Any]) -> Dict[str, Any]:
    return {
        "kind": kind,
        "schema_version": SCHEMA_VERSION,
        "tool_version": higgs_explorer.__version__,
        "config": config,
        **body,
    }


def balance_record(report: BalanceReport) -> Dict[str, Any]:
    return {
        "status": report.status,
        "converged": report.converged,
        "iterations": report.iterations,
        "final_residual": report.residual_history[-1] if report.residual_history else None,
        "divergence_reason": report.divergence_reason,
        "k": report.params.k,
        "alpha": report.params.alpha,
        "beta": report.params.beta,
        "tau": report.params.tau,
        "basis_dimension": len(report.final_gram),
        "final_gram_min_eigenvalue": float(np.linalg.eigvalsh(report.final_gram)[0]),
    }


def balance_history(report: BalanceReport) -> pd.DataFrame:
    min_eigenvalues = report.min_gram_eigenvalue_history + [np.nan] * (
        len(report.residual_history) - len(report.min_gram_eigenvalue_history))
    return pd.DataFrame({
        "iter": np.arange(1, len(report.residual_history) + 1),
        "residual": report.residual_history,
        "min_eig": min_eigenvalues[:len(report.residual_history)],
    })


def flow_record(report: FlowReport) -> Dict[str, Any]:
    return {
        "converged": report.converged,
        "plateau_value": report.plateau_value,
        "steps": len(report.step_history),
        "final_dt": report.step_history[-1] if report.step_history else None,
        "abort_reason": report.abort_reason,
    }


def flow_history(report: FlowReport) -> pd.DataFrame:
    return pd.DataFrame({
        "step": np.arange(len(report.residual_history)),
        "residual": report.residual_history,
        "dt": [np.nan] + list(report.step_history),
    })


def weight_record(report: WeightReport) -> Dict[str, Any]:
    return {
        "nu": report.nu,
        "w_fs": report.w_fs,
        "w_phi": report.w_phi,
        "total": report.total,
        "invariant": report.invariant,
        "block_norms": list(report.block_norms),
        "numeric_limit": report.numeric_limit,
        "curve_truncated": report.curve_truncated,
        "agrees": report.agrees,
    }


def stability_record(report: StabilityReport) -> Dict[str, Any]:
    return {
        "slope": report.bundle.slope,
        "slope_verdict": report.slope_verdict,
        "gieseker_verdict": report.gieseker_verdict,
        "max_invariant_degree": report.max_invariant_degree,
        "invariant_subbundles": [{"degree": f.degree, "embedding": f.embedding} for f in report.invariant_subbundles],
    }


def metric_frame(h: MetricField, grid: QuadGrid, prefix: Optional[str] = "h") -> pd.DataFrame:
    """Node table of a metric field: t, theta and the packed lower triangle, i >= j, as real and imaginary parts."""
    columns = {"t": grid.t, "theta": grid.theta}
    for i in range(h.rank):
        for j in range(i + 1):
            columns[f"{prefix}_{i}{j}_re"] = h.values[:, i, j].real
            columns[f"{prefix}_{i}{j}_im"] = h.values[:, i, j].imag
    return pd.DataFrame(columns)
