import logging
from typing import Optional

import numpy as np

from higgs_explorer.errors import DomainError
from higgs_explorer.metrics import (hitchin_residual, metric_distance, normalize_scale, reference_metric,
                                    symmetrized)
from higgs_explorer.models import BalanceReport, BundleSpec, FlowReport, HiggsSpec, MetricField, QuadGrid

LOGGER = logging.getLogger(__name__)

MAX_CONDITION = 1e12
MIN_STEP = 1e-12


def _condition(h: MetricField) -> float:
    eigenvalues = np.linalg.eigvalsh(h.values)
    if np.min(eigenvalues) <= 0:
        return np.inf
    return float(np.max(eigenvalues[:, -1] / eigenvalues[:, 0]))


def heat_flow(
        spec: BundleSpec,
        phi: HiggsSpec,
        grid: QuadGrid,
        dt: float = 0.05,
        max_steps: int = 20000,
        tol: float = 1e-8,
        tau: float = 1.0,
        initial: Optional[MetricField] = None
) -> FlowReport:
    """Donaldson heat flow dS/dt = -S (i Lambda F_h + tau Lambda[phi, phi*] - c Id).

    Explicit Euler steps; a step that increases the sup residual is retried at half the size.
    The overall scale is pinned after every step.
    """
    if dt <= 0:
        raise DomainError(f"Time step must be positive, got {dt}")
    h = normalize_scale(initial or reference_metric(spec, grid), grid)
    residual, sup_norm = hitchin_residual(h, phi, grid, tau)
    history, steps = [sup_norm], []
    abort_reason = None

    for step in range(max_steps):
        if sup_norm < tol:
            break
        while True:
            candidate = MetricField(symmetrized(h.values - dt * h.values @ residual.values), h.degrees)
            if _condition(candidate) > MAX_CONDITION:
                abort_reason = "blow_up"
                break
            candidate = normalize_scale(candidate, grid)
            new_residual, new_sup = hitchin_residual(candidate, phi, grid, tau)
            if np.isfinite(new_sup) and new_sup <= sup_norm * (1 + 1e-12):
                break
            dt /= 2
            LOGGER.debug(f"Step {step}: residual rose to {new_sup:.3e}, halving dt to {dt:.3e}")
            if dt < MIN_STEP:
                abort_reason = "stalled"
                break
        if abort_reason:
            LOGGER.warning(f"Heat flow stopped at step {step}: {abort_reason}, residual {sup_norm:.3e}")
            break
        h, residual, sup_norm = candidate, new_residual, new_sup
        history.append(sup_norm)
        steps.append(dt)
        if step % 500 == 0:
            LOGGER.debug(f"Step {step}: residual {sup_norm:.3e}, dt {dt:.3e}")

    converged = sup_norm < tol
    return FlowReport(
        residual_history=history,
        final_metric=h,
        converged=converged,
        plateau_value=float(sup_norm),
        step_history=steps,
        abort_reason=abort_reason,
    )


def compare_balanced_to_flow(balance: BalanceReport, flow: FlowReport, grid: QuadGrid) -> float:
    """metric_distance between the balanced and flow metrics with the overall scale projected out."""
    if not balance.converged or not flow.converged:
        raise DomainError("Both the balanced iteration and the heat flow must have converged")
    return metric_distance(normalize_scale(flow.final_metric, grid),
                           normalize_scale(balance.final_metric, grid))
