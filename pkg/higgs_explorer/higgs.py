import logging
from typing import Mapping, Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from higgs_explorer.errors import DomainError
from higgs_explorer.models import (BundleSpec, EndoField, HiggsSpec, MetricField, QuadGrid,
                                   QuantizationParams, ScalarField, as_coefficients)

LOGGER = logging.getLogger(__name__)


def entry_degree_bound(spec: BundleSpec, i: int, j: int) -> int:
    return spec.degrees[i] + spec.twist - spec.degrees[j]


def make_higgs(spec: BundleSpec, entries: Sequence[Sequence[Sequence[complex]]]) -> HiggsSpec:
    if len(entries) != spec.rank or any(len(row) != spec.rank for row in entries):
        raise DomainError(f"Higgs field must be a {spec.rank}x{spec.rank} array of polynomials")
    canonical = []
    for i, row in enumerate(entries):
        canonical_row = []
        for j, entry in enumerate(row):
            coefficients = as_coefficients(entry)
            bound = entry_degree_bound(spec, i, j)
            if len(coefficients) - 1 > bound:
                raise DomainError(f"Entry ({i},{j}) has degree {len(coefficients) - 1}, "
                                  f"the twisted bound is {bound}")
            canonical_row.append(coefficients)
        canonical.append(tuple(canonical_row))
    return HiggsSpec(bundle=spec, entries=tuple(canonical))


def zero_higgs(spec: BundleSpec) -> HiggsSpec:
    return HiggsSpec(bundle=spec, entries=tuple(tuple(() for _ in range(spec.rank)) for _ in range(spec.rank)))


def higgs_from_mapping(spec: BundleSpec, mapping: Optional[Mapping[str, Sequence]]) -> HiggsSpec:
    """Build a Higgs field from ``{"i,j": [c0, c1, ...]}``, zero-based indices.

    Coefficients may be numbers or ``[re, im]`` pairs.
    """
    entries = [[[] for _ in range(spec.rank)] for _ in range(spec.rank)]
    for key, coefficients in (mapping or {}).items():
        try:
            i, j = (int(part) for part in str(key).split(","))
        except ValueError:
            raise DomainError(f"Higgs entry key {key!r} is not of the form 'i,j'")
        if not (0 <= i < spec.rank and 0 <= j < spec.rank):
            raise DomainError(f"Higgs entry ({i},{j}) is out of range for rank {spec.rank}")
        entries[i][j] = [complex(*c) if isinstance(c, (list, tuple)) else complex(c) for c in coefficients]
    return make_higgs(spec, entries)


def higgs_frame(phi: HiggsSpec, grid: QuadGrid) -> np.ndarray:
    """phi in the unitary frame of h_ref and of the twist metric (1 + |z|^2)^(-m)."""
    spec = phi.bundle
    a = np.asarray(spec.degrees, dtype=float)
    z, t = grid.z, grid.t
    values = np.zeros((grid.n_nodes, spec.rank, spec.rank), dtype=complex)
    for i, row in enumerate(phi.entries):
        for j, coefficients in enumerate(row):
            if coefficients:
                weight = (a[i] - a[j] + spec.twist) / 2
                values[:, i, j] = P.polyval(z, np.asarray(coefficients)) * (1 - t) ** weight
    return values


def _adjoint(h: MetricField, frame: np.ndarray) -> np.ndarray:
    return np.linalg.solve(h.values, np.conj(np.swapaxes(frame, 1, 2)) @ h.values)


def bracket_contracted(phi: HiggsSpec, h: MetricField, grid: QuadGrid) -> EndoField:
    """Lambda [phi, phi^{*h}] as phi phi* - phi* phi, h-self-adjoint and trace-free."""
    if phi.is_zero():
        return EndoField(np.zeros((grid.n_nodes, phi.rank, phi.rank), dtype=complex))
    frame = higgs_frame(phi, grid)
    adjoint = _adjoint(h, frame)
    return EndoField(frame @ adjoint - adjoint @ frame)


def higgs_norm_sq(phi: HiggsSpec, h: MetricField, grid: QuadGrid) -> ScalarField:
    if phi.is_zero():
        return ScalarField(np.zeros(grid.n_nodes, dtype=complex))
    frame = higgs_frame(phi, grid)
    norm = np.real(np.trace(frame @ _adjoint(h, frame), axis1=1, axis2=2))
    return ScalarField(np.maximum(norm, 0.0).astype(complex))


def make_params(
        k: int,
        rank: int,
        tau: float = 1.0,
        alpha: Optional[float] = None,
        beta: Optional[float] = None
) -> QuantizationParams:
    if k <= 0:
        raise DomainError(f"Level k must be positive, got {k}")
    if tau <= 0:
        raise DomainError(f"tau must be positive, got {tau}")
    defaults = QuantizationParams.from_level(k, rank, tau)
    params = QuantizationParams(
        k=k,
        alpha=defaults.alpha if alpha is None else float(alpha),
        beta=defaults.beta if beta is None else float(beta),
        tau=float(tau),
    )
    validate_params(params, rank)
    return params


def validate_params(params: QuantizationParams, rank: int) -> None:
    if params.alpha <= 0 or params.beta <= 0:
        raise DomainError(f"alpha and beta must be positive, got {params.alpha}, {params.beta}")
    # Equality is the rank-2 default; eigenvalues of c stay strictly below 2 beta.
    if params.beta > 0.5:
        raise DomainError(f"beta must not exceed 1/2, got {params.beta}")
    if rank > 1 and params.beta >= 2 / (rank - 1):
        raise DomainError(f"beta must be below 2/(r-1) = {2 / (rank - 1)}, got {params.beta}")


def frak_c(phi: HiggsSpec, h: MetricField, params: QuantizationParams, grid: QuadGrid) -> EndoField:
    """alpha beta / (1 + alpha |phi|^2) * Lambda[phi, phi*]."""
    bracket = bracket_contracted(phi, h, grid)
    norm = higgs_norm_sq(phi, h, grid).values.real
    factor = params.alpha * params.beta / (1 + params.alpha * norm)
    return EndoField(bracket.values * factor[:, None, None])


def hatted_metric(h: MetricField, c: EndoField) -> MetricField:
    eigenvalues = np.linalg.eigvals(c.values)
    if np.max(np.abs(eigenvalues.imag)) > 1e-10 or np.max(np.abs(eigenvalues.real)) >= 1:
        raise DomainError("Endomorphism c must have real eigenvalues in (-1, 1)")
    product = h.values @ (np.eye(h.rank)[None, :, :] - c.values)
    return MetricField((product + np.conj(np.swapaxes(product, 1, 2))) / 2, h.degrees)
