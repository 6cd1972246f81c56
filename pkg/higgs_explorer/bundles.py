import logging
from typing import Iterable, Sequence

import numpy as np
import pandas as pd
from numpy.polynomial import polynomial as P

from higgs_explorer.errors import DomainError
from higgs_explorer.models import BundleSpec, PolySection, QuadGrid, SectionBasis, as_coefficients

LOGGER = logging.getLogger(__name__)


def make_bundle(degrees: Sequence[int], twist: int = -2) -> BundleSpec:
    degrees = tuple(int(a) for a in degrees)
    if len(degrees) < 2:
        raise DomainError(f"Rank must be at least 2, got degrees {degrees}")
    if list(degrees) != sorted(degrees, reverse=True):
        raise DomainError(f"Degrees must be non-increasing, got {degrees}")
    return BundleSpec(degrees=degrees, twist=int(twist))


def _check_level(spec: BundleSpec, k: int) -> None:
    if k < -min(spec.degrees):
        raise DomainError(f"Level k={k} is below the base-point-free threshold {-min(spec.degrees)}")


def basis_dimension(spec: BundleSpec, k: int) -> int:
    _check_level(spec, k)
    return sum(max(a + k + 1, 0) for a in spec.degrees)


def riemann_roch_dimension(spec: BundleSpec, k: int) -> int:
    return spec.rank * k + spec.degree + spec.rank


def riemann_roch_check(spec: BundleSpec, k_range: Iterable[int]) -> pd.DataFrame:
    rows = []
    for k in k_range:
        n = basis_dimension(spec, k)
        chi = riemann_roch_dimension(spec, k)
        rows.append({"k": k, "basis_dimension": n, "riemann_roch": chi, "agrees": n == chi})
    return pd.DataFrame(rows, columns=["k", "basis_dimension", "riemann_roch", "agrees"])


def monomial_basis(spec: BundleSpec, k: int) -> SectionBasis:
    """Sections e_i z^p, 0 <= p <= a_i + k, summand-major then degree-ascending."""
    _check_level(spec, k)
    sections = []
    for i, a in enumerate(spec.degrees):
        for p in range(a + k + 1):
            components = [()] * spec.rank
            components[i] = tuple([0j] * p + [1 + 0j])
            sections.append(PolySection(tuple(components)))
    return SectionBasis(bundle=spec, level_k=k, sections=tuple(sections))


def monomial_index(spec: BundleSpec, k: int, summand: int, power: int) -> int:
    """Position of e_summand z^power in the monomial basis."""
    if not 0 <= power <= spec.degrees[summand] + k:
        raise DomainError(f"z^{power} is not a section of O({spec.degrees[summand] + k})")
    return sum(a + k + 1 for a in spec.degrees[:summand]) + power


def make_section(spec: BundleSpec, k: int, components: Sequence[Sequence[complex]]) -> PolySection:
    if len(components) != spec.rank:
        raise DomainError(f"Section needs {spec.rank} components, got {len(components)}")
    canonical = tuple(as_coefficients(c) for c in components)
    for a, c in zip(spec.degrees, canonical):
        if len(c) - 1 > a + k:
            raise DomainError(f"Component of degree {len(c) - 1} exceeds a + k = {a + k}")
    return PolySection(canonical)


def combine_sections(basis: SectionBasis, matrix: np.ndarray) -> SectionBasis:
    """New basis whose j-th section is sum_i basis[i] * matrix[i, j]."""
    spec, k = basis.bundle, basis.level_k
    sections = []
    for column in np.asarray(matrix).T:
        components = []
        for i, a in enumerate(spec.degrees):
            total = np.zeros(a + k + 1, dtype=complex)
            for coefficient, section in zip(column, basis.sections):
                c = np.asarray(section.components[i], dtype=complex)
                total[:len(c)] += coefficient * c
            components.append(total)
        sections.append(make_section(spec, k, components))
    return SectionBasis(bundle=spec, level_k=k, sections=tuple(sections))


def evaluate_basis(basis: SectionBasis, grid: QuadGrid) -> np.ndarray:
    """Raw chart-frame values, shape (n_nodes, r, N)."""
    z = grid.z
    values = np.zeros((grid.n_nodes, basis.bundle.rank, len(basis)), dtype=complex)
    for j, section in enumerate(basis.sections):
        for i, coefficients in enumerate(section.components):
            if coefficients:
                values[:, i, j] = P.polyval(z, np.asarray(coefficients))
    if not np.all(np.isfinite(values)):
        raise DomainError("Section values overflow at some node")
    return values


def weighted_evaluation(basis: SectionBasis, grid: QuadGrid) -> np.ndarray:
    """Section values in the unitary frame of h_ref tensor h_L^k.

    Row i is scaled by (1 + |z|^2)^(-(a_i + k)/2), which keeps every entry bounded;
    pointwise inner products are then plain matrix products with the metric P.
    """
    a = np.asarray(basis.bundle.degrees, dtype=float)
    scale = (1 - grid.t)[:, None] ** ((a + basis.level_k) / 2)[None, :]
    return evaluate_basis(basis, grid) * scale[:, :, None]
