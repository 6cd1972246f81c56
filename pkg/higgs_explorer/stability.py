"""phi-invariant line subbundles, one-parameter-subgroup weights and stability verdicts."""
import logging
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import linalg

from higgs_explorer.bergman import orthonormal_frame
from higgs_explorer.bundles import (basis_dimension, monomial_basis, monomial_index, riemann_roch_dimension,
                                    weighted_evaluation)
from higgs_explorer.errors import DomainError
from higgs_explorer.geometry import VOLUME, integrate
from higgs_explorer.higgs import frak_c, hatted_metric, higgs_frame, higgs_norm_sq
from higgs_explorer.models import (BalanceReport, BundleSpec, HiggsSpec, MetricField, QuadGrid,
                                   QuantizationParams, StabilityReport, SubbundleSpec, WeightReport,
                                   as_coefficients)

LOGGER = logging.getLogger(__name__)

POLY_TOLERANCE = 1e-10
MAX_CONDITION = 1e13
DEFAULT_T_LIST = (0.0, 1.0, 2.0, 3.0, 4.0)


def _scale(polynomials: Iterable[Sequence[complex]]) -> float:
    return max([np.max(np.abs(p)) for p in polynomials if len(p)] + [1.0])


def _is_zero(p: np.ndarray, scale: float) -> bool:
    return not len(p) or bool(np.max(np.abs(p)) <= POLY_TOLERANCE * scale)


def _trim(p: np.ndarray, scale: float) -> np.ndarray:
    p = np.asarray(p, dtype=complex)
    nonzero = np.nonzero(np.abs(p) > POLY_TOLERANCE * scale)[0]
    return p[:nonzero[-1] + 1] if len(nonzero) else p[:0]


def _common_finite_zero(polynomials: List[np.ndarray], scale: float) -> bool:
    nonzero = [_trim(p, scale) for p in polynomials]
    nonzero = [p for p in nonzero if len(p)]
    pivot = min(nonzero, key=len)
    if len(pivot) == 1:
        return False
    for root in P.polyroots(pivot):
        size = max(1.0, abs(root)) ** (max(len(p) for p in nonzero) - 1)
        if all(abs(P.polyval(root, p)) <= 1e-8 * scale * size for p in nonzero):
            return True
    return False


def is_saturated(spec: BundleSpec, degree: int, embedding: Sequence[Sequence[complex]]) -> bool:
    """True when the polynomials have no common zero on the sphere, infinity included."""
    polynomials = [np.asarray(p, dtype=complex) for p in embedding]
    scale = _scale(polynomials)
    if all(_is_zero(p, scale) for p in polynomials):
        return False
    at_infinity = all(not len(_trim(p, scale)) or len(_trim(p, scale)) - 1 < a - degree
                      for a, p in zip(spec.degrees, polynomials))
    return not at_infinity and not _common_finite_zero(polynomials, scale)


def make_subbundle(spec: BundleSpec, degree: int, embedding: Sequence[Sequence[complex]]) -> SubbundleSpec:
    if len(embedding) != spec.rank:
        raise DomainError(f"Embedding needs {spec.rank} polynomials, got {len(embedding)}")
    canonical = tuple(as_coefficients(p) for p in embedding)
    for a, p in zip(spec.degrees, canonical):
        if p and len(p) - 1 > a - degree:
            raise DomainError(f"Embedding polynomial of degree {len(p) - 1} exceeds a - degree = {a - degree}")
    if not any(canonical):
        raise DomainError("Embedding polynomials are all zero")
    if not is_saturated(spec, degree, canonical):
        raise DomainError(f"Embedding of O({degree}) has a common zero, the subsheaf is not saturated")
    return SubbundleSpec(degree=int(degree), embedding=canonical)


def _apply_higgs(phi: HiggsSpec, embedding: Sequence[Sequence[complex]]) -> List[np.ndarray]:
    image = []
    for row in phi.entries:
        total = np.zeros(1, dtype=complex)
        for entry, p in zip(row, embedding):
            if entry and len(p):
                total = P.polyadd(total, P.polymul(np.asarray(entry), np.asarray(p)))
        image.append(total)
    return image


def invariance_check(subbundle: SubbundleSpec, phi: HiggsSpec) -> bool:
    """phi(F) lies in F tensor O(m): every 2x2 minor of (p, phi p) vanishes identically."""
    p = [np.asarray(c, dtype=complex) if c else np.zeros(1, dtype=complex) for c in subbundle.embedding]
    image = _apply_higgs(phi, subbundle.embedding)
    scale = _scale(p) * _scale(image)
    for i in range(phi.rank):
        for j in range(i + 1, phi.rank):
            minor = P.polysub(P.polymul(image[i], p[j]), P.polymul(image[j], p[i]))
            if not _is_zero(minor, scale):
                return False
    return True


def projection_field(subbundle: SubbundleSpec, h: MetricField, grid: QuadGrid) -> np.ndarray:
    """Pointwise h-orthogonal projection onto F, in the unitary frame of h_ref."""
    a = np.asarray(h.degrees, dtype=float)
    vector = np.zeros((grid.n_nodes, h.rank, 1), dtype=complex)
    for i, coefficients in enumerate(subbundle.embedding):
        if coefficients:
            vector[:, i, 0] = P.polyval(grid.z, np.asarray(coefficients)) * (1 - grid.t) ** (a[i] / 2)
    adjoint = np.conj(np.swapaxes(vector, 1, 2)) @ h.values
    return vector @ adjoint / (adjoint @ vector)


def _endo_norm_sq(values: np.ndarray, h: MetricField) -> np.ndarray:
    adjoint = np.linalg.solve(h.values, np.conj(np.swapaxes(values, 1, 2)) @ h.values)
    return np.real(np.trace(values @ adjoint, axis1=1, axis2=2))


def _hilbert_data(subbundle: SubbundleSpec, spec: BundleSpec, k: int) -> Tuple[int, int, float]:
    n = basis_dimension(spec, k)
    sub_dimension = subbundle.degree + k + 1
    if sub_dimension >= n:
        raise DomainError(f"h0(F(k)) = {sub_dimension} is not below N = {n}, the subgroup is degenerate")
    if sub_dimension <= 0:
        raise DomainError(f"F(k) has no sections at k = {k}")
    return n, sub_dimension, sub_dimension / (n - sub_dimension)


def _final_metric(balance: BalanceReport) -> MetricField:
    if balance.final_metric is None:
        raise DomainError("Balance report carries no metric")
    if not balance.converged:
        LOGGER.warning(f"Balance report status is {balance.status}, using its last metric")
    return balance.final_metric


def closed_form_weight(
        subbundle: SubbundleSpec,
        balance: BalanceReport,
        params: QuantizationParams,
        grid: QuadGrid,
        alpha_beta_outside: bool = False
) -> WeightReport:
    spec, phi = balance.bundle, balance.higgs
    n, sub_dimension, nu = _hilbert_data(subbundle, spec, params.k)
    w_fs = (n / spec.rank - sub_dimension) * VOLUME * spec.rank / (n - sub_dimension)

    h = _final_metric(balance)
    projection = projection_field(subbundle, h, grid)
    complement = np.eye(h.rank)[None, :, :] - projection
    frame = higgs_frame(phi, grid)
    outgoing = _endo_norm_sq(projection @ frame @ complement, h)
    incoming = _endo_norm_sq(complement @ frame @ projection, h)

    norm = higgs_norm_sq(phi, h, grid).values.real
    alpha_beta = params.alpha * params.beta
    if alpha_beta_outside:
        factor = alpha_beta / (1 + params.alpha * norm)
    else:
        factor = alpha_beta ** 2 / (1 + params.alpha * norm)
    w_phi = -(1 + nu) * integrate(factor * outgoing, grid).real
    return WeightReport(
        nu=nu,
        w_fs=float(w_fs),
        w_phi=float(w_phi),
        total=float(w_fs + w_phi),
        invariant=invariance_check(subbundle, phi),
        block_norms=(integrate(outgoing, grid).real, integrate(incoming, grid).real),
    )


def adapted_basis(subbundle: SubbundleSpec, spec: BundleSpec, k: int, G: np.ndarray) -> np.ndarray:
    """Monomial coefficients of a G-orthonormal basis whose first h0(F(k)) vectors span F(k)."""
    n = basis_dimension(spec, k)
    sub_dimension = subbundle.degree + k + 1
    vectors = np.zeros((n, sub_dimension), dtype=complex)
    for j in range(sub_dimension):
        for i, coefficients in enumerate(subbundle.embedding):
            for power, c in enumerate(coefficients):
                vectors[monomial_index(spec, k, i, power + j), j] = c
    frame = orthonormal_frame(G)
    whitened = np.linalg.solve(frame, vectors)
    inside, _ = np.linalg.qr(whitened)
    outside = linalg.null_space(inside.conj().T)
    return frame @ np.hstack([inside, outside])


def numeric_weight_curve(
        subbundle: SubbundleSpec,
        balance: BalanceReport,
        params: QuantizationParams,
        grid: QuadGrid,
        t_list: Sequence[float] = DEFAULT_T_LIST
) -> Tuple[List[Tuple[float, float]], Optional[float], bool]:
    """Moment-map pairing along the subgroup diag(e^t on F(k), e^(-nu t) on its complement).

    Returns the curve, the mean of its last three samples and whether it was truncated.
    """
    spec, phi = balance.bundle, balance.higgs
    n, sub_dimension, nu = _hilbert_data(subbundle, spec, params.k)
    _final_metric(balance)
    basis = monomial_basis(spec, params.k)
    evaluation = weighted_evaluation(basis, grid)
    adapted = adapted_basis(subbundle, spec, params.k, balance.final_gram)
    xi = np.concatenate([np.ones(sub_dimension), -nu * np.ones(n - sub_dimension)])

    curve, truncated = [], False
    for t in t_list:
        scaling = np.concatenate([np.full(sub_dimension, np.exp(t)), np.full(n - sub_dimension, np.exp(-nu * t))])
        frame = evaluation @ (adapted * scaling[None, :])
        density = frame @ np.conj(np.swapaxes(frame, 1, 2))
        eigenvalues = np.linalg.eigvalsh(density)
        if np.max(eigenvalues[:, -1] / np.maximum(eigenvalues[:, 0], np.finfo(float).tiny)) > MAX_CONDITION:
            LOGGER.warning(f"Rescaled density matrix is numerically singular at t={t}, truncating")
            truncated = True
            break
        metric = MetricField(n / (spec.rank * VOLUME) * np.linalg.inv(density), spec.degrees)
        hatted = hatted_metric(metric, frak_c(phi, metric, params, grid))
        integrand = np.einsum("nai,nab,nbi->ni", np.conj(frame), hatted.values, frame)
        diagonal = np.real(np.tensordot(grid.weights, integrand, axes=(0, 0)))
        value = spec.rank * VOLUME / n * float(np.dot(xi, diagonal))
        LOGGER.debug(f"t={t}: pairing {value:.6f}")
        curve.append((float(t), value))
    limit = float(np.mean([v for _, v in curve[-3:]])) if curve else None
    return curve, limit, truncated


def _polynomial_sqrt(poly: np.ndarray, scale: float) -> Optional[np.ndarray]:
    """Exact square root of a polynomial, or None when it is not a perfect square."""
    poly = _trim(poly, scale)
    if not len(poly):
        return np.zeros(1, dtype=complex)
    shift = int(np.nonzero(np.abs(poly) > POLY_TOLERANCE * scale)[0][0])
    degree = len(poly) - 1
    if shift % 2 or (degree - shift) % 2:
        return None
    reduced = poly[shift:]
    half = (len(reduced) - 1) // 2
    root = np.zeros(half + 1, dtype=complex)
    root[0] = np.sqrt(reduced[0])
    for i in range(1, half + 1):
        root[i] = (reduced[i] - np.dot(root[1:i], root[i - 1:0:-1])) / (2 * root[0])
    root = np.concatenate([np.zeros(shift // 2, dtype=complex), root])
    if not _is_zero(P.polysub(P.polymul(root, root), poly), scale):
        return None
    return root


def _eigenvalue_candidates(phi: HiggsSpec) -> List[np.ndarray]:
    entries = [[np.asarray(e, dtype=complex) if e else np.zeros(1, dtype=complex) for e in row]
               for row in phi.entries]
    trace = P.polyadd(entries[0][0], entries[1][1])
    determinant = P.polysub(P.polymul(entries[0][0], entries[1][1]), P.polymul(entries[0][1], entries[1][0]))
    discriminant = P.polysub(P.polymul(trace, trace), 4 * determinant)
    scale = _scale([trace, determinant, discriminant])
    root = _polynomial_sqrt(discriminant, _scale([discriminant]))
    if root is None:
        return []
    candidates = [(P.polyadd(trace, root)) / 2, (P.polysub(trace, root)) / 2]
    if _is_zero(P.polysub(candidates[0], candidates[1]), scale):
        candidates = candidates[:1]
    return candidates


def _eigen_sections(phi: HiggsSpec, eigenvalue: np.ndarray, degree: int) -> np.ndarray:
    """Null space of p -> (phi - lambda) p over embeddings of O(degree)."""
    spec = phi.bundle
    sizes = [max(a - degree + 1, 0) for a in spec.degrees]
    offsets = np.cumsum([0] + sizes)
    if offsets[-1] == 0:
        return np.zeros((0, 0), dtype=complex)
    # Output component i has degree <= max(a) - degree + max(m, 0) + deg(lambda).
    block = max(spec.degrees) - degree + max(spec.twist, 0) + len(eigenvalue) + 1
    columns = []
    for j, size in enumerate(sizes):
        for power in range(size):
            monomial = [0] * power + [1]
            embedding = [[] for _ in spec.degrees]
            embedding[j] = monomial
            image = _apply_higgs(phi, embedding)
            image[j] = P.polysub(image[j], P.polymul(eigenvalue, monomial))
            column = np.zeros(spec.rank * block, dtype=complex)
            for i, poly in enumerate(image):
                column[i * block:i * block + len(poly)] = poly
            columns.append(column)
    return linalg.null_space(np.array(columns).T, rcond=POLY_TOLERANCE)


def _split_embedding(spec: BundleSpec, degree: int, vector: np.ndarray) -> List[np.ndarray]:
    sizes = [max(a - degree + 1, 0) for a in spec.degrees]
    offsets = np.cumsum([0] + sizes)
    return [vector[offsets[i]:offsets[i + 1]] for i in range(spec.rank)]


def invariant_line_subbundles(phi: HiggsSpec) -> List[SubbundleSpec]:
    """Saturated phi-invariant line subbundles of degree >= floor(slope), rank 2 only."""
    spec = phi.bundle
    if spec.rank != 2:
        raise DomainError(f"Automated invariant-subbundle search supports rank 2 only, got rank {spec.rank}")
    found = []
    for degree in range(spec.degrees[0], int(np.floor(spec.slope)) - 1, -1):
        for eigenvalue in _eigenvalue_candidates(phi):
            null = _eigen_sections(phi, eigenvalue, degree)
            if null.size == 0:
                continue
            combination = null @ np.linspace(1.0, 2.0, null.shape[1])
            for vector in list(null.T) + [combination]:
                embedding = _split_embedding(spec, degree, vector)
                if is_saturated(spec, degree, embedding):
                    found.append(make_subbundle(spec, degree, [_trim(p, _scale(embedding)) for p in embedding]))
                    break
            if found and found[-1].degree == degree:
                break
    return found


def _verdict(difference: float) -> str:
    if difference > 1e-12:
        return "unstable"
    if difference > -1e-12:
        return "semistable"
    return "stable"


def slope_report(phi: HiggsSpec) -> dict:
    subbundles = invariant_line_subbundles(phi)
    top = max((f.degree for f in subbundles), default=None)
    verdict = "stable" if top is None else _verdict(top - phi.bundle.slope)
    return {"slope": phi.bundle.slope, "max_invariant_degree": top, "verdict": verdict}


def gieseker_report(spec: BundleSpec, phi: HiggsSpec, k_range: Iterable[int]) -> StabilityReport:
    subbundles = invariant_line_subbundles(phi)
    slope = slope_report(phi)
    rows, worst = [], None
    for k in k_range:
        chi_e = riemann_roch_dimension(spec, k) / spec.rank
        for f in subbundles:
            chi_f = f.degree + k + 1
            difference = chi_f - chi_e
            worst = difference if worst is None else max(worst, difference)
            rows.append({"k": k, "subbundle_degree": f.degree, "chi_F": chi_f, "chi_E_over_r": chi_e,
                         "verdict": _verdict(difference)})
    gieseker = "stable" if worst is None else _verdict(worst)
    LOGGER.info(f"Bundle {spec.degrees}: slope verdict {slope['verdict']}, Gieseker verdict {gieseker}")
    return StabilityReport(
        bundle=spec,
        slope_verdict=slope["verdict"],
        gieseker_verdict=gieseker,
        invariant_subbundles=subbundles,
        max_invariant_degree=slope["max_invariant_degree"],
        table=rows,
    )
