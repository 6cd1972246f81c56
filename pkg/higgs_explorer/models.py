from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

Coefficients = Tuple[complex, ...]


@dataclass(frozen=True)
class QuadGrid:
    """Tensor-product quadrature on the Riemann sphere.

    Nodes are stored t-major: node ``j`` sits at ``t_nodes[j // n_theta]`` and
    ``theta_nodes[j % n_theta]``. With ``t = |z|^2 / (1 + |z|^2)`` the Fubini-Study
    form is ``dt dtheta``, so the weights integrate against omega directly.
    """
    t_nodes: np.ndarray
    theta_nodes: np.ndarray
    t_weights: np.ndarray

    @property
    def n_t(self) -> int:
        return len(self.t_nodes)

    @property
    def n_theta(self) -> int:
        return len(self.theta_nodes)

    @property
    def n_nodes(self) -> int:
        return self.n_t * self.n_theta

    @property
    def exactness_degree(self) -> int:
        return 2 * self.n_t - 1

    @property
    def t(self) -> np.ndarray:
        return np.repeat(self.t_nodes, self.n_theta)

    @property
    def theta(self) -> np.ndarray:
        return np.tile(self.theta_nodes, self.n_t)

    @property
    def weights(self) -> np.ndarray:
        return np.outer(self.t_weights, np.full(self.n_theta, 2 * np.pi / self.n_theta)).ravel()

    @property
    def radius(self) -> np.ndarray:
        t = self.t
        return np.sqrt(t / (1 - t))

    @property
    def z(self) -> np.ndarray:
        return self.radius * np.exp(1j * self.theta)

    @property
    def rho(self) -> np.ndarray:
        """Conformal factor of omega = i rho dz ^ dzbar, equal to (1 - t)^2."""
        return (1 - self.t) ** 2

    @property
    def volume(self) -> float:
        return float(np.sum(self.weights))


@dataclass(frozen=True)
class ScalarField:
    values: np.ndarray
    resolved: bool = True


@dataclass(frozen=True)
class EndoField:
    """Endomorphism of E per node, in the unitary frame of the reference metric."""
    values: np.ndarray
    resolved: bool = True

    @property
    def rank(self) -> int:
        return self.values.shape[-1]

    def trace(self) -> ScalarField:
        return ScalarField(np.trace(self.values, axis1=1, axis2=2), self.resolved)

    def sup_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.values, ord=2, axis=(1, 2))))


@dataclass(frozen=True)
class MetricField:
    """Hermitian metric on E = sum O(a_i).

    ``values`` holds h in the unitary frame of the reference metric
    h_ref = diag((1 + |z|^2)^(-a_i)), i.e. P = h_ref^(-1/2) H h_ref^(-1/2) where H is
    the chart-frame matrix. P is hermitian positive definite and bounded on the
    sphere; the relative endomorphism S = h_ref^(-1) H is available as ``relative``.
    """
    values: np.ndarray
    degrees: Tuple[int, ...]

    @property
    def rank(self) -> int:
        return len(self.degrees)

    def relative(self, grid: QuadGrid) -> np.ndarray:
        a = np.asarray(self.degrees, dtype=float)
        weight = (1 - grid.t)[:, None, None] ** ((a[None, :] - a[:, None]) / 2)[None, :, :]
        return self.values * weight


@dataclass(frozen=True)
class BundleSpec:
    degrees: Tuple[int, ...]
    twist: int = -2

    @property
    def rank(self) -> int:
        return len(self.degrees)

    @property
    def degree(self) -> int:
        return sum(self.degrees)

    @property
    def slope(self) -> float:
        return self.degree / self.rank


@dataclass(frozen=True)
class PolySection:
    """Holomorphic section of E tensor L^k: one ascending coefficient vector per summand."""
    components: Tuple[Coefficients, ...]


@dataclass(frozen=True)
class SectionBasis:
    bundle: BundleSpec
    level_k: int
    sections: Tuple[PolySection, ...]

    def __len__(self) -> int:
        return len(self.sections)


@dataclass(frozen=True)
class HiggsSpec:
    """Polynomial-matrix Higgs field E -> E tensor O(m).

    ``entries[i][j]`` is the ascending coefficient vector of the map from summand j to
    summand i; its degree is at most a_i + m - a_j. Over a curve with a line-bundle
    twist phi ^ phi = 0 holds automatically.
    """
    bundle: BundleSpec
    entries: Tuple[Tuple[Coefficients, ...], ...]

    @property
    def rank(self) -> int:
        return self.bundle.rank

    def is_zero(self) -> bool:
        return all(not any(abs(c) > 0 for c in entry) for row in self.entries for entry in row)

    def scaled(self, factor: complex) -> "HiggsSpec":
        return HiggsSpec(self.bundle, tuple(tuple(tuple(factor * c for c in entry) for entry in row)
                                            for row in self.entries))


@dataclass(frozen=True)
class QuantizationParams:
    k: int
    alpha: float
    beta: float
    tau: float = 1.0

    @classmethod
    def from_level(cls, k: int, rank: int, tau: float = 1.0) -> "QuantizationParams":
        return cls(k=k, alpha=2 * (rank - 1) * tau / k, beta=1 / (2 * (rank - 1)), tau=tau)


@dataclass(frozen=True)
class BergmanField:
    values: np.ndarray
    level_k: int


@dataclass
class BalanceReport:
    bundle: BundleSpec
    params: QuantizationParams
    converged: bool
    iterations: int
    residual_history: List[float]
    min_gram_eigenvalue_history: List[float]
    final_gram: np.ndarray
    final_metric: Optional[MetricField]
    divergence_reason: Optional[str] = None
    higgs: Optional[HiggsSpec] = None

    @property
    def status(self) -> str:
        if self.converged:
            return "converged"
        return "diverged" if self.divergence_reason else "max_iter"


@dataclass
class FlowReport:
    residual_history: List[float]
    final_metric: MetricField
    converged: bool
    plateau_value: float
    step_history: List[float] = field(default_factory=list)
    abort_reason: Optional[str] = None


@dataclass(frozen=True)
class SubbundleSpec:
    """Line subbundle O(degree) -> E given by polynomials p_i of degree <= a_i - degree."""
    degree: int
    embedding: Tuple[Coefficients, ...]


@dataclass
class WeightReport:
    nu: float
    w_fs: float
    w_phi: float
    total: float
    invariant: bool
    block_norms: Tuple[float, float]
    numeric_curve: List[Tuple[float, float]] = field(default_factory=list)
    numeric_limit: Optional[float] = None
    curve_truncated: bool = False

    @property
    def agrees(self) -> Optional[bool]:
        if self.numeric_limit is None:
            return None
        return abs(self.numeric_limit - self.total) <= 0.05 * max(abs(self.total), 1e-12)


@dataclass
class StabilityReport:
    bundle: BundleSpec
    slope_verdict: str
    gieseker_verdict: str
    invariant_subbundles: List[SubbundleSpec]
    max_invariant_degree: Optional[int]
    table: List[dict] = field(default_factory=list)


def as_coefficients(values: Sequence[complex]) -> Coefficients:
    coefficients = [complex(v) for v in values]
    while coefficients and coefficients[-1] == 0:
        coefficients.pop()
    return tuple(coefficients)
