import numpy as np
import pytest

from higgs_explorer.errors import DomainError
from higgs_explorer.geometry import integrate
from higgs_explorer.metrics import (check_positive, conformal_change, curvature_contraction, diagonal_metric,
                                    hitchin_residual, metric_distance, normalize_scale, reference_metric,
                                    self_adjoint_defect)
from higgs_explorer.models import MetricField, ScalarField


def test_reference_curvature_is_diagonal_degrees(split_bundle, grid):
    curvature = curvature_contraction(reference_metric(split_bundle, grid), grid)
    np.testing.assert_allclose(curvature.values, np.broadcast_to(np.diag([1.0, -1.0]), curvature.values.shape),
                               atol=1e-12)
    assert curvature.resolved


def test_conformal_curvature(trivial_bundle, grid):
    u = ScalarField((grid.t - 0.5).astype(complex))
    h = conformal_change(reference_metric(trivial_bundle, grid), u)
    curvature = curvature_contraction(h, grid)
    expected = (2 * grid.t - 1)[:, None, None] * np.eye(2)[None, :, :]
    np.testing.assert_allclose(curvature.values, expected, atol=1e-8)
    assert abs(integrate(curvature.trace().values, grid)) < 1e-10


def test_curvature_is_self_adjoint(split_bundle, grid):
    exponents = np.stack([0.3 * grid.t, -0.2 * grid.t ** 2], axis=1)
    h = diagonal_metric(split_bundle, grid, exponents)
    assert self_adjoint_defect(h, curvature_contraction(h, grid)) < 1e-8


def test_curvature_integrates_to_degree(split_bundle, grid):
    exponents = np.stack([0.4 * grid.t, 0.1 * grid.t - 0.3 * grid.t ** 2], axis=1)
    h = diagonal_metric(split_bundle, grid, exponents)
    trace = curvature_contraction(h, grid).trace()
    assert integrate(trace.values, grid).real == pytest.approx(2 * np.pi * split_bundle.degree, abs=1e-8)


def test_hitchin_residual_trivial(trivial_bundle, trivial_zero, grid):
    _, sup_norm = hitchin_residual(reference_metric(trivial_bundle, grid), trivial_zero, grid)
    assert sup_norm < 1e-12


def test_reference_metric_solves_stable_example(split_bundle, stable_higgs, grid):
    _, sup_norm = hitchin_residual(reference_metric(split_bundle, grid), stable_higgs, grid)
    assert sup_norm < 1e-12


def test_split_residual_without_higgs(split_bundle, split_zero, grid):
    _, sup_norm = hitchin_residual(reference_metric(split_bundle, grid), split_zero, grid)
    assert sup_norm == pytest.approx(1.0, abs=1e-12)


def test_metric_distance(split_bundle, grid):
    h = reference_metric(split_bundle, grid)
    assert metric_distance(h, h) == 0
    assert metric_distance(h, MetricField(2 * h.values, h.degrees)) == pytest.approx(1.0)


def test_normalize_scale(split_bundle, grid):
    h = reference_metric(split_bundle, grid)
    normalized = normalize_scale(MetricField(3 * h.values, h.degrees), grid)
    np.testing.assert_allclose(normalized.values, h.values, atol=1e-13)


def test_check_positive(split_bundle, grid):
    h = reference_metric(split_bundle, grid)
    check_positive(h)
    with pytest.raises(DomainError):
        check_positive(MetricField(-h.values, h.degrees))
