import numpy as np
import pytest

from higgs_explorer import bergman
from higgs_explorer.bergman import (bergman_function, expansion_check, fubini_study_from_basis, gram,
                                    orthonormal_frame)
from higgs_explorer.bundles import combine_sections, monomial_basis
from higgs_explorer.errors import BaseLocusError, DomainError, GramError
from higgs_explorer.geometry import grid_for_degree, integrate
from higgs_explorer.metrics import diagonal_metric, reference_metric
from higgs_explorer.models import MetricField


def radial_metric(spec, grid):
    exponents = np.stack([0.5 * (grid.t - 0.5), -0.5 * (grid.t - 0.5)], axis=1)
    return diagonal_metric(spec, grid, exponents)


def random_unitary(n, seed=0):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    return q


def test_trivial_gram_entry(trivial_bundle, grid):
    G = gram(reference_metric(trivial_bundle, grid), monomial_basis(trivial_bundle, 1), grid)
    assert G[0, 0].real == pytest.approx(np.pi, rel=1e-13)
    assert G[1, 1].real == pytest.approx(np.pi, rel=1e-13)


def test_gram_is_diagonal_for_rotation_invariant_metric(split_bundle, grid):
    G = gram(radial_metric(split_bundle, grid), monomial_basis(split_bundle, 4), grid)
    off_diagonal = G - np.diag(np.diag(G))
    assert np.max(np.abs(off_diagonal)) < 1e-13 * np.max(np.abs(G))


def test_gram_scales_linearly(split_bundle, grid):
    h = radial_metric(split_bundle, grid)
    basis = monomial_basis(split_bundle, 3)
    expected = 2.5 * gram(h, basis, grid)
    np.testing.assert_allclose(gram(MetricField(2.5 * h.values, h.degrees), basis, grid), expected,
                               rtol=1e-13, atol=1e-13 * np.max(np.abs(expected)))


def test_gram_is_independent_of_thread_count(split_bundle, grid):
    h = radial_metric(split_bundle, grid)
    basis = monomial_basis(split_bundle, 3)
    serial = gram(h, basis, grid)
    bergman.set_n_jobs(2)
    try:
        old_batch, bergman.BATCH_SIZE = bergman.BATCH_SIZE, 32
        parallel = gram(h, basis, grid)
    finally:
        bergman.BATCH_SIZE = old_batch
        bergman.set_n_jobs(1)
    np.testing.assert_allclose(parallel, serial, rtol=1e-13, atol=1e-13 * np.max(np.abs(serial)))


def test_gram_rejects_mismatched_degrees(split_bundle, trivial_bundle, grid):
    with pytest.raises(DomainError):
        gram(reference_metric(trivial_bundle, grid), monomial_basis(split_bundle, 2), grid)


def test_indefinite_gram(split_bundle, grid):
    h = reference_metric(split_bundle, grid)
    with pytest.raises(GramError):
        gram(MetricField(-h.values, h.degrees), monomial_basis(split_bundle, 2), grid)
    with pytest.raises(GramError):
        orthonormal_frame(-np.eye(3))


def test_fubini_study_of_reference_gram(trivial_bundle, grid):
    basis = monomial_basis(trivial_bundle, 3)
    G = gram(reference_metric(trivial_bundle, grid), basis, grid)
    h = fubini_study_from_basis(basis, G, grid)
    np.testing.assert_allclose(h.values, reference_metric(trivial_bundle, grid).values, atol=1e-12)


def test_fubini_study_unitary_invariance(split_bundle, grid):
    basis = monomial_basis(split_bundle, 3)
    G = gram(radial_metric(split_bundle, grid), basis, grid)
    u = random_unitary(len(basis))
    rotated = combine_sections(basis, u)
    h = fubini_study_from_basis(basis, G, grid)
    h_rotated = fubini_study_from_basis(rotated, u.conj().T @ G @ u, grid)
    np.testing.assert_allclose(h_rotated.values, h.values, atol=1e-10)


def test_base_locus(split_bundle, grid):
    basis = monomial_basis(split_bundle, 1)
    # Only the first summand: the evaluation matrix has rank one everywhere.
    partial = combine_sections(basis, np.eye(len(basis))[:, :3])
    G = np.eye(3) * np.pi
    with pytest.raises(BaseLocusError) as info:
        fubini_study_from_basis(partial, G, grid)
    assert info.value.node == 0


@pytest.mark.parametrize("k", [1, 4, 9])
def test_reference_bergman_function(split_bundle, trivial_bundle, grid, k):
    split = bergman_function(reference_metric(split_bundle, grid), monomial_basis(split_bundle, k), grid)
    np.testing.assert_allclose(2 * np.pi * split.values,
                               np.broadcast_to(np.diag([k + 2.0, k]), split.values.shape), atol=1e-10)
    trivial = bergman_function(reference_metric(trivial_bundle, grid), monomial_basis(trivial_bundle, k), grid)
    np.testing.assert_allclose(2 * np.pi * trivial.values,
                               np.broadcast_to((k + 1.0) * np.eye(2), trivial.values.shape), atol=1e-10)


def test_bergman_trace_integral(split_bundle, grid):
    h = radial_metric(split_bundle, grid)
    basis = monomial_basis(split_bundle, 5)
    function = bergman_function(h, basis, grid)
    trace = np.trace(function.values, axis1=1, axis2=2)
    assert integrate(trace, grid).real == pytest.approx(len(basis), rel=1e-10)


def test_expansion_exact_for_reference(split_bundle, grid):
    table, exponent = expansion_check(reference_metric(split_bundle, grid), [1, 2, 3, 5, 8], grid, twist=2)
    assert (table["sup_D"] < 1e-10).all()
    assert list(table.columns) == ["k", "sup_D", "fit_exponent"]


def test_expansion_rejects_unsorted_levels(split_bundle, grid):
    with pytest.raises(DomainError):
        expansion_check(reference_metric(split_bundle, grid), [3, 2], grid)


@pytest.mark.slow
def test_expansion_decays_like_one_over_k(split_bundle):
    grid = grid_for_degree(34)
    exponents = np.stack([grid.t - 0.5, 0.5 - grid.t], axis=1)
    h = diagonal_metric(split_bundle, grid, exponents)
    table, exponent = expansion_check(h, [8, 12, 16, 24, 32], grid, twist=2)
    assert table["sup_D"].iloc[-1] < table["sup_D"].iloc[0]
    assert -1.3 <= exponent <= -0.7
