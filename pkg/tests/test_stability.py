import numpy as np
import pytest

from higgs_explorer.balanced import solve_balanced
from higgs_explorer.bundles import make_bundle
from higgs_explorer.errors import DomainError
from higgs_explorer.geometry import integrate
from higgs_explorer.higgs import frak_c, make_higgs, make_params, zero_higgs
from higgs_explorer.metrics import diagonal_metric, reference_metric
from higgs_explorer.models import BalanceReport
from higgs_explorer.stability import (adapted_basis, closed_form_weight, gieseker_report, invariance_check,
                                      invariant_line_subbundles, is_saturated, make_subbundle,
                                      numeric_weight_curve, projection_field, slope_report)


@pytest.fixture(scope="module")
def top_summand(split_bundle):
    return make_subbundle(split_bundle, 1, [[1], []])


@pytest.fixture(scope="module")
def unstable_balance(split_bundle, split_zero, grid):
    return solve_balanced(split_bundle, split_zero, make_params(3, 2), grid, max_iter=3)


def reference_report(spec, phi, k, grid):
    return BalanceReport(bundle=spec, params=make_params(k, spec.rank), converged=True, iterations=1,
                         residual_history=[0.0], min_gram_eigenvalue_history=[], final_gram=np.eye(1),
                         final_metric=reference_metric(spec, grid), higgs=phi)


def test_zero_field_leaves_everything_invariant(top_summand, split_zero):
    assert invariance_check(top_summand, split_zero)


def test_nilpotent_field_moves_top_summand(top_summand, stable_higgs):
    assert not invariance_check(top_summand, stable_higgs)


def test_kernel_of_nilpotent_field_is_invariant(split_bundle, stable_higgs):
    bottom = make_subbundle(split_bundle, -1, [[], [1]])
    assert invariance_check(bottom, stable_higgs)


def test_invariance_of_graph_subbundle(trivial_bundle):
    # phi = [[0, 1], [0, 0]] preserves the first summand only.
    phi = make_higgs(trivial_bundle, [[[], [1]], [[], []]])
    assert invariance_check(make_subbundle(trivial_bundle, 0, [[1], []]), phi)
    assert not invariance_check(make_subbundle(trivial_bundle, 0, [[1], [1]]), phi)


@pytest.mark.parametrize("degree, embedding", [
    (0, [[0, 1], []]),
    (0, [[1], []]),
    (1, [[0, 1], []]),
    (1, [[], []]),
])
def test_make_subbundle_rejects(split_bundle, degree, embedding):
    with pytest.raises(DomainError):
        make_subbundle(split_bundle, degree, embedding)


def test_summand_with_zero_components(split_bundle):
    top = make_subbundle(split_bundle, 1, [[1], []])
    assert top.embedding == ((1 + 0j,), ())
    assert top.degree == 1
    assert is_saturated(split_bundle, 1, [[1], []])


def test_saturation(split_bundle, trivial_bundle):
    assert is_saturated(split_bundle, 1, [[1], []])
    assert is_saturated(split_bundle, -1, [[0, 0, 1], [1]])
    assert not is_saturated(split_bundle, 0, [[0, 1], []])
    assert not is_saturated(trivial_bundle, -1, [[1, -1], [2, -2]])
    assert is_saturated(trivial_bundle, -1, [[1], [0, 1]])


def test_projection_is_idempotent(split_bundle, grid):
    subbundle = make_subbundle(split_bundle, -1, [[1, 0, 1], [1]])
    h = reference_metric(split_bundle, grid)
    projection = projection_field(subbundle, h, grid)
    np.testing.assert_allclose(projection @ projection, projection, atol=1e-12)
    np.testing.assert_allclose(np.trace(projection, axis1=1, axis2=2), 1.0, atol=1e-12)


def test_closed_form_weight_of_destabilizer(top_summand, unstable_balance, grid):
    report = closed_form_weight(top_summand, unstable_balance, make_params(3, 2), grid)
    assert report.nu == pytest.approx(5 / 3)
    assert report.w_fs == pytest.approx(-4 * np.pi / 3, rel=1e-12)
    assert report.w_phi == 0.0
    assert report.total == pytest.approx(-4 * np.pi / 3, rel=1e-2)
    assert report.invariant


def test_closed_form_weight_of_trivial_summand(trivial_bundle, trivial_zero, grid):
    balance = reference_report(trivial_bundle, trivial_zero, 4, grid)
    report = closed_form_weight(make_subbundle(trivial_bundle, 0, [[1], []]), balance, balance.params, grid)
    assert report.nu == pytest.approx(1.0)
    assert report.w_fs == pytest.approx(0.0, abs=1e-12)


def test_higgs_weight_is_non_positive(split_bundle, top_summand, grid):
    phi = make_higgs(split_bundle, [[[], [1]], [[], []]])
    balance = reference_report(split_bundle, phi, 6, grid)
    inside = closed_form_weight(top_summand, balance, balance.params, grid)
    outside = closed_form_weight(top_summand, balance, balance.params, grid, alpha_beta_outside=True)
    assert inside.invariant
    assert inside.w_phi < 0
    assert inside.block_norms[0] > 0
    assert inside.block_norms[1] == pytest.approx(0.0, abs=1e-12)
    alpha_beta = balance.params.alpha * balance.params.beta
    assert inside.w_phi == pytest.approx(alpha_beta * outside.w_phi, rel=1e-12)


def test_closed_form_rejects_degenerate_subgroup(trivial_bundle, trivial_zero, grid):
    balance = reference_report(trivial_bundle, trivial_zero, 1, grid)
    subbundle = make_subbundle(trivial_bundle, -2, [[1, 0, 1], [0, 1]])
    with pytest.raises(DomainError):
        closed_form_weight(subbundle, balance, balance.params, grid)


def test_adapted_basis_is_orthonormal(split_bundle, top_summand):
    G = np.diag(np.arange(1.0, 9.0))
    adapted = adapted_basis(top_summand, split_bundle, 3, G)
    np.testing.assert_allclose(adapted.conj().T @ G @ adapted, np.eye(8), atol=1e-12)
    # The first five columns span the sections of F(3) = O(4), supported on the top summand.
    assert np.max(np.abs(adapted[5:, :5])) < 1e-12


def test_numeric_curve_matches_destabilizer(top_summand, unstable_balance, grid):
    curve, limit, truncated = numeric_weight_curve(top_summand, unstable_balance, make_params(3, 2), grid)
    assert not truncated
    assert [t for t, _ in curve] == [0.0, 1.0, 2.0, 3.0, 4.0]
    assert limit == pytest.approx(-4 * np.pi / 3, rel=2e-2)


def test_stable_example_weight_is_non_negative(split_bundle, stable_higgs, top_summand, grid):
    params = make_params(6, 2)
    balance = solve_balanced(split_bundle, stable_higgs, params, grid)
    assert balance.converged
    report = closed_form_weight(top_summand, balance, params, grid)
    assert not report.invariant
    assert report.w_phi == pytest.approx(0.0, abs=1e-12)
    assert report.block_norms[1] > 0
    curve, limit, _ = numeric_weight_curve(top_summand, balance, params, grid)
    assert curve
    assert limit >= -1e-6
    report.numeric_curve, report.numeric_limit = curve, limit
    assert report.agrees is False


def test_stable_example_verdicts(split_bundle, stable_higgs):
    report = gieseker_report(split_bundle, stable_higgs, [4, 8])
    assert report.invariant_subbundles == []
    assert report.slope_verdict == "stable"
    assert report.gieseker_verdict == "stable"
    assert report.max_invariant_degree is None


def test_split_bundle_is_unstable(split_bundle, split_zero):
    report = gieseker_report(split_bundle, split_zero, [3, 6])
    assert report.max_invariant_degree == 1
    assert report.slope_verdict == "unstable"
    assert report.gieseker_verdict == "unstable"
    row = next(r for r in report.table if r["k"] == 3 and r["subbundle_degree"] == 1)
    assert (row["chi_F"], row["chi_E_over_r"]) == (5, 4.0)


def test_trivial_bundle_is_semistable(trivial_bundle, trivial_zero):
    report = gieseker_report(trivial_bundle, trivial_zero, [2, 5])
    assert [f.degree for f in report.invariant_subbundles] == [0]
    assert report.slope_verdict == "semistable"
    assert report.gieseker_verdict == "semistable"


def test_diagonal_field_eigenlines(trivial_bundle):
    phi = make_higgs(trivial_bundle, [[[0, 1], []], [[], [0, -1]]])
    subbundles = invariant_line_subbundles(phi)
    assert [f.degree for f in subbundles] == [0]
    assert all(invariance_check(f, phi) for f in subbundles)
    assert slope_report(phi)["verdict"] == "semistable"


def test_rank_three_search_unsupported():
    spec = make_bundle((1, 0, -1), twist=2)
    with pytest.raises(DomainError):
        gieseker_report(spec, zero_higgs(spec), [3])


@pytest.mark.parametrize("exponents", [(0.0, 0.0), (0.4, -0.3)])
def test_invariant_projection_pairs_non_negatively(split_bundle, stable_higgs, grid, exponents):
    kernel = make_subbundle(split_bundle, -1, [[], [1]])
    h = diagonal_metric(split_bundle, grid, np.outer(grid.t, exponents))
    projection = projection_field(kernel, h, grid)
    c = frak_c(stable_higgs, h, make_params(4, 2), grid)
    pairing = integrate(np.trace(projection @ c.values, axis1=1, axis2=2), grid)
    assert pairing.real > 0
    assert abs(pairing.imag) < 1e-12


def test_numeric_curve_vanishes_for_trivial_summand(trivial_bundle, trivial_zero, grid):
    params = make_params(4, 2)
    balance = solve_balanced(trivial_bundle, trivial_zero, params, grid)
    assert balance.converged
    curve, limit, truncated = numeric_weight_curve(make_subbundle(trivial_bundle, 0, [[1], []]), balance, params, grid)
    assert not truncated
    assert max(abs(value) for _, value in curve) < 1e-10
    assert limit == pytest.approx(0.0, abs=1e-10)
