import pytest

from higgs_explorer.bundles import make_bundle
from higgs_explorer.geometry import build_grid, grid_for_degree
from higgs_explorer.higgs import make_higgs, zero_higgs


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: k-sweeps that take minutes")


@pytest.fixture(scope="module")
def grid():
    return build_grid(16, 16)


@pytest.fixture(scope="module")
def fine_grid():
    return grid_for_degree(20)


@pytest.fixture(scope="module")
def split_bundle():
    """O(1) + O(-1) with the co-Higgs twist O(2)."""
    return make_bundle((1, -1), twist=2)


@pytest.fixture(scope="module")
def trivial_bundle():
    return make_bundle((0, 0), twist=2)


@pytest.fixture(scope="module")
def stable_higgs(split_bundle):
    """Constant map from the O(1) summand to the O(-1) summand twisted by O(2)."""
    return make_higgs(split_bundle, [[[], []], [[1], []]])


@pytest.fixture(scope="module")
def split_zero(split_bundle):
    return zero_higgs(split_bundle)


@pytest.fixture(scope="module")
def trivial_zero(trivial_bundle):
    return zero_higgs(trivial_bundle)
