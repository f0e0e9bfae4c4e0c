import pytest

from indiff.domain import GridSpec, ModelParams
from indiff.pricing import PriceModel
from indiff.vi import solve_vi_penalty


@pytest.fixture(scope="session")
def ref_params():
    return ModelParams()


@pytest.fixture(scope="session")
def ref_model(ref_params):
    return PriceModel.build(ref_params)


@pytest.fixture(scope="session")
def small_grid(ref_params):
    return GridSpec.centered(ref_params, half_width=3.0, n_x=121, n_theta=100)


@pytest.fixture(scope="session")
def small_solution(ref_params, small_grid):
    return solve_vi_penalty(small_grid, ref_params)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import CRITERIA, SUMMARY
    if not SUMMARY:
        return
    terminalreporter.section("acceptance criteria")
    for n in CRITERIA:
        terminalreporter.write_line(SUMMARY.get(n, f"criterion {n:>2} [NOT RUN] {CRITERIA[n]}"))
