import math
import warnings

import pytest
from hypothesis import settings

from chiralrouter.triangle import solve_flux_conditions

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def flux_solution():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return solve_flux_conditions()


@pytest.fixture(scope="session")
def unit_effective_triangle(flux_solution):
    """The solved Rydberg triangle rescaled to mean |J| = 1."""
    from chiralrouter.triangle import FluxTriangle

    tri = flux_solution.effective.to_flux_triangle()
    J0 = tri.mean_coupling
    return FluxTriangle(tuple(j / J0 for j in tri.j_abs), tri.gamma, tuple(m / J0 for m in tri.mu))


def two_pi(x):
    return 2 * math.pi * x


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
