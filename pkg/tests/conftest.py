import pytest

from meanproj.function_space import make_ground_space, orthonormal_basis

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def lebesgue():
    return make_ground_space("interval", a=-1.0, b=1.0, weight="lebesgue", quadrature=128)


@pytest.fixture(scope="session")
def legendre2(lebesgue):
    return orthonormal_basis(lebesgue, 2, "legendre")


@pytest.fixture(scope="session")
def legendre3(lebesgue):
    return orthonormal_basis(lebesgue, 3, "legendre")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
