import numpy as np
import pytest

from dirinf.geometry import ModelSurface, build_constant, build_example1, integrate_jacobi
from dirinf.operators import minimal_graph_operator, p_laplace_operator
from dirinf.radial import Constant


@pytest.fixture(scope="session")
def hyperbolic_profile():
    return build_constant(1.0, C1=10.0, C4=4.0)


@pytest.fixture(scope="session")
def hyperbolic_warp(hyperbolic_profile):
    return integrate_jacobi(hyperbolic_profile.a, 18.0, 1e-3)


@pytest.fixture(scope="session")
def hyperbolic(hyperbolic_warp):
    return ModelSurface(hyperbolic_warp)


@pytest.fixture(scope="session")
def flat():
    return ModelSurface(integrate_jacobi(Constant(0.0), 10.0, 1e-2))


@pytest.fixture(scope="session")
def example1_profile():
    return build_example1(2.0, 0.5)


@pytest.fixture(scope="session")
def example1_warp(example1_profile):
    return integrate_jacobi(example1_profile.a, 60.0, 1e-3)


@pytest.fixture(scope="session")
def minimal():
    return minimal_graph_operator()


@pytest.fixture(scope="session")
def laplace():
    return p_laplace_operator(2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
