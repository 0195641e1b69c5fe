import math

import pytest

from swarm_init.orbit import J2_EARTH, derive_coefficients, k_j2_from_j2
from swarm_init.propagation import ConsensusModel
from swarm_init.safety import DeploymentProblem, ReleasePolicy, SafetyConfig, Spacecraft

MU = 3.99e14
R_E = 6.37e6
ALT = 4.0e5
INC = math.radians(51.7)
K_A = 100.0


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def reference_model():
    return derive_coefficients(MU, R_E + ALT, INC, k_j2_from_j2(J2_EARTH, MU, R_E))


def reference_problem(mode="fixed_velocity", k_A=K_A, r_c=1.0, beta=0.01):
    m = reference_model()
    return DeploymentProblem(m, ConsensusModel(k_A, m.k_0), SafetyConfig(r_c, beta), ReleasePolicy(mode),
                             Spacecraft())


@pytest.fixture(scope="session")
def model():
    return reference_model()


@pytest.fixture
def rng():
    import numpy as np
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: dict[int, str] = {}


def record(criterion, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[criterion] = f"criterion {criterion}: {'PASS' if passed else 'FAIL'} | {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=str):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
