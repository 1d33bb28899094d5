import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from uclab.problems import make_instance

settings.register_profile("uclab", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("uclab")

# acceptance verdicts collected by tests/test_acceptance.py, echoed in the summary
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture
def record_acceptance():
    def record(number: int, passed: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return passed
    return record


NCSC_SPEC = {"family": "sin_bilinear_ncsc", "d": 2, "d_prime": 2, "mu": 1.0,
             "radius_x": 1.0, "radius_y": 2.0, "seed": 7}
NCC_SPEC = {"family": "sin_bilinear_ncc", "d": 1, "d_prime": 1, "radius_x": 2.0,
            "radius_y": 1.0, "seed": 3}
SCSC_SPEC = {"family": "quadratic_scsc", "d": 2, "rho": 1.0, "mu": 1.0, "radius_x": 1.0,
             "radius_y": 3.0, "seed": 5}


@pytest.fixture(scope="session")
def ncsc():
    return make_instance(NCSC_SPEC)


@pytest.fixture(scope="session")
def ncc():
    return make_instance(NCC_SPEC)


@pytest.fixture(scope="session")
def ncc2():
    return make_instance(dict(NCC_SPEC, d=2, d_prime=2))


@pytest.fixture(scope="session")
def scsc():
    return make_instance(SCSC_SPEC)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
