import numpy as np
import pytest

from densitylab.model import build_lattice_model

M1 = {"particles": [{"mass": 1.0}], "sites": 8, "spacing": 1.0, "boundary": "periodic", "stencil": "hopping"}
M2 = {"particles": [{"mass": 1.0}, {"mass": 1.0}], "sites": 4, "spacing": 1.0, "boundary": "periodic", "stencil": "hopping"}


@pytest.fixture(scope="session")
def m1():
    return build_lattice_model(M1)


@pytest.fixture(scope="session")
def m2():
    return build_lattice_model(M2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE: dict = {}


def record(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[number] = (passed, detail)
    print(f"ACCEPTANCE {number}: {'PASS' if passed else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
