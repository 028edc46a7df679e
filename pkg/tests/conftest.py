import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from genconvex.grids import disc_grid, radial_chain
from genconvex.lp import phase_one

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

CRITERIA: list[str] = []


def record_criterion(number: int, ok: bool, detail: str, seconds: float) -> str:
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}  [{seconds:.2f}s]"
    CRITERIA.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session", autouse=True)
def _compiled_kernel():
    # load the compiled simplex kernel once so timings measure the work itself
    phase_one(np.array([[1.0, 1.0]]), np.array([1.0]))


@pytest.fixture(scope="session")
def disc61():
    return disc_grid(resolution=60)


@pytest.fixture(scope="session")
def dyadic_chain(disc61):
    return radial_chain(disc61, [1 - 2.0 ** -i for i in range(1, 5)])
