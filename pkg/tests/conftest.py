import time

import pytest

from lelab.green import R_STAR
from lelab.mesh import DomainSpec, build_mesh
from lelab.solver import LaneEmdenProblem, concentration_mesh, continuation

DISK_PAIR = ((R_STAR, 0.0), (-R_STAR, 0.0))
SQUARE_PAIR = ((0.30112, 0.30112), (0.69888, 0.69888))

# criterion id -> (passed, detail); filled by test_acceptance and printed at the end
ACCEPTANCE = {}


def record(key: str, passed: bool, detail: str) -> None:
    ACCEPTANCE[key] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split(".")[0]), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:5s} {'PASS' if ok else 'FAIL'}  {detail}")


class Timed:
    def __init__(self, value, seconds):
        self.value = value
        self.seconds = seconds


def _path(domain, pair, h, p_end):
    t = time.perf_counter()
    mesh = concentration_mesh(domain, h, list(pair), p_end)
    problem = LaneEmdenProblem(mesh)
    path = continuation(problem, 5.0, p_end, [(pair[0], 1), (pair[1], -1)])
    return Timed((problem, path), time.perf_counter() - t)


@pytest.fixture(scope="session")
def disk_path():
    """Disk nodal family, h = 0.02, p from 5 to 80 (about three minutes)."""
    return _path(DomainSpec.disk(), DISK_PAIR, 0.02, 80.0)


@pytest.fixture(scope="session")
def square_path():
    return _path(DomainSpec.rectangle(1.0, 1.0), SQUARE_PAIR, 0.02, 80.0)


@pytest.fixture(scope="session")
def coarse_path():
    """Cheap disk nodal family (h = 0.05, p up to 30) for functional tests."""
    return _path(DomainSpec.disk(), DISK_PAIR, 0.05, 30.0)


@pytest.fixture(scope="session")
def disk_mesh_05():
    return build_mesh(DomainSpec.disk(), 0.05)
