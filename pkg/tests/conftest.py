import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from starcurl.geometry import build_ball, build_box, voxelize

settings.register_profile("starcurl", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("starcurl")


@pytest.fixture(scope="session")
def ball():
    return build_ball(1.0)


@pytest.fixture(scope="session")
def ball16(ball):
    return voxelize(ball, 16)


@pytest.fixture(scope="session")
def ball24(ball):
    return voxelize(ball, 24)


@pytest.fixture(scope="session")
def box16():
    return voxelize(build_box((1.0, 1.0, 1.0)), 16)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """record(number, label, value, bound, at_least=False, ok=None): log one PASS/FAIL line, return the verdict."""

    def record(number, label, value, bound, at_least=False, ok=None):
        if ok is None:
            ok = value >= bound if at_least else value <= bound
        ok = bool(ok)
        rel = ">=" if at_least else "<="
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2} {label}: {value:.3e} (need {rel} {bound:.3e})"
        CRITERIA.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)
