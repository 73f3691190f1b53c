import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from switchdwell.scenarios import example1_signal, example1_system, load_fixture

settings.register_profile(
    "repo",
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("repo")

@pytest.fixture(scope="session")
def ex1_system():
    return example1_system()


@pytest.fixture(scope="session")
def ex1_signal():
    return example1_signal()


@pytest.fixture(scope="session")
def ex1_times():
    t1 = math.pi / (2.0 * math.sqrt(2.0))
    t2 = 1.5 * math.pi
    return t1, t2, t1 + t2


@pytest.fixture(scope="session")
def ex1_dwell_cert():
    from switchdwell.certify import certificate_from_json

    return certificate_from_json(load_fixture("example1_dwell_cert.json"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number, title, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title} ({detail})"
        lines.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
