import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("fgo", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("fgo")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


VERDICTS = []


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda s: int(s.split()[1].rstrip("]"))):
            terminalreporter.write_line(line)
