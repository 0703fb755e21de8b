import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

SUITE_SEED = 20260815


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.Generator(np.random.Philox(SUITE_SEED))


@pytest.fixture
def rng_factory():
    def make(salt: int = 0) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(SUITE_SEED + salt))
    return make


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance-gate verdict lines after the test summary, where
    output capture cannot hide them."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT_LINES", [])
    if lines:
        terminalreporter.section("acceptance gate")
        for line in lines:
            terminalreporter.write_line(line)
