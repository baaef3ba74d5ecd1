import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from finkey.reference import reference_model
from finkey.stats import SourceSummary
from finkey.typicality import ExponentCache

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def ref_model():
    return reference_model()


@pytest.fixture(scope="session")
def ref_summary(ref_model):
    return SourceSummary.from_model(ref_model)


@pytest.fixture(scope="session")
def ref_cache(ref_model):
    """Exponent cache shared by every test that optimizes on the fixture."""
    return ExponentCache.from_model(ref_model)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


CRITERIA_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[CRITERIA_KEY] = {}


@pytest.fixture
def criterion(request):
    """``criterion(number, passed, detail)`` records one acceptance line, then asserts."""
    lines = request.config.stash[CRITERIA_KEY]

    def record(number, passed, detail):
        lines[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(lines[number])
        assert passed, detail

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(CRITERIA_KEY, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
