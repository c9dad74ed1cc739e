import numpy as np
import pytest

from creditlab.simkernel import GenConfig, generate_world


def small_config(n_customers=120, seed=7, **kw):
    return GenConfig(n_customers=n_customers, seed=seed, **kw)


@pytest.fixture(scope="session")
def tiny_world():
    """100 customers over the default horizon."""
    return generate_world(small_config(100, seed=11))


@pytest.fixture(scope="session")
def toy_world():
    """50 customers over a short horizon, for brute-force oracles."""
    return generate_world(small_config(50, seed=5, start_period=197501, end_period=197912))


@pytest.fixture(scope="session")
def mid_world():
    """A world large enough to fit scorecards on."""
    return generate_world(small_config(1500, seed=3))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------- acceptance summary

ACCEPTANCE_DETAIL = {}
_acceptance_outcome = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if "test_acceptance" not in report.nodeid or not name.startswith("test_criterion_"):
        return
    n = int(name.split("_")[2])
    if report.when == "call" or report.failed:
        _acceptance_outcome[n] = _acceptance_outcome.get(n, True) and report.passed


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_outcome:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_acceptance_outcome):
        status = "PASS" if _acceptance_outcome[n] else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {ACCEPTANCE_DETAIL.get(n, '')}")
