import numpy as np
import pytest

_ACCEPTANCE_RESULTS = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_density(rng, dim):
    """Random full-rank density matrix of size ``dim``."""
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is not None and report.when == "call":
        label = marker.args[0]
        callspec = getattr(item, "callspec", None)
        if callspec is not None:
            label = f"{label} [{callspec.id}]"
        _ACCEPTANCE_RESULTS.append((label, "PASS" if report.passed else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, status in sorted(_ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"{status}  {label}")
