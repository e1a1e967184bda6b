import pytest

from superiorization.tomography import simulate


@pytest.fixture(scope="session")
def noise_free_system():
    """Phantom, matrix and data of the 256 x 256, 24-view setup."""
    return simulate(256, 24)


@pytest.fixture(scope="session")
def noisy_system():
    """Phantom, matrix and noise-free data of the 256 x 256, 40-view setup."""
    return simulate(256, 40)


_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one verdict line per acceptance criterion for the terminal summary."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
