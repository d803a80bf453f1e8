import pytest

from topoamp.model import ModelParams


@pytest.fixture
def canonical():
    return ModelParams()


@pytest.fixture
def double_hn():
    return ModelParams(pump=0.75, g_s=0.1, g_c=0.1)


@pytest.fixture
def generic():
    return ModelParams(delta=0.3, phi=1.1, g_s=0.7, g_c=1.1, gamma=5.0, pump=0.2, n_sites=9)



_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance():
    """``report(label, ok, detail)`` records one PASS/FAIL line and asserts ``ok``."""

    def report(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
