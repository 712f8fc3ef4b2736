import pytest

from fbmchaos.simple import SimpleFunction

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def two_box() -> SimpleFunction:
    return (SimpleFunction.indicator((0.1, 0.2), (0.4, 0.5))
            + SimpleFunction.indicator((0.6, 0.8), (0.85, 1.0), coeff=-0.5))
