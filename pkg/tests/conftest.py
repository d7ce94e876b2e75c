import pytest

_LINES: list[str] = []


class _Recorder:
    def __init__(self, number: int):
        self.number = number
        self.line: str | None = None

    def __call__(self, ok: bool, detail: str) -> bool:
        self.line = f"{'PASS' if ok else 'FAIL'} criterion {self.number}: {detail}"
        print(self.line)
        return ok


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for the acceptance criterion named by the marker."""
    marker = request.node.get_closest_marker("acceptance")
    rec = _Recorder(marker.args[0])
    yield rec
    if rec.line is None:
        rec.line = f"FAIL criterion {rec.number}: did not complete ({request.node.name})"
    _LINES.append(rec.line)


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
