import pytest

_CRITERIA: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture
def report_criterion():
    """Record the outcome of one acceptance criterion for the end-of-run summary."""

    def report(number: int, name: str, ok: bool, detail: str = "") -> None:
        _CRITERIA[number] = (name, bool(ok), detail)
        print(f"criterion {number}: {name}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())

    return report


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        name, ok, detail = _CRITERIA[number]
        line = f"criterion {number}: {name}: {'PASS' if ok else 'FAIL'}"
        terminalreporter.write_line(f"{line}  {detail}" if detail else line)
