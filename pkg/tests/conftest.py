import pytest

# filled by tests/test_acceptance.py: (number, verdict, text)
CRITERIA: list[tuple[int, str, str]] = []


@pytest.fixture
def criterion(request):
    """Record a pass/fail line for an acceptance criterion.

    Call ``criterion(n, ok, text)``; the line is printed immediately and
    repeated in the terminal summary so it survives output capture.
    """

    def record(n: int, ok: bool, text: str) -> None:
        line = (n, "PASS" if ok else "FAIL", text)
        CRITERIA.append(line)
        print(f"criterion {n}: {line[1]}  {text}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n, verdict, text in sorted(CRITERIA, key=lambda c: c[0]):
        terminalreporter.write_line(f"criterion {n}: {verdict}  {text}")
