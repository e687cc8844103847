import pytest

# criterion number -> (status, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[str, str]] = {}


@pytest.fixture
def criterion():
    def record(number: int, ok: bool | None, detail: str) -> None:
        status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        ACCEPTANCE[number] = (status, detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {detail}")
