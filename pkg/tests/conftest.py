import pytest

# criterion number -> list of (label, passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, list] = {}


@pytest.fixture
def record():
    """Record one acceptance check and echo a pass/fail line."""

    def _record(criterion: int, label: str, passed: bool, detail: str) -> bool:
        ACCEPTANCE.setdefault(criterion, []).append((label, bool(passed), detail))
        print(f"[criterion {criterion}] {label}: {'PASS' if passed else 'FAIL'} ({detail})")
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(ACCEPTANCE):
        for label, passed, detail in ACCEPTANCE[criterion]:
            terminalreporter.write_line(
                f"criterion {criterion} {label}: {'PASS' if passed else 'FAIL'}  {detail}"
            )
