import sys
from pathlib import Path

from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

# acceptance verdicts, filled in by test_acceptance and printed after the run
VERDICTS: list = []


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, name, ok, detail in sorted(VERDICTS):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num}. {name}: {detail}")
