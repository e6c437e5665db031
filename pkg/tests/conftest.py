import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if not test_acceptance.VERDICTS:
        return
    terminalreporter.section("acceptance")
    for name, ok, detail in test_acceptance.VERDICTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
