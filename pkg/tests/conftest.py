from helpers import RESULTS


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(RESULTS):
        failed = [f"{label}: {detail}" for label, ok, detail in RESULTS[c] if not ok]
        if failed:
            terminalreporter.write_line(f"criterion {c}: FAIL ({'; '.join(failed)})")
        else:
            terminalreporter.write_line(f"criterion {c}: PASS")
