import sys


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance PASS/FAIL lines at the end of the run."""
    for name, mod in list(sys.modules.items()):
        if name.rsplit(".", 1)[-1] == "test_acceptance" and getattr(mod, "RESULTS", None):
            terminalreporter.section("acceptance criteria")
            for number in sorted(mod.RESULTS):
                terminalreporter.write_line(mod.RESULTS[number])
            break
