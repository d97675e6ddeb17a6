import os
import sys

sys.path.insert(0, os.path.dirname(__file__))


def pytest_terminal_summary(terminalreporter):
    import acceptance

    if acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for i in sorted(acceptance.RESULTS):
            terminalreporter.write_line(acceptance.line(i))
