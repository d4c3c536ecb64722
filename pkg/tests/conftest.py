from __future__ import annotations

import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

from _criteria import RESULTS  # noqa: E402


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        description, status = RESULTS[n]
        terminalreporter.write_line(f"CRITERION {n}: {status} — {description}")
