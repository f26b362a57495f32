from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from criteria import REPORT  # noqa: E402


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for line in REPORT.lines():
        terminalreporter.write_line(line)
