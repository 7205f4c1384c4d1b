import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# criterion number -> (description, outcome, detail)
_CRITERIA: dict[int, list] = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    n, text = marker.args
    entry = _CRITERIA.setdefault(n, [text, "PASS", []])
    if call.excinfo is not None:
        entry[1] = "FAIL"
    entry[2].extend(v for k, v in item.user_properties if k == "measured")


@pytest.fixture
def measured(record_property):
    """Attach a measured value to the acceptance summary line."""
    return lambda text: record_property("measured", text)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        text, outcome, details = _CRITERIA[n]
        extra = f" [{'; '.join(details)}]" if details else ""
        terminalreporter.write_line(f"criterion {n:2d}: {outcome}  {text}{extra}")
