import sys
from contextlib import contextmanager
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_CRITERIA: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture
def criterion():
    """``with criterion(k, title):`` records PASS/FAIL for the acceptance summary."""
    @contextmanager
    def record(k, title):
        detail = {"note": ""}
        try:
            yield detail
        except BaseException as exc:
            _CRITERIA[k] = (title, False, f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
            print(f"FAIL criterion {k}: {title}")
            raise
        _CRITERIA[k] = (title, True, detail["note"])
        print(f"PASS criterion {k}: {title}" + (f" ({detail['note']})" if detail["note"] else ""))
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        title, ok, note = _CRITERIA[k]
        line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {title}"
        terminalreporter.write_line(line + (f" ({note})" if note else ""))
