import sys
from contextlib import contextmanager
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_LINES = pytest.StashKey[list]()


class CriterionLog:
    """Collects one PASS/FAIL line per acceptance criterion."""

    def __init__(self, lines):
        self.lines = lines

    @contextmanager
    def criterion(self, name):
        state = {"detail": "", "ok": None}

        def record(ok, detail=""):
            state["ok"], state["detail"] = bool(ok), detail

        try:
            yield record
        except BaseException as exc:
            state["ok"], state["detail"] = False, f"{type(exc).__name__}: {exc}".splitlines()[0]
            raise
        finally:
            line = f"{'PASS' if state['ok'] else 'FAIL'}  {name}" + (f"  ({state['detail']})" if state["detail"] else "")
            self.lines.append(line)
            print(line)
        assert state["ok"], f"{name}: {state['detail']}"


@pytest.fixture(scope="session")
def acceptance(request):
    if _LINES not in request.config.stash:
        request.config.stash[_LINES] = []
    return CriterionLog(request.config.stash[_LINES])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
