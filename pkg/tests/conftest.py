import contextlib

import pytest

_RESULTS = {}


class _Record:
    def __init__(self, number, title):
        self.number = number
        self.title = title
        self.detail = ""


@pytest.fixture
def criterion():
    """Context manager that logs one acceptance criterion as PASS or FAIL."""

    @contextlib.contextmanager
    def record(number, title):
        rec = _Record(number, title)
        try:
            yield rec
        except BaseException as exc:
            _RESULTS[number] = ("FAIL", rec, f"{rec.detail} [{type(exc).__name__}: {exc}]".strip())
            raise
        _RESULTS[number] = ("PASS", rec, rec.detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        status, rec, detail = _RESULTS[number]
        terminalreporter.write_line(f"{status} criterion {number}: {rec.title} | {detail}")
