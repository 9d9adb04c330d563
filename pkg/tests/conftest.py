import collections

import pytest

_RESULTS: "collections.OrderedDict[str, list]" = collections.OrderedDict()


class AcceptanceRecorder:
    def check(self, criterion: str, label: str, ok: bool, detail: str) -> None:
        """Record one measured part of a criterion, then assert it."""
        _RESULTS.setdefault(criterion, []).append((label, bool(ok), detail))
        assert ok, f"criterion {criterion} [{label}]: {detail}"


@pytest.fixture
def acceptance():
    return AcceptanceRecorder()


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(_RESULTS, key=lambda c: (len(c), c)):
        parts = _RESULTS[crit]
        ok = all(p[1] for p in parts)
        tr.write_line(f"criterion {crit}: {'PASS' if ok else 'FAIL'}")
        for label, good, detail in parts:
            tr.write_line(f"    [{'pass' if good else 'FAIL'}] {label}: {detail}")
