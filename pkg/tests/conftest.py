from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo",
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

_CRITERIA: dict[int, list[tuple[str, bool, str]]] = {}


@pytest.fixture
def criterion():
    """Record a sub-result of an acceptance criterion: ``criterion(n, name, ok, detail)``."""

    def record(number: int, name: str, ok: bool, detail: str = "") -> bool:
        _CRITERIA.setdefault(number, []).append((name, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        parts = _CRITERIA[number]
        ok = all(p[1] for p in parts)
        tr.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}")
        for name, sub_ok, detail in parts:
            tr.write_line(f"    [{'pass' if sub_ok else 'FAIL'}] {name}: {detail}")
