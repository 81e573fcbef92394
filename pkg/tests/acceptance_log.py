"""Per-criterion pass/fail registry shared by the acceptance tests and conftest."""

from __future__ import annotations

RESULTS: dict[int, tuple[str, bool, str]] = {}


def record(number: int, title: str, passed: bool, detail: str) -> bool:
    RESULTS[number] = (title, bool(passed), detail)
    return bool(passed)


def lines() -> list[str]:
    out = []
    for n in sorted(RESULTS):
        title, ok, detail = RESULTS[n]
        out.append(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
    return out
