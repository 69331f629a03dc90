"""Collects one pass/fail line per acceptance criterion for the terminal summary."""

LINES: list[str] = []


def record(name: str, ok: bool, detail: str) -> bool:
    LINES.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return ok
