"""Collects one summary line per acceptance criterion for the terminal report."""

LINES: list[str] = []


def record(name: str, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'}  {name}: {detail}"
    LINES.append(line)
    print(line)
