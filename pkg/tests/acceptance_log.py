"""Collects one result line per acceptance criterion for the end-of-run summary."""
LINES: list[str] = []


def record(number, name: str, passed: bool, detail: str) -> str:
    line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {name}: {detail}"
    LINES.append(line)
    print(line)
    return line
