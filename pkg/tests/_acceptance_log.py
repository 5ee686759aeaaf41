"""Verdict lines collected by the acceptance suite and echoed in the terminal summary."""

LINES: dict[int, str] = {}


def record(n: int, ok: bool, detail: str) -> bool:
    LINES[n] = f"CRITERION {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(LINES[n])
    return ok
