import numpy as np
import pytest

ACCEPTANCE = {}


def binom_ok(count, trials, p, k=3.0):
    sd = np.sqrt(p * (1 - p) / trials)
    return abs(count / trials - p) <= k * sd


def record(number, ok, detail):
    """Store and print one pass/fail line for an acceptance criterion."""
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
