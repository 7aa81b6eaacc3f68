import os

import numpy as np
import pytest

from powerscope.dataset import MeasurementTable, OperatingPoint, Sample

os.environ.setdefault("SOURCE_DATE_EPOCH", "0")

# criterion number -> list of (part, ok, detail); filled by test_acceptance
ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[n]
        ok = all(p[1] for p in parts)
        detail = "; ".join(f"{name}: {'ok' if good else 'FAIL'} ({d})" for name, good, d in parts)
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")


def make_table(rows, counters=("a", "b")):
    """rows: (benchmark, (freq_hz, volt), power, cycles, events[, temp])."""
    samples = []
    for r in rows:
        bench, (f, v), power, cycles, events = r[:5]
        temp = r[5] if len(r) > 5 else 23.0
        samples.append(Sample(bench, OperatingPoint(f, v), temp, power, cycles, tuple(events)))
    return MeasurementTable(tuple(counters), tuple(samples))


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))
