"""Measurement tables, benchmark splits and DVFS tables.

The canonical measurement file is a CSV with a mandatory header::

    benchmark,freq_hz,volt_v,temp_c,power_w,cycles,<counter>,<counter>,...

Counter deltas are turned into activity densities (events per cycle) by
:func:`rate_vector`; those densities are what every power model consumes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

META_COLUMNS = ("benchmark", "freq_hz", "volt_v", "temp_c", "power_w", "cycles")

# Counters of the four-counter reference model; used when no catalog is given.
DEFAULT_COUNTERS = (
    "inst_executed_cs",
    "executed_global_stores",
    "gpu_busy",
    "active_warps",
)


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True, order=True)
class OperatingPoint:
    """One DVFS table entry."""

    frequency_hz: int
    voltage_v: float

    def __post_init__(self):
        if self.frequency_hz <= 0:
            raise DataError(f"frequency must be positive, got {self.frequency_hz}")
        if not self.voltage_v > 0:
            raise DataError(f"voltage must be positive, got {self.voltage_v}")

    def __str__(self):
        return f"{self.frequency_hz / 1e6:g} MHz / {self.voltage_v:g} V"


@dataclass(frozen=True)
class DvfsTable:
    points: tuple[OperatingPoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        if not self.points:
            raise DataError("DVFS table is empty")
        for lo, hi in zip(self.points, self.points[1:]):
            if hi.frequency_hz <= lo.frequency_hz:
                raise DataError(f"DVFS frequencies must strictly increase ({lo} -> {hi})")
            if hi.voltage_v < lo.voltage_v:
                raise DataError(f"DVFS voltages must not decrease ({lo} -> {hi})")

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)

    def __contains__(self, point):
        return point in self.points

    @property
    def base_voltage(self) -> float:
        return self.points[0].voltage_v

    def constant_voltage_prefix(self) -> tuple[OperatingPoint, ...]:
        """Leading points that share the lowest supply voltage."""
        return tuple(p for p in self.points if p.voltage_v == self.base_voltage)


@dataclass(frozen=True)
class Sample:
    benchmark: str
    point: OperatingPoint
    temperature_c: float
    power_w: float
    cycles: float
    events: tuple[float, ...]
    counter_names: tuple[str, ...] = field(default=(), repr=False, compare=False)

    def rates(self, counters: Sequence[str] | None = None) -> np.ndarray:
        """Rate vector, optionally restricted to ``counters`` (by name)."""
        r = rate_vector(self)
        if counters is None:
            return r
        index = {name: i for i, name in enumerate(self.counter_names)}
        try:
            return r[[index[c] for c in counters]]
        except KeyError as exc:
            raise DataError(f"sample has no counter {exc.args[0]!r}") from None


def rate_vector(s: Sample) -> np.ndarray:
    """events / cycles element-wise; an idle window (cycles == 0) gives zeros."""
    events = np.asarray(s.events, dtype=float)
    if s.cycles == 0:
        return np.zeros_like(events)
    return events / s.cycles


@dataclass(frozen=True)
class MeasurementTable:
    counter_names: tuple[str, ...]
    samples: tuple[Sample, ...]

    def __post_init__(self):
        names = tuple(self.counter_names)
        if len(set(names)) != len(names):
            raise DataError(f"duplicate counter names in {names}")
        samples = []
        for i, s in enumerate(self.samples):
            if len(s.events) != len(names):
                raise DataError(
                    f"sample {i}: {len(s.events)} events but {len(names)} counters"
                )
            _check_sample(s, f"sample {i}")
            if s.counter_names != names:
                s = Sample(s.benchmark, s.point, s.temperature_c, s.power_w,
                           s.cycles, tuple(s.events), names)
            samples.append(s)
        object.__setattr__(self, "counter_names", names)
        object.__setattr__(self, "samples", tuple(samples))

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    @cached_property
    def points(self) -> tuple[OperatingPoint, ...]:
        return tuple(sorted({s.point for s in self.samples}))

    @cached_property
    def benchmarks(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(s.benchmark for s in self.samples))

    @cached_property
    def _rates(self) -> np.ndarray:
        if not self.samples:
            return np.zeros((0, len(self.counter_names)))
        events = np.array([s.events for s in self.samples], dtype=float)
        events = events.reshape(len(self.samples), len(self.counter_names))
        cycles = np.array([s.cycles for s in self.samples], dtype=float)
        out = np.zeros_like(events)
        busy = cycles != 0
        out[busy] = events[busy] / cycles[busy, None]
        return out

    def rate_matrix(self, counters: Sequence[str] | None = None) -> np.ndarray:
        """(n_samples, n_counters) array of rates, columns in ``counters`` order."""
        if counters is None:
            return self._rates.copy()
        return self._rates[:, self.counter_indices(counters)]

    def power_array(self) -> np.ndarray:
        return np.array([s.power_w for s in self.samples], dtype=float)

    def temperature_array(self) -> np.ndarray:
        return np.array([s.temperature_c for s in self.samples], dtype=float)

    def counter_indices(self, counters: Sequence[str]) -> list[int]:
        index = {name: i for i, name in enumerate(self.counter_names)}
        missing = [c for c in counters if c not in index]
        if missing:
            raise DataError(f"unknown counters {missing}; table has {list(self.counter_names)}")
        return [index[c] for c in counters]


def _check_sample(s: Sample, where: str):
    if not s.power_w >= 0:
        raise DataError(f"{where}: power must be non-negative, got {s.power_w}")
    if not s.cycles >= 0:
        raise DataError(f"{where}: cycles must be non-negative, got {s.cycles}")
    for e in s.events:
        if not e >= 0:
            raise DataError(f"{where}: event counts must be non-negative, got {e}")


def slice_table(table: MeasurementTable, point: OperatingPoint | None = None,
                benchmarks: Iterable[str] | None = None) -> MeasurementTable:
    """Samples matching ``point`` and ``benchmarks``; ``None`` means no filter."""
    keep = None if benchmarks is None else set(benchmarks)
    samples = tuple(
        s for s in table.samples
        if (point is None or s.point == point) and (keep is None or s.benchmark in keep)
    )
    return MeasurementTable(table.counter_names, samples)


@dataclass(frozen=True)
class BenchmarkSplit:
    train: frozenset[str]
    test: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "train", frozenset(self.train))
        object.__setattr__(self, "test", frozenset(self.test))
        both = self.train & self.test
        if both:
            raise DataError(f"benchmarks in both train and test: {sorted(both)}")

    def require_nonempty(self):
        if not self.train or not self.test:
            raise DataError("benchmark split needs non-empty [train] and [test] sections")

    def subset(self, name: str) -> frozenset[str] | None:
        """'train', 'test' or 'all' (None, i.e. no filter)."""
        if name == "train":
            return self.train
        if name == "test":
            return self.test
        if name == "all":
            return None
        raise ValueError(f"unknown subset {name!r}")


# --- file formats -----------------------------------------------------------

def _parse_float(text: str, what: str, line: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"row {line}: {what} is not numeric: {text!r}") from None
    if not math.isfinite(value):
        raise DataError(f"row {line}: {what} is not finite: {text!r}")
    return value


def _parse_freq(text: str, line: int) -> int:
    value = _parse_float(text, "freq_hz", line)
    if value != int(value) or value <= 0:
        raise DataError(f"row {line}: freq_hz must be a positive integer, got {text!r}")
    return int(value)


def read_csv_rows(path: str | Path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    """Header plus (line number, cells) for every non-blank row."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        rows = [(reader.line_num, row) for row in reader if any(c.strip() for c in row)]
    if any(not h for h in header):
        raise DataError(f"{path}: header row must name every column")
    for line, row in rows:
        if len(row) != len(header):
            raise DataError(
                f"{path}: row {line} has {len(row)} cells, header has {len(header)}"
            )
    return header, rows


def load_measurements(path: str | Path, power_column: int = 5,
                      counter_columns: Sequence[int] | None = None) -> MeasurementTable:
    """Load a measurement CSV.

    Metadata columns (benchmark, freq_hz, volt_v, temp_c, cycles) are located
    by header name; power and counters by 1-based column index so that files
    with other layouts can be remapped. By default every column after
    ``cycles`` is a counter.
    """
    header, rows = read_csv_rows(path)
    width = len(header)
    meta = {}
    for name in ("benchmark", "freq_hz", "volt_v", "temp_c", "cycles"):
        if name not in header:
            raise DataError(f"{path}: header lacks required column {name!r}")
        meta[name] = header.index(name)
    if counter_columns is None:
        counter_columns = range(meta["cycles"] + 2, width + 1)
    counter_columns = list(counter_columns)
    for col in [power_column, *counter_columns]:
        if not 1 <= col <= width:
            raise DataError(f"{path}: column {col} out of range 1..{width}")
    counters = tuple(header[c - 1] for c in counter_columns)
    if len(set(counters)) != len(counters):
        raise DataError(f"{path}: counter columns repeat a name: {counters}")

    samples = []
    for line, row in rows:
        try:
            point = OperatingPoint(_parse_freq(row[meta["freq_hz"]], line),
                                   _parse_float(row[meta["volt_v"]], "volt_v", line))
        except DataError as exc:
            if str(exc).startswith("row"):
                raise
            raise DataError(f"row {line}: {exc}") from None
        s = Sample(
            benchmark=row[meta["benchmark"]].strip(),
            point=point,
            temperature_c=_parse_float(row[meta["temp_c"]], "temp_c", line),
            power_w=_parse_float(row[power_column - 1], header[power_column - 1], line),
            cycles=_parse_float(row[meta["cycles"]], "cycles", line),
            events=tuple(_parse_float(row[c - 1], header[c - 1], line)
                         for c in counter_columns),
            counter_names=counters,
        )
        _check_sample(s, f"row {line}")
        samples.append(s)
    return MeasurementTable(counters, tuple(samples))


def fmt(x: float) -> str:
    """Float text that parses back to the identical double."""
    return repr(float(x))


def write_measurements(table: MeasurementTable, path: str | Path):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*META_COLUMNS, *table.counter_names])
        for s in table.samples:
            w.writerow([s.benchmark, s.point.frequency_hz, fmt(s.point.voltage_v),
                        fmt(s.temperature_c), fmt(s.power_w), fmt(s.cycles),
                        *(fmt(e) for e in s.events)])


def load_split(path: str | Path) -> BenchmarkSplit:
    """Benchmark split file: ``[train]`` and ``[test]`` sections, one label per line."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    sections: dict[str, list[str]] = {"train": [], "test": []}
    current = None
    for n, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            if current not in sections:
                raise DataError(f"{path}: line {n}: unknown section {line}")
            continue
        if current is None:
            raise DataError(f"{path}: line {n}: label outside a [train]/[test] section")
        sections[current].append(line)
    return BenchmarkSplit(frozenset(sections["train"]), frozenset(sections["test"]))


def write_split(split: BenchmarkSplit, path: str | Path):
    lines = ["[train]", *sorted(split.train), "", "[test]", *sorted(split.test), ""]
    Path(path).write_text("\n".join(lines), encoding="utf-8")


def load_dvfs(path: str | Path) -> DvfsTable:
    header, rows = read_csv_rows(path)
    if header != ["freq_hz", "volt_v"]:
        raise DataError(f"{path}: DVFS header must be 'freq_hz,volt_v', got {header}")
    points = []
    for line, row in rows:
        try:
            points.append(OperatingPoint(_parse_freq(row[0], line),
                                         _parse_float(row[1], "volt_v", line)))
        except DataError as exc:
            raise DataError(f"{path}: {exc}") from None
    return DvfsTable(tuple(points))


def write_dvfs(dvfs: DvfsTable, path: str | Path):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["freq_hz", "volt_v"])
        for p in dvfs:
            w.writerow([p.frequency_hz, fmt(p.voltage_v)])


def dvfs_from_table(table: MeasurementTable) -> DvfsTable:
    """DVFS table made of the distinct operating points present in ``table``."""
    return DvfsTable(table.points)
