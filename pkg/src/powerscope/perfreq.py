"""Per-frequency models: one affine rate model per DVFS operating point."""

from __future__ import annotations

import datetime as _dt
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dataset import (BenchmarkSplit, DataError, DvfsTable, MeasurementTable,
                      OperatingPoint, Sample, fmt, slice_table)
from .regress import Coefficients, FitError, FitReport, fit_report, ols_fit, predict, predict_many

PFM_VERSION = 1


@dataclass(frozen=True)
class PerFreqModel:
    counters: tuple[str, ...]
    entries: Mapping[OperatingPoint, Coefficients]
    train_meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "counters", tuple(self.counters))
        object.__setattr__(self, "entries", dict(sorted(self.entries.items())))
        for point, c in self.entries.items():
            if len(c.slopes_w) != len(self.counters):
                raise ValueError(f"{point}: {len(c.slopes_w)} slopes for "
                                 f"{len(self.counters)} counters")

    @property
    def points(self) -> tuple[OperatingPoint, ...]:
        return tuple(self.entries)

    @property
    def n_params(self) -> int:
        return sum(c.n_params for c in self.entries.values())


def timestamp() -> str:
    """UTC time, pinned by SOURCE_DATE_EPOCH when set (reproducible builds)."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = (_dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc) if epoch
            else _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0))
    return when.isoformat()


def fit_point(table: MeasurementTable, counters: Sequence[str]) -> Coefficients:
    return ols_fit(table.rate_matrix(counters), table.power_array(), names=counters)


def fit_per_freq(table: MeasurementTable, split: BenchmarkSplit, dvfs: DvfsTable,
                 counters: Sequence[str]) -> PerFreqModel:
    counters = tuple(counters)
    table.counter_indices(counters)
    train = slice_table(table, benchmarks=split.train)
    entries = {}
    for point in dvfs:
        rows = slice_table(train, point)
        try:
            entries[point] = fit_point(rows, counters)
        except FitError as exc:
            raise FitError(f"{point}: {exc}") from exc
    meta = {
        "train": ",".join(sorted(split.train)),
        "test": ",".join(sorted(split.test)),
        "timestamp": timestamp(),
    }
    return PerFreqModel(counters, entries, meta)


def predict_power(m: PerFreqModel, s: Sample) -> float:
    try:
        c = m.entries[s.point]
    except KeyError:
        raise KeyError(f"model has no entry for operating point {s.point}") from None
    return predict(c, s.rates(m.counters))


def predict_table(m: PerFreqModel, table: MeasurementTable) -> np.ndarray:
    """Predictions for every sample; NaN where the model lacks the point."""
    rates = table.rate_matrix(m.counters)
    out = np.full(len(table), np.nan)
    points = [s.point for s in table.samples]
    for point, c in m.entries.items():
        idx = [i for i, p in enumerate(points) if p == point]
        if idx:
            out[idx] = predict_many(c, rates[idx])
    return out


def evaluate(m: PerFreqModel, table: MeasurementTable,
             benchmarks: Iterable[str] | None = None) -> FitReport:
    """MAPE per operating point and overall; samples at unmodelled points are skipped."""
    sub = slice_table(table, benchmarks=benchmarks)
    pred = predict_table(m, sub)
    covered = ~np.isnan(pred)
    if not covered.any():
        raise ValueError("empty evaluation set")
    points = [s.point for s, ok in zip(sub.samples, covered) if ok]
    return fit_report(points, pred[covered], sub.power_array()[covered],
                      skipped=int((~covered).sum()))


# --- .pfm files ---------------------------------------------------------------
#
#   pfm-version: 1
#   counters: a,b
#   meta.train: ...
#   point: <freq_hz> <volt_v> | <intercept> <slope> <slope>

def format_pfm(m: PerFreqModel) -> str:
    lines = [f"pfm-version: {PFM_VERSION}", f"counters: {','.join(m.counters)}"]
    lines += [f"meta.{k}: {v}" for k, v in m.train_meta.items()]
    for point, c in m.entries.items():
        values = " ".join(fmt(v) for v in (c.intercept_w, *c.slopes_w))
        lines.append(f"point: {point.frequency_hz} {fmt(point.voltage_v)} | {values}")
    return "\n".join(lines) + "\n"


def parse_pfm(text: str, source: str = "<pfm>") -> PerFreqModel:
    counters = None
    meta = {}
    entries = {}
    version = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise DataError(f"{source}: line {n}: expected 'key: value'")
        key, value = key.strip(), value.strip()
        if key == "pfm-version":
            version = int(value)
            if version != PFM_VERSION:
                raise DataError(f"{source}: unsupported pfm version {version}")
        elif key == "counters":
            counters = tuple(c for c in value.split(",") if c)
        elif key.startswith("meta."):
            meta[key[5:]] = value
        elif key == "point":
            head, bar, tail = value.partition("|")
            try:
                freq, volt = head.split()
                numbers = [float(v) for v in tail.split()]
                point = OperatingPoint(int(freq), float(volt))
            except ValueError as exc:
                raise DataError(f"{source}: line {n}: bad point entry ({exc})") from None
            if not bar or not numbers:
                raise DataError(f"{source}: line {n}: point entry needs '| intercept slopes...'")
            entries[point] = Coefficients(numbers[0], tuple(numbers[1:]))
        else:
            raise DataError(f"{source}: line {n}: unknown key {key!r}")
    if version is None or counters is None:
        raise DataError(f"{source}: missing pfm-version or counters")
    try:
        return PerFreqModel(counters, entries, meta)
    except ValueError as exc:
        raise DataError(f"{source}: {exc}") from None


def save_pfm(m: PerFreqModel, path: str | Path):
    Path(path).write_text(format_pfm(m), encoding="utf-8")


def load_pfm(path: str | Path) -> PerFreqModel:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    return parse_pfm(path.read_text(encoding="utf-8"), str(path))
