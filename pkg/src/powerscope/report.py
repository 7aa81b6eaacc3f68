"""Plot-ready CSV tables and text summaries of model error."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import MeasurementTable, OperatingPoint, fmt
from .regress import MIN_MEASURED_W, FitReport


@dataclass(frozen=True)
class TableDoc:
    header: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        w.writerows(self.rows)
        return buf.getvalue()

    def write(self, path: str | Path):
        Path(path).write_text(self.to_csv(), encoding="utf-8")


def error_table(reports: Sequence[tuple[str, FitReport]]) -> TableDoc:
    """Rows: operating points ascending, then ``overall``; one MAPE column and
    one sample-count column per labelled report. Points a report lacks are blank."""
    if not reports:
        raise ValueError("error_table needs at least one report")
    labels = [label for label, _ in reports]
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate report labels: {labels}")
    points: set[OperatingPoint] = set()
    for _, r in reports:
        points.update(r.per_point)
    header = ["freq_hz", "volt_v"]
    for label in labels:
        header += [label, f"{label}_n"]
    rows = []
    for p in sorted(points):
        row = [str(p.frequency_hz), fmt(p.voltage_v)]
        for _, r in reports:
            e = r.per_point.get(p)
            row += [fmt(e.mape_pct), str(e.n)] if e else ["", ""]
        rows.append(tuple(row))
    overall = ["overall", ""]
    for _, r in reports:
        overall += [fmt(r.overall_pct), str(r.n)]
    rows.append(tuple(overall))
    return TableDoc(tuple(header), tuple(rows))


TRACE_COLUMNS = ("sample_idx", "benchmark", "freq_hz", "volt_v", "temp_c", "measured_w",
                 "predicted_w", "raw_predicted_w", "abs_err_w", "pct_err", "clamped")


def trace(predicted, table: MeasurementTable, sample_index: Sequence[int] | None = None) -> TableDoc:
    """Prediction-vs-measured trace.

    ``predicted_w`` is clamped at 0 for display (``clamped`` = 1 marks the
    row); errors are computed from the raw prediction. ``pct_err`` is blank
    when the measured power is below the percentage floor.
    """
    pred = np.asarray(predicted, dtype=float)
    if pred.shape != (len(table),):
        raise ValueError(f"{pred.shape[0] if pred.ndim else 0} predictions for {len(table)} samples")
    if sample_index is None:
        sample_index = range(len(table))
    sample_index = list(sample_index)
    if len(sample_index) != len(table):
        raise ValueError("sample_index must align with the table")
    rows = []
    for idx, s, p in zip(sample_index, table.samples, pred):
        err = abs(p - s.power_w)
        pct = fmt(err / s.power_w * 100.0) if s.power_w > MIN_MEASURED_W else ""
        rows.append((str(idx), s.benchmark, str(s.point.frequency_hz), fmt(s.point.voltage_v),
                     fmt(s.temperature_c), fmt(s.power_w), fmt(max(p, 0.0)), fmt(p),
                     fmt(err), pct, "1" if p < 0 else "0"))
    return TableDoc(TRACE_COLUMNS, tuple(rows))


def sig4(x: float) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "-"
    return f"{x:.4g}"


def summary_text(title: str, reports: Sequence[tuple[str, FitReport]],
                 extra: Sequence[str] = ()) -> str:
    """One-page summary; numbers rounded to 4 significant digits."""
    lines = [title, "=" * len(title), ""]
    lines += list(extra)
    if extra:
        lines.append("")
    for label, r in reports:
        lines.append(f"[{label}] overall MAPE {sig4(r.overall_pct)}% over {r.n} samples"
                     f" (point average {sig4(r.mean_point_pct)}%)")
        if r.excluded:
            lines.append(f"  {r.excluded} samples below the measured-power floor excluded")
        if r.skipped:
            lines.append(f"  {r.skipped} samples at operating points outside the model skipped")
        for p, e in r.per_point.items():
            lines.append(f"  {p.frequency_hz / 1e6:>8.1f} MHz {p.voltage_v:>6.3f} V"
                         f"  {sig4(e.mape_pct):>8}%  n={e.n}")
        lines.append("")
    return "\n".join(lines)


def idle_fit_table(readings, static_w: float, slope_w_per_hz: float) -> TableDoc:
    """Idle readings alongside the fitted zero-frequency line (static extraction)."""
    rows = [(str(r.point.frequency_hz), fmt(r.point.voltage_v), fmt(r.idle_power_w),
             fmt(static_w + slope_w_per_hz * r.point.frequency_hz))
            for r in readings]
    rows.append(("0", "", "", fmt(static_w)))
    return TableDoc(("freq_hz", "volt_v", "idle_w", "fitted_w"), tuple(rows))


def thermal_fit_table(points: Sequence[tuple[float, float]], slope: float,
                      intercept: float) -> TableDoc:
    """(temperature, static power) run points alongside the fitted line."""
    rows = [(fmt(t), fmt(s), fmt(slope * t + intercept)) for s, t in points]
    return TableDoc(("temp_c", "static_w", "fitted_w"), tuple(rows))
