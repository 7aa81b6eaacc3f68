"""Unified model: one reference per-frequency model scaled across DVFS points.

Power at a target point is derived from the reference prediction by
splitting it into a dynamic part, scaled by (f_t/f_r) * (V_t/V_r)**2, and a
static part, scaled by (V_t/V_r)**exponent (2 by default).

The ratios are target over reference. A printed form of this law with the
ratios inverted (reference over target) is a known typo: it contradicts the
P ~ C V^2 f dynamic-power law and the worked reference model.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .dataset import (DataError, DvfsTable, MeasurementTable, OperatingPoint, Sample,
                      _parse_float, _parse_freq, fmt, read_csv_rows, slice_table)
from .perfreq import PerFreqModel
from .regress import Coefficients, FitError, FitReport, fit_report, ols_fit, predict, predict_many

if TYPE_CHECKING:
    from .thermal import ThermalStaticModel

UFM_VERSION = 1


class Anchor(str, Enum):
    UAL = "UAL"   # lowest frequency at the base voltage
    UAM = "UAM"   # highest frequency still at the base voltage
    UAH = "UAH"   # highest DVFS point

    @classmethod
    def parse(cls, text: str) -> "Anchor":
        aliases = {"low": cls.UAL, "mid": cls.UAM, "middle": cls.UAM, "high": cls.UAH}
        key = text.strip()
        return aliases.get(key.lower()) or cls(key.upper())


class StaticMethod(str, Enum):
    ZERO_FREQ_INTERCEPT = "zero_freq_intercept"
    DYNAMIC_SUBTRACTION = "dynamic_subtraction"


@dataclass(frozen=True)
class IdleReading:
    point: OperatingPoint
    idle_power_w: float
    temperature_c: float


@dataclass(frozen=True)
class IdleSweep:
    """Idle (no workload) power readings; a point may be read several times."""

    points: tuple[IdleReading, ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        for r in self.points:
            if not r.idle_power_w > 0:
                raise DataError(f"idle power must be positive at {r.point}, got {r.idle_power_w}")

    def at_voltage(self, voltage_v: float) -> list[IdleReading]:
        return [r for r in self.points if r.point.voltage_v == voltage_v]

    def idle_power(self, point: OperatingPoint) -> float:
        """Mean idle power over the readings taken at ``point``."""
        values = [r.idle_power_w for r in self.points if r.point == point]
        if not values:
            raise DataError(f"idle sweep has no reading at {point}")
        return float(np.mean(values))


@dataclass(frozen=True)
class StaticPowerEstimate:
    static_w: float
    voltage_v: float
    temperature_c: float
    method: StaticMethod
    slope_w_per_hz: float | None = None


@dataclass(frozen=True)
class UnifiedModel:
    counters: tuple[str, ...]
    reference: Coefficients
    ref_point: OperatingPoint
    static_w: float
    anchor: Anchor
    static_exponent: float = 2.0
    thermal: "ThermalStaticModel | None" = None

    def __post_init__(self):
        object.__setattr__(self, "counters", tuple(self.counters))
        object.__setattr__(self, "anchor", Anchor(self.anchor))
        if len(self.reference.slopes_w) != len(self.counters):
            raise ValueError("reference slopes do not match the counter list")

    def with_static(self, static_w: float) -> "UnifiedModel":
        return UnifiedModel(self.counters, self.reference, self.ref_point, static_w,
                            self.anchor, self.static_exponent, self.thermal)


def _line(x, y) -> Coefficients:
    return ols_fit(np.asarray(x, dtype=float)[:, None], y, names=["frequency"])


def estimate_static_zero_freq(sweep: IdleSweep, voltage_v: float) -> StaticPowerEstimate:
    """Zero-frequency intercept of idle power vs frequency at one voltage."""
    readings = sweep.at_voltage(voltage_v)
    if len({r.point.frequency_hz for r in readings}) < 2:
        raise FitError(f"need idle readings at >= 2 frequencies at {voltage_v} V")
    line = _line([r.point.frequency_hz for r in readings], [r.idle_power_w for r in readings])
    if line.intercept_w < 0:
        raise FitError(f"negative static power intercept {line.intercept_w:.4g} W; "
                       "idle sweep is not physically consistent")
    return StaticPowerEstimate(line.intercept_w, voltage_v,
                               float(np.mean([r.temperature_c for r in readings])),
                               StaticMethod.ZERO_FREQ_INTERCEPT, line.slopes_w[0])


def clock_activity_constant(idle_power_w: float, static_w: float,
                            point: OperatingPoint) -> float:
    """alpha*C from idle = alpha*C*V^2*f + static."""
    dynamic = idle_power_w - static_w
    if not dynamic > 0:
        raise FitError(f"idle power {idle_power_w} W leaves no clock power above "
                       f"static {static_w} W at {point}")
    return dynamic / (point.voltage_v ** 2 * point.frequency_hz)


def estimate_static_high(sweep: IdleSweep, alpha_c: float,
                         high: OperatingPoint) -> StaticPowerEstimate:
    """Static power at ``high``: idle power minus the clock dynamic power."""
    if not alpha_c > 0:
        raise ValueError(f"alpha*C must be positive, got {alpha_c}")
    idle = sweep.idle_power(high)
    static = idle - alpha_c * high.voltage_v ** 2 * high.frequency_hz
    if static < 0:
        raise FitError(f"clock power exceeds idle power at {high}; alpha*C inconsistent with sweep")
    temps = [r.temperature_c for r in sweep.points if r.point == high]
    return StaticPowerEstimate(static, high.voltage_v, float(np.mean(temps)),
                               StaticMethod.DYNAMIC_SUBTRACTION)


def scale_factors(ref: OperatingPoint, target: OperatingPoint,
                  static_exponent: float = 2.0) -> tuple[float, float]:
    """(dynamic factor, static factor) taking reference power to ``target``."""
    v = target.voltage_v / ref.voltage_v
    dynamic = (target.frequency_hz / ref.frequency_hz) * v * v
    return dynamic, v ** static_exponent


def scale_power(p_ref_w: float, static_ref_w: float, ref: OperatingPoint,
                target: OperatingPoint, static_exponent: float = 2.0):
    """(p_ref - static)*(f_t/f_r)*(V_t/V_r)^2 + static*(V_t/V_r)^exponent.

    Written as p*kd + static*(ks - kd) so the identity target == ref returns
    ``p_ref_w`` bit-for-bit. Accepts arrays for ``p_ref_w``.
    """
    kd, ks = scale_factors(ref, target, static_exponent)
    return p_ref_w * kd + static_ref_w * (ks - kd)


def _anchor_point(anchor: Anchor, dvfs: DvfsTable) -> OperatingPoint:
    prefix = dvfs.constant_voltage_prefix()
    if anchor is Anchor.UAL:
        return prefix[0]
    if anchor is Anchor.UAM:
        return prefix[-1]
    return dvfs.points[-1]


def build_unified(pf: PerFreqModel, anchor: Anchor | str, sweep: IdleSweep,
                  dvfs: DvfsTable, static_exponent: float = 2.0) -> UnifiedModel:
    anchor = Anchor.parse(anchor) if isinstance(anchor, str) else Anchor(anchor)
    ref = _anchor_point(anchor, dvfs)
    if ref not in pf.entries:
        raise DataError(f"per-frequency model has no entry for anchor point {ref}")
    base = estimate_static_zero_freq(sweep, dvfs.base_voltage)
    static = base.static_w
    if anchor is Anchor.UAH:
        mid = _anchor_point(Anchor.UAM, dvfs)
        alpha_c = clock_activity_constant(sweep.idle_power(mid), base.static_w, mid)
        static = estimate_static_high(sweep, alpha_c, ref).static_w
    return UnifiedModel(pf.counters, pf.entries[ref], ref, static, anchor, static_exponent)


def predict_unified(u: UnifiedModel, s: Sample) -> float:
    p_ref = predict(u.reference, s.rates(u.counters))
    return float(scale_power(p_ref, u.static_w, u.ref_point, s.point, u.static_exponent))


def predict_unified_table(u: UnifiedModel, table: MeasurementTable) -> np.ndarray:
    p_ref = predict_many(u.reference, table.rate_matrix(u.counters))
    out = np.empty(len(table))
    for i, s in enumerate(table.samples):
        out[i] = scale_power(p_ref[i], u.static_w, u.ref_point, s.point, u.static_exponent)
    return out


def evaluate_unified(u: UnifiedModel, table: MeasurementTable, benchmarks=None,
                     predictor=None) -> FitReport:
    sub = slice_table(table, benchmarks=benchmarks)
    if not len(sub):
        raise ValueError("empty evaluation set")
    pred = (predictor or predict_unified_table)(u, sub)
    return fit_report([s.point for s in sub.samples], pred, sub.power_array())


# --- idle sweep CSV: freq_hz,volt_v,power_w,temp_c ------------------------------

IDLE_COLUMNS = ["freq_hz", "volt_v", "power_w", "temp_c"]


def load_idle_csv(path: str | Path) -> list[IdleReading]:
    header, rows = read_csv_rows(path)
    missing = [c for c in IDLE_COLUMNS if c not in header]
    if missing:
        raise DataError(f"{path}: idle CSV lacks columns {missing}")
    col = {c: header.index(c) for c in IDLE_COLUMNS}
    out = []
    for line, row in rows:
        try:
            point = OperatingPoint(_parse_freq(row[col["freq_hz"]], line),
                                   _parse_float(row[col["volt_v"]], "volt_v", line))
        except DataError as exc:
            raise DataError(f"{path}: {exc}") from None
        out.append(IdleReading(point, _parse_float(row[col["power_w"]], "power_w", line),
                               _parse_float(row[col["temp_c"]], "temp_c", line)))
    return out


def load_idle_sweep(path: str | Path) -> IdleSweep:
    return IdleSweep(tuple(load_idle_csv(path)))


def write_idle_csv(readings: Sequence[IdleReading], path: str | Path):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(IDLE_COLUMNS)
        for r in readings:
            w.writerow([r.point.frequency_hz, fmt(r.point.voltage_v),
                        fmt(r.idle_power_w), fmt(r.temperature_c)])


# --- .ufm files -------------------------------------------------------------------
#
#   ufm-version: 1
#   anchor: UAM
#   counters: a,b
#   ref-point: <freq_hz> <volt_v>
#   reference: <intercept> <slope>...
#   static-w: <watts>
#   static-exponent: 2.0
#   thermal: slope=... intercept=... voltage=... t_ref=... t_min=... t_max=...

THERMAL_KEYS = ("slope", "intercept", "voltage", "t_ref", "t_min", "t_max")


def format_ufm(u: UnifiedModel) -> str:
    ref = u.reference
    lines = [
        f"ufm-version: {UFM_VERSION}",
        f"anchor: {u.anchor.value}",
        f"counters: {','.join(u.counters)}",
        f"ref-point: {u.ref_point.frequency_hz} {fmt(u.ref_point.voltage_v)}",
        f"reference: {' '.join(fmt(v) for v in (ref.intercept_w, *ref.slopes_w))}",
        f"static-w: {fmt(u.static_w)}",
        f"static-exponent: {fmt(u.static_exponent)}",
    ]
    if u.thermal is not None:
        t = u.thermal
        values = (t.slope_w_per_c, t.intercept_w, t.voltage_v, t.t_ref_c, t.t_min_c, t.t_max_c)
        lines.append("thermal: " + " ".join(f"{k}={fmt(v)}" for k, v in zip(THERMAL_KEYS, values)))
    return "\n".join(lines) + "\n"


def parse_ufm(text: str, source: str = "<ufm>") -> UnifiedModel:
    fields: dict[str, str] = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise DataError(f"{source}: line {n}: expected 'key: value'")
        fields[key.strip()] = value.strip()
    version = fields.get("ufm-version")
    if version is not None and version != str(UFM_VERSION):
        raise DataError(f"{source}: unsupported ufm version {version}")
    required = ("ufm-version", "anchor", "counters", "ref-point", "reference", "static-w")
    missing = [k for k in required if k not in fields]
    if missing:
        raise DataError(f"{source}: missing keys {missing}")
    try:
        freq, volt = fields["ref-point"].split()
        numbers = [float(v) for v in fields["reference"].split()]
        thermal = None
        if "thermal" in fields:
            from .thermal import ThermalStaticModel
            kv = dict(item.split("=", 1) for item in fields["thermal"].split())
            slope, intercept, voltage, t_ref, t_min, t_max = (float(kv[k]) for k in THERMAL_KEYS)
            thermal = ThermalStaticModel(slope, intercept, voltage, t_min, t_max, t_ref)
        return UnifiedModel(
            counters=tuple(c for c in fields["counters"].split(",") if c),
            reference=Coefficients(numbers[0], tuple(numbers[1:])),
            ref_point=OperatingPoint(int(freq), float(volt)),
            static_w=float(fields["static-w"]),
            anchor=Anchor(fields["anchor"]),
            static_exponent=float(fields.get("static-exponent", "2.0")),
            thermal=thermal,
        )
    except (ValueError, KeyError, IndexError) as exc:
        raise DataError(f"{source}: malformed ufm ({exc})") from None


def save_ufm(u: UnifiedModel, path: str | Path):
    Path(path).write_text(format_ufm(u), encoding="utf-8")


def load_ufm(path: str | Path) -> UnifiedModel:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    return parse_ufm(path.read_text(encoding="utf-8"), str(path))
