"""Temperature-dependent static power.

Each idle run (one fan setting, one voltage, several frequencies) yields a
(static power, temperature) pair from the zero-frequency intercepts of its
power-vs-frequency and temperature-vs-frequency lines. A line through those
pairs gives static power as a function of temperature, which then replaces
the constant static term of the unified model.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import DataError, MeasurementTable, OperatingPoint, Sample
from .regress import FitError, ols_fit, predict
from .unified import IdleReading, UnifiedModel, scale_factors, scale_power

DEFAULT_T_REF_C = 23.0


class ExtrapolationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ThermalRun:
    samples: tuple[tuple[int, float, float], ...]   # (frequency_hz, idle_power_w, temperature_c)
    voltage_v: float

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(tuple(s) for s in self.samples))
        if len({s[0] for s in self.samples}) < 2:
            raise DataError("thermal run needs at least 2 distinct frequencies")

    @classmethod
    def from_readings(cls, readings: Sequence[IdleReading]) -> "ThermalRun":
        volts = {r.point.voltage_v for r in readings}
        if len(volts) != 1:
            raise DataError(f"thermal run must use one voltage, got {sorted(volts)}")
        return cls(tuple((r.point.frequency_hz, r.idle_power_w, r.temperature_c)
                         for r in readings), volts.pop())

    def readings(self) -> list[IdleReading]:
        return [IdleReading(OperatingPoint(f, self.voltage_v), p, t) for f, p, t in self.samples]


@dataclass(frozen=True)
class ThermalStaticModel:
    slope_w_per_c: float
    intercept_w: float
    voltage_v: float
    t_min_c: float
    t_max_c: float
    t_ref_c: float = DEFAULT_T_REF_C

    def covers(self, temperature_c: float) -> bool:
        slack = 1e-9 * max(1.0, abs(self.t_min_c), abs(self.t_max_c))   # intercept rounding
        return self.t_min_c - slack <= temperature_c <= self.t_max_c + slack


def run_to_point(run: ThermalRun) -> tuple[float, float]:
    """(static power, temperature) at zero frequency for one idle run."""
    freq = np.array([s[0] for s in run.samples], dtype=float)[:, None]
    if len(np.unique(freq)) < 2:
        raise FitError("degenerate thermal run: a single frequency")
    power = ols_fit(freq, [s[1] for s in run.samples], names=["frequency"])
    temp = ols_fit(freq, [s[2] for s in run.samples], names=["frequency"])
    return power.intercept_w, temp.intercept_w


def fit_thermal_static(runs: Sequence[ThermalRun],
                       t_ref_c: float = DEFAULT_T_REF_C) -> ThermalStaticModel:
    """Least-squares line of static power against temperature over the runs."""
    if len(runs) < 2:
        raise FitError("need at least 2 thermal runs")
    volts = {r.voltage_v for r in runs}
    if len(volts) != 1:
        raise DataError(f"thermal runs span several voltages: {sorted(volts)}")
    pairs = [run_to_point(r) for r in runs]
    static = [p[0] for p in pairs]
    temps = np.array([p[1] for p in pairs])
    if np.ptp(temps) == 0:
        raise FitError("all thermal runs sit at one temperature")
    line = ols_fit(temps[:, None], static, names=["temperature"])
    slope = line.slopes_w[0]
    if slope < 0:
        raise FitError(f"static power falls with temperature (slope {slope:.4g} W/C)")
    return ThermalStaticModel(slope, line.intercept_w, volts.pop(),
                              float(temps.min()), float(temps.max()), t_ref_c)


def static_at(tm: ThermalStaticModel, temperature_c) -> float:
    value = tm.slope_w_per_c * temperature_c + tm.intercept_w
    if np.any(np.asarray(value) < 0):
        raise ValueError(f"negative static power at {temperature_c} C")
    if not np.all([tm.covers(t) for t in np.atleast_1d(temperature_c)]):
        warnings.warn(f"temperature outside fitted range [{tm.t_min_c:g}, {tm.t_max_c:g}] C",
                      ExtrapolationWarning, stacklevel=2)
    return value


def _check_voltage(u: UnifiedModel, tm: ThermalStaticModel):
    if u.ref_point.voltage_v != tm.voltage_v:
        raise DataError(f"thermal model fitted at {tm.voltage_v} V but the unified "
                        f"reference runs at {u.ref_point.voltage_v} V")


def predict_unified_thermal(u: UnifiedModel, tm: ThermalStaticModel, s: Sample) -> float:
    """Unified prediction with static power taken from temperature.

    The training temperature's static power is removed at the reference point
    and the sample temperature's static power is added back, voltage scaled.
    """
    _check_voltage(u, tm)
    p_ref = predict(u.reference, s.rates(u.counters))
    static_ref = static_at(tm, tm.t_ref_c)
    _, ks = scale_factors(u.ref_point, s.point, u.static_exponent)
    base = scale_power(p_ref, static_ref, u.ref_point, s.point, u.static_exponent)
    return float(base + (static_at(tm, s.temperature_c) - static_ref) * ks)


def predict_unified_thermal_table(u: UnifiedModel, table: MeasurementTable,
                                  tm: ThermalStaticModel | None = None) -> np.ndarray:
    tm = tm or u.thermal
    if tm is None:
        raise ValueError("unified model has no thermal extension")
    return np.array([predict_unified_thermal(u, tm, s) for s in table.samples])


def attach_thermal(u: UnifiedModel, tm: ThermalStaticModel) -> UnifiedModel:
    _check_voltage(u, tm)
    return UnifiedModel(u.counters, u.reference, u.ref_point, u.static_w, u.anchor,
                        u.static_exponent, tm)
