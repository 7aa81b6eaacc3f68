import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import make_table
from powerscope.dataset import DataError, OperatingPoint
from powerscope.regress import Coefficients, FitError
from powerscope.synth import REFERENCE_MODEL
from powerscope.thermal import (
    ExtrapolationWarning, ThermalRun, ThermalStaticModel, attach_thermal, fit_thermal_static,
    predict_unified_thermal, predict_unified_thermal_table, run_to_point, static_at,
)
from powerscope.unified import (
    Anchor, IdleReading, UnifiedModel, format_ufm, parse_ufm, predict_unified, scale_factors,
)

V = 0.82
FREQS = (76_000_000, 152_000_000, 228_000_000, 304_000_000, 380_000_000)
P380 = OperatingPoint(380_000_000, V)
LINE = ThermalStaticModel(0.0051, 0.0849, V, 0.0, 100.0, 23.0)
COUNTERS = ("a", "b", "c", "d")


def line_run(static, temp, w_per_hz=1e-9, c_per_hz=1e-8, freqs=FREQS):
    return ThermalRun(tuple((f, static + w_per_hz * f, temp + c_per_hz * f) for f in freqs), V)


def on_line(temp):
    return 0.0051 * temp + 0.0849


class TestRunToPoint:
    def test_exact_line(self):
        s, t = run_to_point(line_run(0.2, 30.0))
        assert s == pytest.approx(0.2, abs=1e-12)
        assert t == pytest.approx(30.0, abs=1e-9)

    def test_constant_temperature(self):
        s, t = run_to_point(line_run(0.2, 41.5, c_per_hz=0.0))
        assert t == pytest.approx(41.5, abs=1e-12)

    def test_one_frequency(self):
        with pytest.raises(DataError):
            ThermalRun(((76_000_000, 0.3, 30.0), (76_000_000, 0.31, 30.0)), V)

    def test_from_readings_one_voltage(self):
        readings = [IdleReading(OperatingPoint(76_000_000, V), 0.3, 30),
                    IdleReading(OperatingPoint(998_000_000, 1.07), 3.0, 40)]
        with pytest.raises(DataError):
            ThermalRun.from_readings(readings)
        run = line_run(0.2, 30.0)
        assert ThermalRun.from_readings(run.readings()) == run


class TestFit:
    def test_two_runs_on_line(self):
        runs = [line_run(0.2022, 23.0, c_per_hz=0.0), line_run(0.3399, 50.0, c_per_hz=0.0)]
        tm = fit_thermal_static(runs)
        assert tm.slope_w_per_c == pytest.approx(0.0051, abs=1e-9)
        assert tm.intercept_w == pytest.approx(0.0849, abs=1e-9)
        assert (tm.t_min_c, tm.t_max_c) == pytest.approx((23.0, 50.0))

    def test_flat_static(self):
        tm = fit_thermal_static([line_run(0.3, 20.0), line_run(0.3, 60.0)])
        assert tm.slope_w_per_c == pytest.approx(0.0, abs=1e-14)
        assert tm.intercept_w == pytest.approx(0.3, abs=1e-12)

    def test_colinear_three_runs(self):
        temps = (20.0, 35.0, 65.0)
        runs = [line_run(on_line(t), t) for t in temps]
        tm = fit_thermal_static(runs)
        resid = [on_line(t) - static_at(tm, t) for t in temps]
        assert np.max(np.abs(resid)) < 1e-12

    def test_needs_two_runs(self):
        with pytest.raises(FitError):
            fit_thermal_static([line_run(0.2, 30.0)])

    def test_same_temperature(self):
        with pytest.raises(FitError):
            fit_thermal_static([line_run(0.2, 30.0), line_run(0.25, 30.0)])

    def test_negative_slope(self):
        with pytest.raises(FitError):
            fit_thermal_static([line_run(0.3, 20.0), line_run(0.2, 60.0)])

    def test_mixed_voltages(self):
        hot = ThermalRun(((76_000_000, 0.3, 50.0), (152_000_000, 0.4, 51.0)), 0.9)
        with pytest.raises(DataError):
            fit_thermal_static([line_run(0.2, 30.0), hot])


class TestStaticAt:
    def test_at_23(self):
        assert static_at(LINE, 23.0) == pytest.approx(0.2022, abs=1e-12)

    def test_at_zero(self):
        assert static_at(LINE, 0.0) == pytest.approx(0.0849, abs=1e-15)

    def test_slope_zero(self):
        tm = ThermalStaticModel(0.0, 0.3, V, 0, 100)
        assert static_at(tm, 80.0) == 0.3

    def test_extrapolation_warns(self):
        tm = ThermalStaticModel(0.0051, 0.0849, V, 20.0, 60.0)
        with pytest.warns(ExtrapolationWarning):
            static_at(tm, 90.0)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            static_at(tm, 40.0)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            static_at(LINE, -100.0)


U = UnifiedModel(COUNTERS, REFERENCE_MODEL, P380, 0.2022, Anchor.UAM)


def sample(point, temp, events=(0, 0, 0, 0)):
    t = make_table([("x", (point.frequency_hz, point.voltage_v), 1.0, 1e6, events, temp)],
                   counters=COUNTERS)
    return t.samples[0]


class TestPredictThermal:
    def test_at_tref_equals_unified(self):
        s = sample(P380, 23.0)
        assert predict_unified_thermal(U, LINE, s) == pytest.approx(predict_unified(U, s), abs=1e-12)

    def test_forty_degrees_hotter(self):
        cold = predict_unified_thermal(U, LINE, sample(P380, 23.0))
        hot = predict_unified_thermal(U, LINE, sample(P380, 63.0))
        assert hot - cold == pytest.approx(0.204, abs=1e-12)

    def test_idle_point_sensitivity_above_20pct(self):
        p = OperatingPoint(76_000_000, V)
        cold = predict_unified_thermal(U, LINE, sample(p, 23.0))
        hot = predict_unified_thermal(U, LINE, sample(p, 63.0))
        assert (hot - cold) / cold > 0.20

    def test_voltage_mismatch(self):
        tm = ThermalStaticModel(0.0051, 0.0849, 1.07, 0, 100)
        with pytest.raises(DataError):
            predict_unified_thermal(U, tm, sample(P380, 23.0))
        with pytest.raises(DataError):
            attach_thermal(U, tm)

    @given(st.sampled_from([76, 228, 380, 684, 998]), st.floats(0, 90), st.floats(0, 40),
           st.floats(0, 1e4))
    def test_delta_is_voltage_square_times_slope(self, mhz, t, dt, busy):
        volt = {76: 0.82, 228: 0.82, 380: 0.82, 684: 0.92, 998: 1.07}[mhz]
        p = OperatingPoint(mhz * 1_000_000, volt)
        ev = (0, 0, busy * 1e6, 0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ExtrapolationWarning)
            a = predict_unified_thermal(U, LINE, sample(p, t, ev))
            b = predict_unified_thermal(U, LINE, sample(p, t + dt, ev))
        _, ks = scale_factors(P380, p)
        assert b - a == pytest.approx(ks * 0.0051 * dt, abs=1e-12)
        assert b >= a

    def test_table_needs_thermal(self):
        t = make_table([("x", (380_000_000, V), 1.0, 1e6, (0, 0, 0, 0))], counters=COUNTERS)
        with pytest.raises(ValueError):
            predict_unified_thermal_table(U, t)
        got = predict_unified_thermal_table(attach_thermal(U, LINE), t)
        assert got[0] == pytest.approx(0.7720, abs=1e-12)


def test_ufm_round_trip_with_thermal():
    u = attach_thermal(UnifiedModel(COUNTERS, Coefficients(0.7, (1e-3, 2e-2, 3e-5, 4e-6)),
                                    P380, 0.2022, Anchor.UAM), LINE)
    back = parse_ufm(format_ufm(u))
    assert back == u and back.thermal == LINE
