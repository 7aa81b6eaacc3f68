import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_table
from powerscope.dataset import (
    BenchmarkSplit, DataError, DvfsTable, MeasurementTable, OperatingPoint, Sample,
    dvfs_from_table, load_dvfs, load_measurements, load_split, rate_vector, slice_table,
    write_dvfs, write_measurements, write_split,
)

P1 = (76_000_000, 0.82)
P2 = (380_000_000, 0.82)


def _sample(events, cycles):
    return Sample("b", OperatingPoint(*P1), 23.0, 1.0, cycles, tuple(events))


class TestOperatingPoint:
    def test_rejects_nonpositive(self):
        with pytest.raises(DataError):
            OperatingPoint(0, 0.82)
        with pytest.raises(DataError):
            OperatingPoint(76_000_000, 0.0)

    def test_exact_equality_is_the_key(self):
        assert OperatingPoint(76_000_000, 0.82) == OperatingPoint(76_000_000, 0.82)
        assert OperatingPoint(76_000_000, 0.82) != OperatingPoint(76_000_000, 0.8200001)
        assert len({OperatingPoint(*P1), OperatingPoint(*P1)}) == 1

    def test_str(self):
        assert str(OperatingPoint(*P1)) == "76 MHz / 0.82 V"


class TestDvfsTable:
    def test_order_rules(self):
        with pytest.raises(DataError):
            DvfsTable((OperatingPoint(*P2), OperatingPoint(*P1)))
        with pytest.raises(DataError):
            DvfsTable((OperatingPoint(1, 0.9), OperatingPoint(2, 0.8)))

    def test_constant_voltage_prefix(self):
        t = DvfsTable((OperatingPoint(1, 0.8), OperatingPoint(2, 0.8), OperatingPoint(3, 0.9)))
        assert [p.frequency_hz for p in t.constant_voltage_prefix()] == [1, 2]
        assert t.base_voltage == 0.8


class TestRateVector:
    def test_direct_division(self):
        assert rate_vector(_sample((10, 20), 10)).tolist() == [1.0, 2.0]

    def test_idle_window_gives_zeros(self):
        assert rate_vector(_sample((5, 5), 0)).tolist() == [0.0, 0.0]

    def test_no_activity(self):
        assert rate_vector(_sample((0, 0), 1e6)).tolist() == [0.0, 0.0]

    @given(st.lists(st.floats(0, 1e12), min_size=1, max_size=6),
           st.floats(1.0, 1e10), st.floats(1e-3, 1e3))
    def test_scale_consistent(self, events, cycles, k):
        a = rate_vector(_sample(events, cycles))
        b = rate_vector(_sample([e * k for e in events], cycles * k))
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=0)


class TestTableInvariants:
    def test_negative_values_rejected(self):
        with pytest.raises(DataError):
            make_table([("x", P1, -1.0, 10, (1, 1))])
        with pytest.raises(DataError):
            make_table([("x", P1, 1.0, -10, (1, 1))])
        with pytest.raises(DataError):
            make_table([("x", P1, 1.0, 10, (1, -1))])

    def test_catalog_alignment(self):
        with pytest.raises(DataError):
            make_table([("x", P1, 1.0, 10, (1,))])

    def test_unique_counter_names(self):
        with pytest.raises(DataError):
            make_table([], counters=("a", "a"))

    def test_rate_matrix_by_name(self):
        t = make_table([("x", P1, 1.0, 10, (1, 2)), ("y", P2, 2.0, 0, (3, 4))])
        assert t.rate_matrix(["b"]).tolist() == [[0.2], [0.0]]
        with pytest.raises(DataError):
            t.rate_matrix(["zz"])


def _quarters():
    rows = []
    for bench in ("u", "v"):
        for point in (P1, P2):
            for k in range(2):
                rows.append((bench, point, 1.0 + k, 100, (k, 1)))
    return make_table(rows)


class TestSlice:
    def test_absent_point_gives_empty(self):
        assert len(slice_table(_quarters(), OperatingPoint(1, 1.0))) == 0

    def test_identity(self):
        t = _quarters()
        assert slice_table(t, None, None) == t
        assert slice_table(t, benchmarks={"u", "v"}) == t

    def test_one_quarter(self):
        t = _quarters()
        q = slice_table(t, OperatingPoint(*P2), {"v"})
        # rows 7 and 8 of the hand-enumerated fixture
        assert q.samples == t.samples[6:8]

    def test_idempotent(self):
        t = _quarters()
        once = slice_table(t, OperatingPoint(*P1), {"u"})
        assert slice_table(once, OperatingPoint(*P1), {"u"}) == once


class TestSplit:
    def test_disjoint(self):
        with pytest.raises(DataError):
            BenchmarkSplit({"a"}, {"a", "b"})

    def test_nonempty_for_fit(self):
        with pytest.raises(DataError):
            BenchmarkSplit({"a"}, set()).require_nonempty()

    def test_file_round_trip(self, tmp_path):
        s = BenchmarkSplit({"backprop", "hotspot"}, {"matrixMul"})
        write_split(s, tmp_path / "b.txt")
        assert load_split(tmp_path / "b.txt") == s

    def test_comments_and_blank_lines(self, tmp_path):
        (tmp_path / "b.txt").write_text("# split\n[train]\na  # first\n\n[TEST]\nb\n")
        assert load_split(tmp_path / "b.txt") == BenchmarkSplit({"a"}, {"b"})

    def test_label_outside_section(self, tmp_path):
        (tmp_path / "b.txt").write_text("a\n[train]\n")
        with pytest.raises(DataError, match="line 1"):
            load_split(tmp_path / "b.txt")


HEADER = "benchmark,freq_hz,volt_v,temp_c,power_w,cycles,c1,c2\n"


class TestLoadMeasurements:
    def test_three_rows(self, tmp_path):
        f = tmp_path / "m.csv"
        f.write_text(HEADER + "a,76000000,0.82,23,0.5,100,1,2\n"
                              "a,76000000,0.82,23,0.6,100,3,4\n"
                              "b,380000000,0.82,23,0.9,500,5,6\n")
        t = load_measurements(f, power_column=5)
        assert len(t) == 3
        assert t.counter_names == ("c1", "c2")
        assert t.samples[2].point == OperatingPoint(*P2)

    def test_negative_power_names_row(self, tmp_path):
        f = tmp_path / "m.csv"
        f.write_text(HEADER + "a,76000000,0.82,23,0.5,100,1,2\n"
                              "a,76000000,0.82,23,-0.6,100,3,4\n")
        with pytest.raises(DataError, match="row 3"):
            load_measurements(f)

    def test_ragged_row(self, tmp_path):
        f = tmp_path / "m.csv"
        f.write_text(HEADER + "a,76000000,0.82,23,0.5,100,1\n")
        with pytest.raises(DataError, match="row 2"):
            load_measurements(f)

    def test_bad_number(self, tmp_path):
        f = tmp_path / "m.csv"
        f.write_text(HEADER + "a,76000000,0.82,23,watts,100,1,2\n")
        with pytest.raises(DataError, match="row 2"):
            load_measurements(f)

    def test_counter_subset_and_remapped_power(self, tmp_path):
        f = tmp_path / "m.csv"
        f.write_text("benchmark,freq_hz,volt_v,temp_c,power_w,cycles,c1,c2,alt_w\n"
                     "a,76000000,0.82,23,0.5,100,1,2,0.7\n")
        t = load_measurements(f, power_column=9, counter_columns=[8])
        assert t.counter_names == ("c2",)
        assert t.samples[0].power_w == 0.7

    def test_twelve_thousand_rows(self, tmp_path):
        f = tmp_path / "m.csv"
        body = "".join(f"b{i % 7},76000000,0.82,23,{0.5 + i * 1e-5},100,{i},1\n"
                       for i in range(12_000))
        f.write_text(HEADER + body)
        t = load_measurements(f)
        assert len(t) == 12_000
        assert t.samples[-1].events == (11_999.0, 1.0)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_measurements(tmp_path / "nope.csv")


finite = st.floats(0, 1e9, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["a", "b c", "d-1"]),
                          st.sampled_from([P1, P2]),
                          finite, finite, st.tuples(finite, finite),
                          st.floats(-40, 120)), min_size=1, max_size=20))
def test_csv_round_trip(tmp_path_factory, rows):
    t = make_table(rows)
    path = tmp_path_factory.mktemp("rt") / "m.csv"
    write_measurements(t, path)
    back = load_measurements(path)
    assert back == t
    for x, y in zip(back.samples, t.samples):
        assert (x.power_w, x.cycles, x.events, x.temperature_c) == \
               (y.power_w, y.cycles, y.events, y.temperature_c)


def test_dvfs_round_trip(tmp_path):
    d = DvfsTable((OperatingPoint(*P1), OperatingPoint(*P2), OperatingPoint(998_000_000, 1.07)))
    write_dvfs(d, tmp_path / "d.csv")
    assert load_dvfs(tmp_path / "d.csv") == d


def test_dvfs_from_table():
    t = make_table([("a", P2, 1.0, 1, (0, 0)), ("a", P1, 1.0, 1, (0, 0))])
    assert dvfs_from_table(t).points == (OperatingPoint(*P1), OperatingPoint(*P2))


def test_table_rejects_mismatched_catalog_sample():
    s = Sample("a", OperatingPoint(*P1), 23.0, 1.0, 1.0, (1.0, 2.0, 3.0))
    with pytest.raises(DataError):
        MeasurementTable(("a", "b"), (s,))
