"""Synthetic ground truth: measurement tables, idle sweeps and thermal runs.

Power is produced by the forward unified law from a known reference model,
so every fitting step downstream has an exact answer to recover:

    P = (P_ref(rates) - S(T_ref)) * (f/f_r) * (V/V_r)^2 + S(T) * (V/V_r)^e

with S a constant or a linear function of temperature. Rates for a given
benchmark sample are drawn once and replayed at every operating point, the
same workload phase seen at each frequency. Randomness comes from numpy's
PCG64 bit generator seeded through SeedSequence, one child stream per
purpose.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import (DEFAULT_COUNTERS, BenchmarkSplit, DataError, DvfsTable,
                      MeasurementTable, OperatingPoint, Sample)
from .regress import Coefficients
from .thermal import ThermalRun
from .unified import IdleReading, IdleSweep, scale_factors

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

# reference model at 380 MHz / 0.82 V
REFERENCE_POINT = OperatingPoint(380_000_000, 0.82)
REFERENCE_MODEL = Coefficients(0.7720, (0.0025, 0.0908, -0.000017, 0.000019))
STATIC_W = 0.21
THERMAL_SLOPE_W_PER_C = 0.0051
THERMAL_INTERCEPT_W = 0.0849

# typical upper rate per counter; terms then span roughly 0.3-1 W at the reference
RATE_SCALE = {
    "inst_executed_cs": 400.0,
    "executed_global_stores": 8.0,
    "gpu_busy": 20000.0,
    "active_warps": 40000.0,
}

TRAIN_BENCHMARKS = (
    "stream_cluster", "srad_v1", "particle_filter", "srad_v2", "mmumergpu",
    "pathfinder", "leukocyte", "myocite", "lavaMD", "kmeans", "backprop", "bfs",
    "b+tree", "cfd", "heartwall", "hotspot3d", "hotspot", "hybridsort",
)
TEST_BENCHMARKS = (
    "binomialOptions", "Montecarlo", "blackscholes", "particles", "SobolQRNG",
    "Radixsort", "Transpose", "FDTD3d", "Texture3D", "nbody",
)


def tx1_like_dvfs() -> DvfsTable:
    """13-point table: five points share 0.82 V, then voltage climbs to 1.07 V."""
    mhz = (76, 152, 228, 304, 380, 456, 532, 608, 684, 760, 836, 912, 998)
    volts = (0.82, 0.82, 0.82, 0.82, 0.82, 0.84, 0.86, 0.89, 0.92, 0.95, 0.99, 1.03, 1.07)
    return DvfsTable(tuple(OperatingPoint(f * 1_000_000, v) for f, v in zip(mhz, volts)))


@dataclass(frozen=True)
class BenchmarkProfile:
    name: str
    envelopes: tuple[tuple[float, float], ...]   # (min, max) rate per counter
    role: str = "train"

    def __post_init__(self):
        object.__setattr__(self, "envelopes", tuple((float(a), float(b)) for a, b in self.envelopes))
        if self.role not in ("train", "test"):
            raise ValueError(f"{self.name}: role must be train or test")
        for lo, hi in self.envelopes:
            if not 0 <= lo <= hi:
                raise ValueError(f"{self.name}: bad rate envelope ({lo}, {hi})")


@dataclass(frozen=True)
class StaticLaw:
    """Constant static power, or a temperature line when ``slope_w_per_c`` is set."""

    static_w: float = STATIC_W
    slope_w_per_c: float | None = None
    intercept_w: float | None = None
    exponent: float = 2.0

    @classmethod
    def thermal_line(cls, slope=THERMAL_SLOPE_W_PER_C, intercept=THERMAL_INTERCEPT_W,
                     exponent=2.0) -> "StaticLaw":
        return cls(STATIC_W, slope, intercept, exponent)

    def at(self, temperature_c):
        if self.slope_w_per_c is None:
            return self.static_w + 0.0 * np.asarray(temperature_c, dtype=float)
        return self.slope_w_per_c * np.asarray(temperature_c, dtype=float) + self.intercept_w


@dataclass(frozen=True)
class GeneratorSpec:
    counters: tuple[str, ...] = DEFAULT_COUNTERS
    reference: Coefficients = REFERENCE_MODEL
    ref_point: OperatingPoint = REFERENCE_POINT
    dvfs: DvfsTable = field(default_factory=tx1_like_dvfs)
    static: StaticLaw = StaticLaw()
    benchmarks: tuple[BenchmarkProfile, ...] = ()
    samples_per_cell: int = 10
    noise_sd_w: float = 0.0
    noise_rel: float = 0.0          # multiplicative: P * (1 + noise_rel * z)
    seed: int = 0
    temperature_c: float = 23.0     # temperature of the measurement run
    t_ref_c: float = 23.0           # temperature the reference model holds for
    window_s: float = 0.5
    idle_repeats: int = 1
    idle_noise_sd_w: float = 0.0
    thermal_base_temps_c: tuple[float, ...] = ()
    thermal_heating_c_per_hz: float = 1e-8
    thermal_noise_sd_w: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "counters", tuple(self.counters))
        object.__setattr__(self, "benchmarks", tuple(self.benchmarks))
        object.__setattr__(self, "thermal_base_temps_c", tuple(self.thermal_base_temps_c))
        if len(self.reference.slopes_w) != len(self.counters):
            raise ValueError("reference slopes do not match the counter list")
        for b in self.benchmarks:
            if len(b.envelopes) != len(self.counters):
                raise ValueError(f"{b.name}: {len(b.envelopes)} envelopes for "
                                 f"{len(self.counters)} counters")
        if self.noise_sd_w < 0 or self.noise_rel < 0 or self.idle_noise_sd_w < 0:
            raise ValueError("noise levels must be non-negative")
        if self.samples_per_cell < 1:
            raise ValueError("samples_per_cell must be >= 1")

    @property
    def split(self) -> BenchmarkSplit:
        return BenchmarkSplit(frozenset(b.name for b in self.benchmarks if b.role == "train"),
                              frozenset(b.name for b in self.benchmarks if b.role == "test"))


def default_benchmarks(counters: Sequence[str] = DEFAULT_COUNTERS,
                       scales: Sequence[float] | None = None,
                       seed: int = 0) -> tuple[BenchmarkProfile, ...]:
    """Train/test profiles with randomly placed rate envelopes inside [0, scale]."""
    if scales is None:
        scales = [RATE_SCALE.get(c, 1.0) for c in counters]
    rng = np.random.Generator(np.random.PCG64(seed))
    out = []
    for role, names in (("train", TRAIN_BENCHMARKS), ("test", TEST_BENCHMARKS)):
        for name in names:
            envs = []
            for scale in scales:
                centre = rng.uniform(0.1, 0.9) * scale
                half = rng.uniform(0.1, 0.4) * scale
                envs.append((max(0.0, centre - half), min(scale, centre + half)))
            out.append(BenchmarkProfile(name, tuple(envs), role))
    return tuple(out)


def default_spec(**overrides) -> GeneratorSpec:
    spec = GeneratorSpec(benchmarks=default_benchmarks())
    return replace(spec, **overrides) if overrides else spec


# --- forward model ------------------------------------------------------------

def forward_power(spec: GeneratorSpec, point: OperatingPoint, rates, temperature_c):
    """Noise-free power for an (n, k) rate array (or one rate vector)."""
    rates = np.asarray(rates, dtype=float)
    p_ref = spec.reference.intercept_w + rates @ np.asarray(spec.reference.slopes_w)
    kd, ks = scale_factors(spec.ref_point, point, spec.static.exponent)
    s_ref = spec.static.at(spec.t_ref_c)
    s_t = spec.static.at(temperature_c)
    return p_ref * kd + s_ref * (ks - kd) + (s_t - s_ref) * ks


def true_coefficients(spec: GeneratorSpec, point: OperatingPoint,
                      temperature_c: float | None = None) -> Coefficients:
    """Per-point affine model implied by the generator at one temperature."""
    t = spec.temperature_c if temperature_c is None else temperature_c
    kd, ks = scale_factors(spec.ref_point, point, spec.static.exponent)
    s_ref = float(spec.static.at(spec.t_ref_c))
    s_t = float(spec.static.at(t))
    intercept = spec.reference.intercept_w * kd + s_ref * (ks - kd) + (s_t - s_ref) * ks
    return Coefficients(intercept, tuple(a * kd for a in spec.reference.slopes_w))


def clock_constant(spec: GeneratorSpec) -> float:
    """alpha*C implied by the generator's idle power at the reference point."""
    s_ref = float(spec.static.at(spec.t_ref_c))
    ref = spec.ref_point
    return (spec.reference.intercept_w - s_ref) / (ref.voltage_v ** 2 * ref.frequency_hz)


# --- generation -----------------------------------------------------------------

@dataclass(frozen=True)
class SynthOutput:
    table: MeasurementTable
    split: BenchmarkSplit
    dvfs: DvfsTable
    sweep: IdleSweep
    runs: tuple[ThermalRun, ...]


def _streams(seed: int):
    children = np.random.SeedSequence(seed).spawn(4)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def draw_rates(spec: GeneratorSpec, rng) -> dict[str, np.ndarray]:
    out = {}
    for b in spec.benchmarks:
        lo = np.array([e[0] for e in b.envelopes])
        hi = np.array([e[1] for e in b.envelopes])
        out[b.name] = lo + (hi - lo) * rng.random((spec.samples_per_cell, len(lo)))
    return out


def _noisy(spec, clean, rng):
    z = rng.standard_normal((2, clean.shape[0]))
    p = clean * (1.0 + spec.noise_rel * z[0]) + spec.noise_sd_w * z[1]
    return np.maximum(p, 0.0)


def generate(spec: GeneratorSpec) -> SynthOutput:
    if not spec.benchmarks:
        raise DataError("generator needs at least one benchmark")
    rate_rng, noise_rng, idle_rng, thermal_rng = _streams(spec.seed)
    rates = draw_rates(spec, rate_rng)

    samples = []
    for point in spec.dvfs:
        cycles = float(point.frequency_hz * spec.window_s)
        for b in spec.benchmarks:
            r = rates[b.name]
            power = _noisy(spec, forward_power(spec, point, r, spec.temperature_c), noise_rng)
            events = r * cycles
            for i in range(r.shape[0]):
                samples.append(Sample(b.name, point, spec.temperature_c, float(power[i]),
                                      cycles, tuple(float(e) for e in events[i])))
    table = MeasurementTable(spec.counters, tuple(samples))

    zero = np.zeros((1, len(spec.counters)))
    readings = []
    for point in spec.dvfs:
        idle = float(forward_power(spec, point, zero, spec.temperature_c)[0])
        noise = spec.idle_noise_sd_w * idle_rng.standard_normal(spec.idle_repeats)
        readings += [IdleReading(point, idle + e, spec.temperature_c) for e in noise]
    sweep = IdleSweep(tuple(readings))

    runs = []
    prefix = spec.dvfs.constant_voltage_prefix()
    for t0 in spec.thermal_base_temps_c:
        rows = []
        for point in prefix:
            t = t0 + spec.thermal_heating_c_per_hz * point.frequency_hz
            idle = float(forward_power(spec, point, zero, t)[0])
            idle += spec.thermal_noise_sd_w * thermal_rng.standard_normal()
            rows.append((point.frequency_hz, idle, t))
        runs.append(ThermalRun(tuple(rows), prefix[0].voltage_v))
    return SynthOutput(table, spec.split, spec.dvfs, sweep, tuple(runs))


# --- spec files (TOML) -------------------------------------------------------------

def load_spec(path: str | Path, seed: int | None = None) -> GeneratorSpec:
    """Read a generator spec; omitted keys fall back to :func:`default_spec`."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    try:
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise DataError(f"{path}: {exc}") from None
    try:
        return spec_from_dict(doc, seed)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from None


def spec_from_dict(doc: dict, seed: int | None = None) -> GeneratorSpec:
    kw = {}
    scalars = ("samples_per_cell", "noise_sd_w", "noise_rel", "seed", "temperature_c",
               "t_ref_c", "window_s", "idle_repeats", "idle_noise_sd_w",
               "thermal_heating_c_per_hz", "thermal_noise_sd_w")
    for key in scalars:
        if key in doc:
            kw[key] = doc[key]
    if "thermal_base_temps_c" in doc:
        kw["thermal_base_temps_c"] = tuple(float(t) for t in doc["thermal_base_temps_c"])
    counters = DEFAULT_COUNTERS
    if "reference" in doc:
        ref = doc["reference"]
        counters = tuple(ref.get("counters", DEFAULT_COUNTERS))
        kw["counters"] = counters
        kw["reference"] = Coefficients(ref.get("intercept_w", REFERENCE_MODEL.intercept_w),
                                       tuple(ref.get("slopes_w", REFERENCE_MODEL.slopes_w)))
        kw["ref_point"] = OperatingPoint(int(ref.get("freq_hz", REFERENCE_POINT.frequency_hz)),
                                         float(ref.get("volt_v", REFERENCE_POINT.voltage_v)))
    if "static" in doc:
        st = doc["static"]
        kw["static"] = StaticLaw(st.get("static_w", STATIC_W), st.get("slope_w_per_c"),
                                 st.get("intercept_w"), st.get("exponent", 2.0))
    if "dvfs" in doc:
        kw["dvfs"] = DvfsTable(tuple(OperatingPoint(int(f), float(v))
                                     for f, v in doc["dvfs"]["points"]))
    if "benchmarks" in doc:
        kw["benchmarks"] = tuple(
            BenchmarkProfile(name, tuple(tuple(e) for e in b["envelopes"]), b.get("role", "train"))
            for name, b in doc["benchmarks"].items())
    else:
        kw["benchmarks"] = default_benchmarks(counters)
    if seed is not None:
        kw["seed"] = seed
    return GeneratorSpec(**kw)
