"""Bounded-size counter subset search over per-frequency models."""

from __future__ import annotations

import itertools
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .dataset import BenchmarkSplit, DataError, DvfsTable, MeasurementTable, slice_table
from .perfreq import PerFreqModel, evaluate, fit_per_freq
from .regress import FitError, FitReport, mape, ols_fit, predict_many

log = logging.getLogger(__name__)

# criterion differences at or below this (percentage points) are ties
IMPROVEMENT_TOL = 1e-9


class SearchMode(str, Enum):
    BOTTOM_UP = "bottom_up"
    EXHAUSTIVE = "exhaustive"
    FIXED = "fixed"


class Criterion(str, Enum):
    AVG_MAPE = "avg_mape"


@dataclass(frozen=True)
class SearchConfig:
    max_counters: int = 4
    candidate_counters: tuple[str, ...] = ()
    mode: SearchMode = SearchMode.BOTTOM_UP
    criterion: Criterion = Criterion.AVG_MAPE
    fixed_counters: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "candidate_counters", tuple(self.candidate_counters))
        object.__setattr__(self, "fixed_counters", tuple(self.fixed_counters))
        object.__setattr__(self, "mode", SearchMode(self.mode))
        object.__setattr__(self, "criterion", Criterion(self.criterion))
        if self.max_counters < 1:
            raise ValueError("max_counters must be >= 1")
        if self.mode is SearchMode.FIXED and not self.fixed_counters:
            raise ValueError("fixed mode requires an explicit counter list")


@dataclass(frozen=True)
class SearchResult:
    chosen_counters: tuple[str, ...]
    per_step_scores: tuple[tuple[str, float], ...]
    final_report: FitReport
    model: PerFreqModel
    baseline_score: float | None = None
    skipped_counters: tuple[str, ...] = field(default=())

    @property
    def final_score(self) -> float:
        return self.final_report.mean_point_pct


def worker_count(n_tasks: int) -> int:
    """Threads for per-point work: POWERSCOPE_THREADS caps it, 0 means auto."""
    try:
        cap = int(os.environ.get("POWERSCOPE_THREADS", "0"))
    except ValueError:
        cap = 0
    if cap <= 0:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_tasks))


class _TrainingSet:
    """Per-point training arrays, built once per search."""

    def __init__(self, table, split, dvfs, candidates):
        train = slice_table(table, benchmarks=split.train)
        self.points = tuple(dvfs)
        self.candidates = tuple(candidates)
        self.rates = []
        self.power = []
        for point in self.points:
            rows = slice_table(train, point)
            self.rates.append(rows.rate_matrix(self.candidates))
            self.power.append(rows.power_array())
        self._pool = None
        n = worker_count(len(self.points))
        if n > 1:
            self._pool = ThreadPoolExecutor(max_workers=n)

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()

    def constant_everywhere(self, j: int) -> bool:
        return all(r.shape[0] == 0 or np.ptp(r[:, j]) == 0 for r in self.rates)

    def _point_score(self, i: int, cols: list[int]) -> float:
        X = self.rates[i][:, cols]
        y = self.power[i]
        c = ols_fit(X, y, names=[self.candidates[j] for j in cols])
        return mape(predict_many(c, X), y)

    def score(self, subset: Sequence[str]) -> float:
        """Average training MAPE over operating points (unweighted)."""
        cols = [self.candidates.index(c) for c in subset]
        jobs = range(len(self.points))
        if self._pool is None:
            scores = [self._point_score(i, cols) for i in jobs]
        else:
            # map() yields in submission order, so the reduction stays in DVFS order
            scores = list(self._pool.map(lambda i: self._point_score(i, cols), jobs))
        return float(np.mean(scores))

    def try_score(self, subset) -> float:
        try:
            return self.score(subset)
        except FitError as exc:
            log.info("subset %s infeasible: %s", list(subset), exc)
            return float("inf")


def _check_support(table, split, dvfs, k):
    train = slice_table(table, benchmarks=split.train)
    for point in dvfs:
        n = len(slice_table(train, point))
        if n < k + 2:
            raise DataError(f"{point}: {n} training samples, need at least {k + 2}")


def search(table: MeasurementTable, split: BenchmarkSplit, dvfs: DvfsTable,
           cfg: SearchConfig) -> SearchResult:
    """Choose counters, fit per-frequency models and report training error.

    bottom_up is greedy forward selection on average training MAPE;
    exhaustive scores every subset of size <= max_counters; fixed fits the
    given counters directly.
    """
    if cfg.mode is SearchMode.FIXED:
        chosen = cfg.fixed_counters
        table.counter_indices(chosen)
        _check_support(table, split, dvfs, len(chosen))
        return _finish(table, split, dvfs, chosen, (), None, ())

    candidates = cfg.candidate_counters or table.counter_names
    table.counter_indices(candidates)
    if not candidates:
        raise DataError("empty candidate counter set")
    _check_support(table, split, dvfs, min(cfg.max_counters, len(candidates)))

    data = _TrainingSet(table, split, dvfs, candidates)
    try:
        skipped = tuple(c for j, c in enumerate(candidates) if data.constant_everywhere(j))
        for c in skipped:
            log.warning("counter %s is constant over the training set; skipped", c)
        usable = [c for c in candidates if c not in skipped]
        if not usable:
            raise DataError("no usable candidate counters")
        baseline = data.score(())
        if cfg.mode is SearchMode.BOTTOM_UP:
            chosen, steps = _bottom_up(data, usable, cfg.max_counters, baseline)
        else:
            chosen, steps = _exhaustive(data, usable, cfg.max_counters, baseline)
    finally:
        data.close()
    return _finish(table, split, dvfs, chosen, steps, baseline, skipped)


def _bottom_up(data, usable, max_counters, baseline):
    chosen: list[str] = []
    steps = []
    current = baseline
    while len(chosen) < max_counters:
        best, best_score = None, float("inf")
        for c in usable:
            if c in chosen:
                continue
            score = data.try_score([*chosen, c])
            if score < best_score - IMPROVEMENT_TOL:
                best, best_score = c, score
        if best is None or not best_score < current - IMPROVEMENT_TOL:
            break
        chosen.append(best)
        steps.append((best, best_score))
        current = best_score
        log.info("step %d: +%s -> %.6g%%", len(chosen), best, best_score)
    return tuple(chosen), tuple(steps)


def _exhaustive(data, usable, max_counters, baseline):
    best, best_score = (), baseline
    for size in range(1, min(max_counters, len(usable)) + 1):
        for subset in itertools.combinations(usable, size):
            score = data.try_score(subset)
            if score < best_score - IMPROVEMENT_TOL:
                best, best_score = subset, score
    # report the winner as a sequence of prefix scores
    steps = tuple((c, data.try_score(best[:i + 1])) for i, c in enumerate(best))
    return best, steps


def _finish(table, split, dvfs, chosen, steps, baseline, skipped):
    model = fit_per_freq(table, split, dvfs, chosen)
    report = evaluate(model, table, split.train)
    return SearchResult(tuple(chosen), tuple(steps), report, model, baseline, skipped)


def compare_models(table: MeasurementTable, split: BenchmarkSplit, dvfs: DvfsTable,
                   variants: Sequence[Sequence[str]]) -> list[FitReport]:
    """Fit each counter set on training benchmarks and report test-benchmark error."""
    return [evaluate(fit_per_freq(table, split, dvfs, v), table, split.test)
            for v in variants]
