"""Ordinary least squares on cycle-normalized rates, and error metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import qr, solve_triangular

from .dataset import OperatingPoint

# |R_kk| / |R_00| below this (on column-equilibrated data) counts as rank loss
PIVOT_TOL = 1e-10
# measured powers at or below this are left out of percentage errors
MIN_MEASURED_W = 1e-6


class FitError(ArithmeticError):
    """A regression could not be carried out."""


class RankDeficientError(FitError):
    def __init__(self, columns: Sequence[str]):
        self.columns = tuple(columns)
        super().__init__(f"rank-deficient design; collinear columns: {', '.join(self.columns)}")


@dataclass(frozen=True)
class Coefficients:
    intercept_w: float
    slopes_w: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "intercept_w", float(self.intercept_w))
        object.__setattr__(self, "slopes_w", tuple(float(s) for s in self.slopes_w))

    @property
    def n_params(self) -> int:
        return 1 + len(self.slopes_w)


def ols_fit(rates, power, names: Sequence[str] | None = None) -> Coefficients:
    """Least-squares fit of ``power ~ intercept + slopes . rates``.

    ``rates`` is an (n, k) array (k may be 0). Solved with column-pivoted
    QR of the equilibrated design matrix; rank loss raises
    :class:`RankDeficientError` naming the dropped columns.
    """
    y = np.asarray(power, dtype=float)
    n = y.shape[0]
    X = np.asarray(rates, dtype=float)
    if X.ndim != 2:
        X = X.reshape(n, -1)
    if X.shape[0] != n:
        raise ValueError(f"{X.shape[0]} rate rows for {n} power values")
    k = X.shape[1]
    if names is None:
        names = [f"x{i}" for i in range(k)]
    names = ["intercept", *names]
    if n < k + 1:
        raise FitError(f"need at least {k + 1} rows for {k} counters, got {n}")

    A = np.hstack([np.ones((n, 1)), X])
    norms = np.linalg.norm(A, axis=0)
    zero = [names[j] for j in range(k + 1) if norms[j] == 0]
    if zero:
        raise RankDeficientError(zero)
    A = A / norms
    Q, R, piv = qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > PIVOT_TOL * diag[0]))
    if rank < k + 1:
        raise RankDeficientError([names[j] for j in sorted(piv[rank:])])
    z = solve_triangular(R, Q.T @ y)
    beta = np.empty(k + 1)
    beta[piv] = z
    beta /= norms
    return Coefficients(beta[0], tuple(beta[1:]))


def predict(c: Coefficients, rates) -> float:
    r = np.asarray(rates, dtype=float)
    if r.shape != (len(c.slopes_w),):
        raise ValueError(f"expected {len(c.slopes_w)} rates, got shape {r.shape}")
    return c.intercept_w + float(np.dot(c.slopes_w, r)) if len(r) else c.intercept_w


def predict_many(c: Coefficients, rates) -> np.ndarray:
    """Vectorized :func:`predict` over an (n, k) rate array."""
    R = np.asarray(rates, dtype=float)
    if R.ndim != 2 or R.shape[1] != len(c.slopes_w):
        raise ValueError(f"expected (n, {len(c.slopes_w)}) rates, got shape {R.shape}")
    if not c.slopes_w:
        return np.full(R.shape[0], c.intercept_w)
    return c.intercept_w + R @ np.asarray(c.slopes_w)


def ape(predicted, measured) -> tuple[np.ndarray, np.ndarray]:
    """Absolute percentage errors and the mask of measured values they cover."""
    p = np.asarray(predicted, dtype=float)
    m = np.asarray(measured, dtype=float)
    if p.shape != m.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {m.shape}")
    keep = m > MIN_MEASURED_W
    return np.abs(p[keep] - m[keep]) / m[keep] * 100.0, keep


def mape(predicted, measured) -> float:
    """Mean absolute percentage error (%), ignoring near-zero measurements."""
    errors, _ = ape(predicted, measured)
    if errors.size == 0:
        raise ValueError("no measured values above the MAPE floor")
    return float(errors.mean())


@dataclass(frozen=True)
class PointError:
    mape_pct: float
    n: int
    excluded: int = 0


@dataclass(frozen=True)
class FitReport:
    per_point: Mapping[OperatingPoint, PointError]
    overall_pct: float
    excluded: int = 0
    skipped: int = 0   # samples at points the model does not cover
    label: str = field(default="", compare=False)

    @property
    def n(self) -> int:
        return sum(e.n for e in self.per_point.values())

    @property
    def mean_point_pct(self) -> float:
        """Unweighted mean of per-point errors (the search criterion)."""
        return float(np.mean([e.mape_pct for e in self.per_point.values()]))


def fit_report(points: Sequence[OperatingPoint], predicted, measured,
               skipped: int = 0) -> FitReport:
    """Group samples by operating point and summarize MAPE per point and overall."""
    p = np.asarray(predicted, dtype=float)
    m = np.asarray(measured, dtype=float)
    if not (len(points) == len(p) == len(m)):
        raise ValueError("points, predicted and measured must align")
    groups: dict[OperatingPoint, list[int]] = {}
    for i, pt in enumerate(points):
        groups.setdefault(pt, []).append(i)
    per_point = {}
    count = 0
    excluded = 0
    for pt in sorted(groups):
        idx = groups[pt]
        errors, keep = ape(p[idx], m[idx])
        dropped = int(len(idx) - keep.sum())
        excluded += dropped
        if errors.size == 0:
            continue
        per_point[pt] = PointError(float(errors.mean()), int(errors.size), dropped)
        count += errors.size
    if count == 0:
        raise ValueError("empty evaluation set")
    # weighted mean of per-point errors by sample count == mean over all samples
    overall = sum(e.mape_pct * e.n for e in per_point.values()) / count
    return FitReport(per_point, float(overall), excluded, skipped)
