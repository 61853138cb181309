"""Threshold-sweep analysis of |score| vs performance, and logistic
regression of per-item correctness on |score| with Wald significance tests.

Sweeping discards items with |score| below each threshold and reports the
quality of what remains; the regression quantifies, in continuous form, how
accuracy grows with distance from the decision boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import metrics
from .errors import DataError


@dataclass(frozen=True)
class ScoredItem:
    score: float
    gold: int  # +1 / -1
    predicted: int  # sign of score, 0 -> +1

    def __post_init__(self) -> None:
        if self.gold not in (1, -1):
            raise DataError(f"gold label must be +1/-1, got {self.gold}")
        expected = 1 if self.score >= 0 else -1
        if self.predicted != expected:
            raise DataError(f"predicted label {self.predicted} inconsistent with score {self.score}")

    @staticmethod
    def from_score(score: float, gold: int) -> "ScoredItem":
        return ScoredItem(score=score, gold=gold, predicted=1 if score >= 0 else -1)


@dataclass(frozen=True)
class SweepRow:
    threshold: float
    retained_count: int
    precision: float | None
    recall: float | None
    f1: float | None
    accuracy: float | None
    # recall against ALL gold positives, counting discarded ones as misses
    global_recall: float | None

    @property
    def defined(self) -> bool:
        return self.retained_count > 0


def default_grid() -> tuple[float, ...]:
    """Dense steps of 0.1 up to 1.0 where most scores live, sparse beyond."""
    return tuple(round(0.1 * i, 1) for i in range(11)) + (1.25, 1.5, 2.0)


def sweep_thresholds(items: Sequence[ScoredItem], grid: Sequence[float]) -> list[SweepRow]:
    """One row per threshold T with metrics over the retained set
    {items : |score| >= T}.

    Retained-set metrics (including recall) describe the quality of what
    survives the cut; ``global_recall`` additionally charges discarded gold
    positives as misses. A threshold retaining nothing yields a row with
    undefined (None) metrics.
    """
    if any(t < 0 for t in grid):
        raise DataError("thresholds must be >= 0")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise DataError("threshold grid must be sorted ascending")
    total_gold_pos = sum(1 for it in items if it.gold == 1)
    rows = []
    for threshold in grid:
        retained = [it for it in items if abs(it.score) >= threshold]
        if not retained:
            rows.append(SweepRow(threshold, 0, None, None, None, None, None))
            continue
        counts = metrics.ConfusionCounts.from_pairs([(it.gold, it.predicted) for it in retained])
        result = metrics.prf(counts)
        global_recall = counts.tp / total_gold_pos if total_gold_pos else 0.0
        rows.append(
            SweepRow(
                threshold=threshold,
                retained_count=len(retained),
                precision=result.precision,
                recall=result.recall,
                f1=result.f1,
                accuracy=result.accuracy,
                global_recall=global_recall,
            )
        )
    return rows


def format_sweep_lines(rows: Sequence[SweepRow]) -> list[str]:
    """`threshold TAB retained TAB precision TAB recall TAB f1 TAB accuracy
    TAB global_recall`; undefined metrics print as NA."""

    def fmt(value: float | None) -> str:
        return "NA" if value is None else f"{value:.6f}"

    return [
        f"{row.threshold:g}\t{row.retained_count}\t{fmt(row.precision)}\t{fmt(row.recall)}"
        f"\t{fmt(row.f1)}\t{fmt(row.accuracy)}\t{fmt(row.global_recall)}"
        for row in rows
    ]


def normal_cdf(x: float) -> float:
    """Standard normal CDF via the complementary error function,
    Phi(x) = erfc(-x / sqrt(2)) / 2; absolute error below 1e-12."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def wald_test(estimate: float, se: float) -> tuple[float, float]:
    """z = estimate / se and the two-sided normal p-value."""
    if se <= 0:
        raise DataError(f"standard error must be > 0, got {se}")
    z = estimate / se
    p = math.erfc(abs(z) / math.sqrt(2.0))  # == 2 * (1 - Phi(|z|))
    return z, p


@dataclass(frozen=True)
class LogisticFit:
    intercept: float
    slope: float
    se_intercept: float
    se_slope: float
    converged: bool
    iterations: int
    separated: bool = False
    ridged: bool = False
    message: str = ""


def _separated(xs: np.ndarray, ys: np.ndarray) -> str | None:
    """Complete/quasi-complete separation check for a single covariate."""
    if ys.min() == ys.max():
        return "constant outcomes"
    x0, x1 = xs[ys == 0], xs[ys == 1]
    if x0.max() < x1.min() or x1.max() < x0.min():
        return "complete separation"
    if x0.max() == x1.min() or x1.max() == x0.min():
        # the classes only share a boundary point: likelihood still diverges
        return "quasi-complete separation"
    return None


def fit_logistic(
    xs: Sequence[float],
    ys: Sequence[int],
    max_iterations: int = 100,
    tol: float = 1e-10,
) -> LogisticFit:
    """Maximum-likelihood fit of P(y=1) = sigmoid(a + b*x) by iteratively
    reweighted least squares.

    Standard errors come from the inverse observed information at the
    optimum. Separation (where the MLE diverges) is detected up front and
    reported instead of a bogus fit; a numerically singular information
    matrix gets a tiny ridge boost, flagged in the result.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError("xs and ys must be equal-length 1-D sequences")
    if len(x) < 2:
        raise DataError("need at least 2 observations")
    if set(np.unique(y)) - {0.0, 1.0}:
        raise DataError("ys must be 0/1 correctness indicators")

    reason = _separated(x, y)
    if reason is not None:
        nan = float("nan")
        return LogisticFit(nan, nan, nan, nan, converged=False, iterations=0,
                           separated=True, message=reason)

    design = np.column_stack([np.ones_like(x), x])
    beta = np.zeros(2)
    ridged = False
    deviance = math.inf
    for iteration in range(1, max_iterations + 1):
        eta = design @ beta
        p = 1.0 / (1.0 + np.exp(-eta))
        w = p * (1.0 - p)
        info = design.T @ (design * w[:, None])
        grad = design.T @ (y - p)
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            info = info + 1e-10 * np.eye(2)
            step = np.linalg.solve(info, grad)
            ridged = True
        beta = beta + step
        if not np.isfinite(beta).all() or np.abs(beta).max() > 1e8:
            nan = float("nan")
            return LogisticFit(nan, nan, nan, nan, converged=False,
                               iterations=iteration, separated=True,
                               message="diverging estimates")
        eta = design @ beta
        new_deviance = float(2.0 * np.sum(np.log1p(np.exp(-np.where(y == 1, eta, -eta)))))
        if abs(deviance - new_deviance) < tol and np.abs(step).max() < 1e-8:
            deviance = new_deviance
            break
        deviance = new_deviance
    else:
        iteration = max_iterations
        return LogisticFit(float(beta[0]), float(beta[1]), float("nan"), float("nan"),
                           converged=False, iterations=iteration, ridged=ridged,
                           message="iteration cap reached")

    p = 1.0 / (1.0 + np.exp(-(design @ beta)))
    w = p * (1.0 - p)
    info = design.T @ (design * w[:, None])
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        cov = np.linalg.inv(info + 1e-10 * np.eye(2))
        ridged = True
    return LogisticFit(
        intercept=float(beta[0]),
        slope=float(beta[1]),
        se_intercept=float(math.sqrt(cov[0, 0])),
        se_slope=float(math.sqrt(cov[1, 1])),
        converged=True,
        iterations=iteration,
        ridged=ridged,
    )


def format_regression_report(fits: dict[str, LogisticFit]) -> str:
    """Coefficient table (estimate, SE, z, p) per named fit, e.g. the
    all-scores fit plus the negative-only and positive-only sub-fits."""
    lines = ["fit\tcoefficient\testimate\tse\tz\tp"]
    for name, fit in fits.items():
        if not fit.converged:
            lines.append(f"{name}\t-\tNA\tNA\tNA\tNA\t# not converged: {fit.message}")
            continue
        for coef, estimate, se in (
            ("intercept", fit.intercept, fit.se_intercept),
            ("slope", fit.slope, fit.se_slope),
        ):
            z, p = wald_test(estimate, se)
            lines.append(f"{name}\t{coef}\t{estimate:.6f}\t{se:.6f}\t{z:.4f}\t{p:.6g}")
    return "\n".join(lines) + "\n"
