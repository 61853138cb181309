"""Classification metrics and inter-rater reliability statistics.

Pure functions over label sequences and ratings matrices: precision/recall/F1
from confusion counts, Cohen's kappa, percent agreement, and the single-rater
absolute-agreement intraclass correlation from a two-way ANOVA decomposition.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataError

# Two-way ANOVA, single-rater, absolute-agreement form. Printed alongside
# computed values so consumers can audit which ICC convention this is.
ICC_FORMULA = "ICC = (MSR - MSE) / (MSR + (k-1)*MSE + (k/n)*(MSC - MSE))"


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        for name in ("tp", "fp", "fn", "tn"):
            if getattr(self, name) < 0:
                raise DataError(f"confusion count {name} must be >= 0")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @staticmethod
    def from_pairs(pairs: Sequence[tuple[int, int]]) -> "ConfusionCounts":
        """Build counts from (gold, predicted) pairs in {+1, -1} label space."""
        tp = fp = fn = tn = 0
        for gold, pred in pairs:
            if gold == 1 and pred == 1:
                tp += 1
            elif gold == -1 and pred == 1:
                fp += 1
            elif gold == 1 and pred == -1:
                fn += 1
            elif gold == -1 and pred == -1:
                tn += 1
            else:
                raise DataError(f"labels must be +1/-1, got ({gold}, {pred})")
        return ConfusionCounts(tp, fp, fn, tn)


@dataclass(frozen=True)
class PrfResult:
    precision: float
    recall: float
    f1: float
    accuracy: float
    # names of quantities whose denominator was zero and were set to 0
    flags: tuple[str, ...] = field(default=())


def prf(counts: ConfusionCounts) -> PrfResult:
    """Precision, recall, F1 and accuracy from confusion counts.

    Zero-denominator cases return 0 by convention and are named in ``flags``
    so downstream consumers keep a total ordering over results instead of
    propagating NaN.
    """
    if counts.total == 0:
        raise DataError("empty evaluation")
    flags: list[str] = []
    if counts.tp + counts.fp > 0:
        precision = counts.tp / (counts.tp + counts.fp)
    else:
        precision = 0.0
        flags.append("precision")
    if counts.tp + counts.fn > 0:
        recall = counts.tp / (counts.tp + counts.fn)
    else:
        recall = 0.0
        flags.append("recall")
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
        flags.append("f1")
    accuracy = (counts.tp + counts.tn) / counts.total
    return PrfResult(precision, recall, f1, accuracy, tuple(flags))


def _check_paired(a: Sequence, b: Sequence) -> None:
    if len(a) != len(b):
        raise DataError(f"label sequences differ in length: {len(a)} vs {len(b)}")
    if len(a) == 0:
        raise DataError("label sequences are empty")


def percent_agreement(a: Sequence, b: Sequence) -> float:
    """Raw fraction of positions where the two label sequences agree."""
    _check_paired(a, b)
    return sum(1 for x, y in zip(a, b) if x == y) / len(a)


def cohen_kappa(a: Sequence, b: Sequence) -> float:
    """Chance-corrected agreement between two label sequences.

    kappa = (po - pe) / (1 - pe), with pe the agreement expected from the
    two raters' label marginals. Perfect observed agreement returns 1.0
    directly, which also covers the degenerate pe == 1 case.
    """
    _check_paired(a, b)
    n = len(a)
    po = percent_agreement(a, b)
    if po == 1.0:
        return 1.0
    counts_a = Counter(a)
    counts_b = Counter(b)
    pe = sum(counts_a[label] * counts_b.get(label, 0) for label in counts_a) / (n * n)
    return (po - pe) / (1.0 - pe)


@dataclass(frozen=True)
class RatingsMatrix:
    """n items rated by k raters, no missing cells."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DataError("ratings must form a 2-D items x raters matrix")
        n, k = values.shape
        if n < 2 or k < 2:
            raise DataError(f"need >= 2 items and >= 2 raters, got {n} x {k}")
        if not np.isfinite(values).all():
            raise DataError("ratings contain missing or non-finite cells")
        object.__setattr__(self, "values", values)

    @property
    def n_items(self) -> int:
        return self.values.shape[0]

    @property
    def n_raters(self) -> int:
        return self.values.shape[1]


def icc_absolute(matrix: RatingsMatrix) -> float:
    """Single-rater absolute-agreement intraclass correlation.

    Decomposes the matrix two-way (rows = items -> MSR, columns = raters ->
    MSC, residual -> MSE) and applies ``ICC_FORMULA``. Absolute agreement:
    shifting a single rater's column changes the result, shifting the whole
    matrix does not.
    """
    x = matrix.values
    n, k = x.shape
    grand = x.mean()
    row_means = x.mean(axis=1)
    col_means = x.mean(axis=0)
    msr = k * np.sum((row_means - grand) ** 2) / (n - 1)
    msc = n * np.sum((col_means - grand) ** 2) / (k - 1)
    residual = x - row_means[:, None] - col_means[None, :] + grand
    mse = np.sum(residual**2) / ((n - 1) * (k - 1))
    if msr <= 1e-12 * max(1.0, abs(grand)):
        raise DataError("undefined ICC: zero between-item variance")
    denom = msr + (k - 1) * mse + (k / n) * (msc - mse)
    if denom <= 0:
        raise DataError("undefined ICC: non-positive denominator")
    return float((msr - mse) / denom)


def format_metric_report(values: dict[str, float], title: str | None = None) -> str:
    """Render metrics both as a readable table and as `metric TAB value` lines.

    ICC entries get the formula line appended for auditability.
    """
    lines: list[str] = []
    if title:
        lines.append(title)
        lines.append("-" * len(title))
    width = max((len(k) for k in values), default=0)
    for name, value in values.items():
        lines.append(f"{name.ljust(width)}  {value:.6f}")
    lines.append("")
    for name, value in values.items():
        lines.append(f"{name}\t{value:.6f}")
    if any(name.startswith("icc") for name in values):
        lines.append(f"# {ICC_FORMULA}")
    return "\n".join(lines) + "\n"
