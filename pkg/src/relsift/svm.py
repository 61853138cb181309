"""Linear soft-margin classifier trained by dual coordinate descent.

Minimizes the L2-regularized hinge objective

    0.5 * ||w~||^2 + C * sum_i max(0, 1 - y_i * (w . x_i + b))

where the bias b is handled as an extra constant feature of value 1, so the
augmented weight vector w~ = (b, w) includes the bias in the regularizer.
Scores are raw decision values w . x + b, NOT geometric distances (which would
divide by ||w||); their sign is the predicted label and their magnitude is the
confidence surrogate used for uncertainty sampling and threshold filtering.
Rankings by |w . x + b| and by geometric distance are identical for a fixed
model, which is the only property the selection rules rely on.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from .errors import DataError
from .features import FeatureVector

logger = logging.getLogger(__name__)

# sparse example: a binary presence vector or an explicit index -> value map
SparseInput = FeatureVector | Mapping[int, float]


@dataclass(frozen=True)
class TrainConfig:
    """Trainer knobs.

    ``C`` defaults to the reciprocal of the mean squared feature-vector norm
    of the training data (the convention of classic margin trainers); the
    data-dependent value is logged at train time. ``tolerance`` bounds the
    spread of projected gradients over one epoch, a dual optimality gap
    surrogate. ``seed`` fixes the per-epoch coordinate permutation.
    """

    C: float | None = None
    tolerance: float = 1e-3
    max_epochs: int = 1000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.C is not None and self.C <= 0:
            raise DataError(f"C must be > 0, got {self.C}")
        if self.tolerance <= 0:
            raise DataError(f"tolerance must be > 0, got {self.tolerance}")


@dataclass(frozen=True)
class LinearModel:
    """Sparse weight map (1-based feature indices), bias, and the vocab bound."""

    weights: dict[int, float]
    bias: float
    vocab_size: int

    def __post_init__(self) -> None:
        if any(index < 1 or index > self.vocab_size for index in self.weights):
            raise DataError("weight index outside 1..vocab_size")
        finite = math.isfinite(self.bias) and all(
            math.isfinite(v) for v in self.weights.values()
        )
        if not finite:
            raise DataError("model contains non-finite values")


@dataclass(frozen=True)
class TrainResult:
    model: LinearModel
    c_used: float
    epochs: int
    gap: float
    converged: bool
    # per-epoch value of the minimized dual objective 0.5*||w~||^2 - sum(alpha);
    # every coordinate step solves its subproblem exactly, so this never rises
    dual_objective_history: tuple[float, ...] = field(default=())
    primal_objective: float = float("nan")


def _as_indices_values(x: SparseInput) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(x, FeatureVector):
        idx = np.asarray(x.indices, dtype=np.int64)
        return idx, np.ones(len(idx))
    items = sorted(x.items())
    idx = np.array([i for i, _ in items], dtype=np.int64)
    val = np.array([v for _, v in items], dtype=float)
    return idx, val


def _check_bounds(idx: np.ndarray, vocab_size: int) -> None:
    if len(idx) and (idx[0] < 1 or idx[-1] > vocab_size):
        raise DataError(
            f"feature index out of range 1..{vocab_size}: {idx[0] if idx[0] < 1 else idx[-1]}"
        )


def default_c(examples: Sequence[tuple[SparseInput, int]]) -> float:
    """Reciprocal of the mean squared feature-vector norm (bias excluded)."""
    total = 0.0
    for x, _ in examples:
        _, val = _as_indices_values(x)
        total += float(np.dot(val, val))
    if total <= 0:
        return 1.0
    return len(examples) / total


def fit(examples: Sequence[tuple[SparseInput, int]], config: TrainConfig | None = None) -> TrainResult:
    """Dual coordinate descent on the hinge-loss dual, returning diagnostics.

    One dual variable per example, box-constrained to [0, C]; each update
    solves the one-dimensional subproblem exactly. Convergence is declared
    when max - min of the projected gradients over an epoch drops below
    ``tolerance``. Deterministic for a fixed seed.
    """
    config = config or TrainConfig()
    if not examples:
        raise DataError("degenerate training set: empty")
    labels = np.array([y for _, y in examples], dtype=float)
    if set(np.unique(labels)) - {-1.0, 1.0}:
        raise DataError("labels must be +1/-1")
    if len(np.unique(labels)) < 2:
        raise DataError("degenerate training set: single class")

    vocab_size = 0
    rows_idx: list[np.ndarray] = []
    rows_val: list[np.ndarray] = []
    for x, _ in examples:
        idx, val = _as_indices_values(x)
        if len(idx) and idx[0] < 1:
            raise DataError(f"feature index out of range: {idx[0]}")
        vocab_size = max(vocab_size, int(idx[-1]) if len(idx) else 0)
        rows_idx.append(idx)
        rows_val.append(val)

    c = config.C if config.C is not None else default_c(examples)
    if config.C is None:
        logger.info("default C = %.6g (reciprocal mean squared norm, n=%d)", c, len(examples))

    n = len(examples)
    # augmented weight vector: slot 0 is the bias feature (constant 1)
    w = np.zeros(vocab_size + 1)
    alpha = np.zeros(n)
    q_diag = np.array([float(np.dot(v, v)) + 1.0 for v in rows_val])
    rng = np.random.default_rng(config.seed)

    dual_history: list[float] = []
    gap = math.inf
    epochs = 0
    converged = False
    for epoch in range(config.max_epochs):
        epochs = epoch + 1
        pg_max, pg_min = -math.inf, math.inf
        for i in rng.permutation(n):
            idx, val, y = rows_idx[i], rows_val[i], labels[i]
            margin = w[0] + float(np.dot(w[idx], val)) if len(idx) else w[0]
            g = y * margin - 1.0
            a = alpha[i]
            if a <= 0.0:
                pg = min(g, 0.0)
            elif a >= c:
                pg = max(g, 0.0)
            else:
                pg = g
            if pg != 0.0:
                new_a = min(max(a - g / q_diag[i], 0.0), c)
                delta = new_a - a
                if delta != 0.0:
                    alpha[i] = new_a
                    w[0] += delta * y
                    w[idx] += delta * y * val
            pg_max = max(pg_max, pg)
            pg_min = min(pg_min, pg)
        dual_history.append(0.5 * float(np.dot(w, w)) - float(alpha.sum()))
        gap = pg_max - pg_min
        if not np.isfinite(w).all():
            raise DataError(
                f"non-finite weights at epoch {epochs} (C={c:.3g}, gap={gap:.3g})"
            )
        if gap < config.tolerance:
            converged = True
            break
    if not converged:
        logger.warning(
            "trainer hit max_epochs=%d with gradient spread %.3g (tolerance %.3g)",
            config.max_epochs, gap, config.tolerance,
        )

    weights = {int(j): float(w[j]) for j in range(1, vocab_size + 1) if w[j] != 0.0}
    model = LinearModel(weights=weights, bias=float(w[0]), vocab_size=vocab_size)
    return TrainResult(
        model=model,
        c_used=c,
        epochs=epochs,
        gap=gap,
        converged=converged,
        dual_objective_history=tuple(dual_history),
        primal_objective=objective(model, examples, c),
    )


def train(examples: Sequence[tuple[SparseInput, int]], config: TrainConfig | None = None) -> LinearModel:
    return fit(examples, config).model


def score(model: LinearModel, x: SparseInput) -> float:
    """Raw decision value w . x + b."""
    idx, val = _as_indices_values(x)
    _check_bounds(idx, model.vocab_size)
    total = model.bias
    for j, v in zip(idx, val):
        total += model.weights.get(int(j), 0.0) * v
    return total


def classify(model: LinearModel, x: SparseInput) -> int:
    """Sign of the score; a score of exactly 0 classifies as +1 so borderline
    items surface as relevant rather than disappearing."""
    return 1 if score(model, x) >= 0.0 else -1


def objective(
    model: LinearModel,
    examples: Sequence[tuple[SparseInput, int]],
    c: float,
) -> float:
    """Regularized hinge objective of a model on a dataset.

    The norm includes the bias component, matching the augmented-feature
    formulation the trainer optimizes.
    """
    reg = 0.5 * (sum(v * v for v in model.weights.values()) + model.bias**2)
    hinge = 0.0
    for x, y in examples:
        hinge += max(0.0, 1.0 - y * score(model, x))
    return reg + c * hinge


def save_model(model: LinearModel, fp: TextIO) -> None:
    """Text form: header `bias <real>`, then `index TAB weight`, ascending."""
    fp.write(f"bias {model.bias!r}\n")
    for index in sorted(model.weights):
        fp.write(f"{index}\t{model.weights[index]!r}\n")


def load_model(fp: TextIO, vocab_size: int | None = None) -> LinearModel:
    header = fp.readline().split()
    if len(header) != 2 or header[0] != "bias":
        raise DataError("model file must start with 'bias <real>'")
    bias = float(header[1])
    weights: dict[int, float] = {}
    for line_no, line in enumerate(fp, start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"model file line {line_no}: expected 'index TAB weight'")
        weights[int(parts[0])] = float(parts[1])
    size = vocab_size if vocab_size is not None else max(weights, default=0)
    return LinearModel(weights=weights, bias=bias, vocab_size=size)


def scores(model: LinearModel, xs: Iterable[SparseInput]) -> list[float]:
    return [score(model, x) for x in xs]
