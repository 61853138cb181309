"""Learning-curve experiments: k-fold cross-validation, random vs active
training schedules, closest-N uncertainty sampling, and the kappa-stabilization
stopping detector.

A curve run grows one nested training set along a size schedule. At every
size the vocabulary is rebuilt from the current training set only (no feature
leakage from unlabeled text), a fresh model is trained, and test-fold metrics
plus the kappa between this point's predictions and the previous point's are
recorded. The active strategy grows the set with the unlabeled items closest
to the decision boundary; the random strategy grows it by seeded uniform
sampling. Both start from the same seeded initial set, so paired runs agree
exactly at the first and last points.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import features, metrics, svm
from .errors import DataError
from .ingest import AnalyzedTweet

STRATEGIES = ("random", "active")


def derive_seed(base: int, *tags: object) -> int:
    """Stable sub-seed derivation so one --seed drives every component."""
    digest = hashlib.sha256(":".join([str(base), *map(str, tags)]).encode()).digest()
    return int.from_bytes(digest[:8], "big")


def signed_label(tweet: AnalyzedTweet) -> int:
    if tweet.tweet.label is None:
        raise DataError(f"tweet {tweet.tweet.id} has no gold label")
    return 1 if tweet.tweet.label == 1 else -1


@dataclass(frozen=True)
class CurveSchedule:
    sizes: tuple[int, ...]
    strategy: str
    seed: int

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise DataError(f"strategy must be one of {STRATEGIES}")
        if not self.sizes or self.sizes[0] < 1:
            raise DataError("first schedule size must be >= 1")
        if any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise DataError("schedule sizes must be strictly increasing")


@dataclass(frozen=True)
class CurvePoint:
    size: int
    precision: float
    recall: float
    f1: float
    kappa_vs_prev: float | None
    stop_here: bool
    added_ids: tuple[str, ...]  # membership log: ids newly added at this point


@dataclass
class StoppingState:
    """Rolling window over the kappa history; ``fired_at`` is sticky."""

    threshold: float = 0.99
    window: int = 3
    kappas: list[float] = field(default_factory=list)
    fired_at: int | None = None

    def push(self, kappa: float) -> bool:
        """Append one kappa; True exactly when the rule first fires."""
        self.kappas.append(kappa)
        if self.fired_at is None:
            idx = stopping_check(self.kappas, self.threshold, self.window)
            if idx is not None:
                self.fired_at = idx
                return True
        return False

    @property
    def stop_recommended(self) -> bool:
        return self.fired_at is not None


def stopping_check(kappa_history: Sequence[float], threshold: float = 0.99, window: int = 3) -> int | None:
    """Smallest index s whose trailing ``window`` values are all >= threshold."""
    if window < 1:
        raise DataError("window must be >= 1")
    for s in range(window - 1, len(kappa_history)):
        if all(k >= threshold for k in kappa_history[s - window + 1 : s + 1]):
            return s
    return None


def kfold_split(corpus: Sequence, k: int, seed: int) -> list[list]:
    """Seeded partition into k folds whose sizes differ by at most one."""
    if k < 2:
        raise DataError(f"k must be >= 2, got {k}")
    if k > len(corpus):
        raise DataError(f"k={k} exceeds corpus size {len(corpus)}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(corpus))
    base, extra = divmod(len(corpus), k)
    folds = []
    start = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        folds.append([corpus[j] for j in order[start : start + size]])
        start += size
    return folds


def make_sizes(pool_size: int, n_points: int, start_size: int) -> tuple[int, ...]:
    """n_points sizes evenly spaced from start_size to pool_size, rounded to
    integers and deduplicated while staying strictly increasing."""
    if n_points < 2:
        raise DataError("need at least 2 schedule points")
    if start_size < 1 or start_size > pool_size:
        raise DataError(f"start_size {start_size} not in 1..{pool_size}")
    raw = np.linspace(start_size, pool_size, n_points)
    sizes: list[int] = []
    for value in raw:
        size = int(round(value))
        if not sizes or size > sizes[-1]:
            sizes.append(size)
    if len(sizes) < 2:
        raise DataError(f"infeasible spacing: {n_points} points between {start_size} and {pool_size}")
    return tuple(sizes)


def select_uncertain(model: svm.LinearModel, pool: Sequence[features.FeatureVector], n: int) -> list[int]:
    """Indices of the n pool items with smallest |score|, ties by lower index."""
    if n <= 0:
        raise DataError(f"n must be > 0, got {n}")
    if n > len(pool):
        raise DataError(f"n={n} exceeds pool size {len(pool)}")
    ranked = sorted(range(len(pool)), key=lambda i: (abs(svm.score(model, pool[i])), i))
    return ranked[:n]


def _evaluate(golds: Sequence[int], preds: Sequence[int]) -> metrics.PrfResult:
    pairs = list(zip(golds, preds))
    return metrics.prf(metrics.ConfusionCounts.from_pairs(pairs))


def train_and_predict(
    training: Sequence[AnalyzedTweet],
    eval_sets: Sequence[Sequence[AnalyzedTweet]],
    feature_config: features.FeatureConfig,
    train_config: svm.TrainConfig,
) -> tuple[svm.LinearModel, features.Vocabulary, list[list[int]]]:
    """Rebuild the vocabulary from the training set, train, and predict each
    evaluation set. The single code path behind curve points and retrains."""
    vocab = features.build_vocabulary(training, feature_config)
    examples = [(features.vectorize(t, vocab), signed_label(t)) for t in training]
    model = svm.train(examples, train_config)
    predictions = [
        [svm.classify(model, features.vectorize(t, vocab)) for t in eval_set]
        for eval_set in eval_sets
    ]
    return model, vocab, predictions


def run_curve(
    pool: Sequence[AnalyzedTweet],
    test_fold: Sequence[AnalyzedTweet],
    schedule: CurveSchedule,
    train_config: svm.TrainConfig,
    feature_config: features.FeatureConfig,
    stop_threshold: float = 0.99,
    stop_window: int = 3,
    prediction_set: Sequence[AnalyzedTweet] | None = None,
) -> list[CurvePoint]:
    """Grow a nested training set along the schedule and record one
    CurvePoint per size.

    ``prediction_set`` is what successive models are compared on for the
    stopping kappa: the test fold by default (replication mode) or a fixed
    held-out stop set (deployment mode).
    """
    pool_ids = {t.tweet.id for t in pool}
    if any(t.tweet.id in pool_ids for t in test_fold):
        raise DataError("pool and test fold must be disjoint")
    if schedule.sizes[-1] > len(pool):
        raise DataError(f"schedule reaches {schedule.sizes[-1]} but pool has {len(pool)}")
    for t in pool:
        signed_label(t)  # oracle mode: pool must be fully labeled

    if prediction_set is None:
        prediction_set = test_fold
    same_eval = prediction_set is test_fold

    rng = np.random.default_rng(schedule.seed)
    initial = rng.choice(len(pool), size=schedule.sizes[0], replace=False)
    member_flags = np.zeros(len(pool), dtype=bool)
    member_flags[initial] = True
    added_order: list[list[int]] = [sorted(int(i) for i in initial)]

    test_golds = [signed_label(t) for t in test_fold]
    stopping = StoppingState(threshold=stop_threshold, window=stop_window)
    points: list[CurvePoint] = []
    prev_stop_preds: list[int] | None = None

    for point_index, size in enumerate(schedule.sizes):
        member_indices = np.flatnonzero(member_flags)
        assert len(member_indices) == size
        # canonical order by pool index: the same training SET always yields
        # the same model regardless of how the strategy discovered it
        training = [pool[int(i)] for i in member_indices]
        eval_sets = [test_fold] if same_eval else [test_fold, prediction_set]
        model, vocab, predictions = train_and_predict(
            training, eval_sets, feature_config, train_config
        )
        test_preds = predictions[0]
        stop_preds = predictions[0] if same_eval else predictions[1]

        result = _evaluate(test_golds, test_preds)
        kappa = None
        fired = False
        if prev_stop_preds is not None:
            kappa = metrics.cohen_kappa(prev_stop_preds, stop_preds)
            fired = stopping.push(kappa)
        prev_stop_preds = stop_preds

        points.append(
            CurvePoint(
                size=size,
                precision=result.precision,
                recall=result.recall,
                f1=result.f1,
                kappa_vs_prev=kappa,
                stop_here=fired,
                added_ids=tuple(pool[i].tweet.id for i in added_order[point_index]),
            )
        )

        if point_index + 1 == len(schedule.sizes):
            break
        n_add = schedule.sizes[point_index + 1] - size
        remaining = np.flatnonzero(~member_flags)
        if schedule.strategy == "random":
            chosen = rng.choice(remaining, size=n_add, replace=False)
        else:
            vectors = [features.vectorize(pool[int(i)], vocab) for i in remaining]
            picked = select_uncertain(model, vectors, n_add)
            chosen = remaining[picked]
        member_flags[chosen] = True
        added_order.append(sorted(int(i) for i in chosen))

    return points


def format_curve_lines(strategy: str, fold: int, points: Sequence[CurvePoint]) -> list[str]:
    """`strategy TAB fold TAB size TAB precision TAB recall TAB f1 TAB kappa TAB stop_flag`."""
    lines = []
    for p in points:
        kappa = "NA" if p.kappa_vs_prev is None else f"{p.kappa_vs_prev:.6f}"
        lines.append(
            f"{strategy}\t{fold}\t{p.size}\t{p.precision:.6f}\t{p.recall:.6f}"
            f"\t{p.f1:.6f}\t{kappa}\t{int(p.stop_here)}"
        )
    return lines


def format_membership_lines(points: Sequence[CurvePoint]) -> list[str]:
    """One line per point: `size TAB newly added ids (space separated)`."""
    return [f"{p.size}\t{' '.join(p.added_ids)}" for p in points]


@dataclass(frozen=True)
class FoldScores:
    """Out-of-fold scored items: gold labels and decision values."""

    fold: int
    golds: tuple[int, ...]
    scores: tuple[float, ...]


def cross_validated_scores(
    corpus: Sequence[AnalyzedTweet],
    feature_config: features.FeatureConfig,
    train_config: svm.TrainConfig,
    k: int,
    seed: int,
) -> list[FoldScores]:
    """Train on k-1 folds, score the held-out fold; one FoldScores per fold."""
    folds = kfold_split(corpus, k, seed)
    out = []
    for i, fold in enumerate(folds):
        training = [t for j, other in enumerate(folds) if j != i for t in other]
        vocab = features.build_vocabulary(training, feature_config)
        examples = [(features.vectorize(t, vocab), signed_label(t)) for t in training]
        model = svm.train(examples, train_config)
        golds = tuple(signed_label(t) for t in fold)
        fold_scores = tuple(svm.score(model, features.vectorize(t, vocab)) for t in fold)
        out.append(FoldScores(fold=i, golds=golds, scores=fold_scores))
    return out
