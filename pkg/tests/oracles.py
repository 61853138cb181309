"""Independent reference implementations used only as test oracles.

The margin-trainer oracle solves the same box-constrained dual as the
production trainer but by plain projected gradient ascent with a fixed
1/L step, run until the measured primal-dual gap closes. It shares no code
with the trainer under test.
"""

from __future__ import annotations

import numpy as np

from relsift.features import FeatureVector


def _dense_rows(examples, dim: int) -> np.ndarray:
    rows = np.zeros((len(examples), dim + 1))
    rows[:, 0] = 1.0  # bias feature
    for i, (x, _) in enumerate(examples):
        if isinstance(x, FeatureVector):
            for j in x.indices:
                rows[i, j] = 1.0
        else:
            for j, v in x.items():
                rows[i, j] = v
    return rows


def svm_oracle(examples, c: float, gap_tol: float = 1e-6, max_iterations: int = 500_000):
    """Projected gradient ascent on the hinge-loss dual.

    Returns (augmented weight vector, primal objective, dual objective).
    The augmented vector's slot 0 is the bias.
    """
    dim = 0
    for x, _ in examples:
        if isinstance(x, FeatureVector):
            dim = max(dim, max(x.indices, default=0))
        else:
            dim = max(dim, max(x.keys(), default=0))
    rows = _dense_rows(examples, dim)
    y = np.array([label for _, label in examples], dtype=float)
    q = (y[:, None] * rows) @ (y[:, None] * rows).T
    step = 1.0 / max(np.linalg.eigvalsh(q).max(), 1e-12)

    n = len(examples)
    alpha = np.zeros(n)
    for _ in range(max_iterations):
        grad = 1.0 - q @ alpha
        alpha = np.clip(alpha + step * grad, 0.0, c)
        w = rows.T @ (alpha * y)
        margins = rows @ w * y
        primal = 0.5 * float(w @ w) + c * float(np.maximum(0.0, 1.0 - margins).sum())
        dual = float(alpha.sum()) - 0.5 * float(alpha @ q @ alpha)
        if primal - dual <= gap_tol:
            break
    else:
        raise AssertionError(f"oracle failed to close the gap: {primal - dual}")
    return w, primal, dual


def oracle_score(w: np.ndarray, x) -> float:
    total = w[0]
    if isinstance(x, FeatureVector):
        for j in x.indices:
            total += w[j]
    else:
        for j, v in x.items():
            total += w[j] * v
    return float(total)


def random_binary_dataset(n: int, dim: int, seed: int, density: float = 0.3):
    """Random binary feature vectors with random +-1 labels, both classes
    guaranteed present."""
    rng = np.random.default_rng(seed)
    examples = []
    for i in range(n):
        mask = rng.random(dim) < density
        indices = tuple(int(j) + 1 for j in np.flatnonzero(mask))
        label = 1 if rng.random() < 0.5 else -1
        examples.append((FeatureVector(indices=indices), label))
    labels = {label for _, label in examples}
    if len(labels) < 2:  # force the missing class onto the first example
        x, _ = examples[0]
        missing = 1 if -1 in labels else -1
        examples[0] = (x, missing)
    return examples
