"""Binary bag-of-ngrams features over lemma and POS streams.

A vocabulary maps (stream kind, ngram) pairs to dense 1-based indices; a
feature vector is the sorted set of indices present in a text. Features are
presence-only: token multiplicity within a text never matters.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

from .errors import DataError
from .ingest import AnalyzedTweet

KIND_LEMMA = "lex"
KIND_POS = "pos"


@dataclass(frozen=True)
class FeatureConfig:
    source: str = "lemma"  # lemma | pos | both
    lemma_orders: frozenset[int] = frozenset({1})
    pos_orders: frozenset[int] = frozenset()
    min_count: int = 3
    # what min_count counts: total corpus occurrences (default) or the
    # number of distinct texts an ngram appears in
    count_mode: str = "occurrences"

    def __post_init__(self) -> None:
        if self.source not in ("lemma", "pos", "both"):
            raise DataError(f"unknown feature source: {self.source}")
        if self.count_mode not in ("occurrences", "documents"):
            raise DataError(f"unknown count_mode: {self.count_mode}")
        if not self.lemma_orders <= {1, 2}:
            raise DataError("lemma ngram orders limited to {1, 2}")
        if not self.pos_orders <= {1, 2, 3}:
            raise DataError("pos ngram orders limited to {1, 2, 3}")
        if self.uses_lemmas and not self.lemma_orders:
            raise DataError("source includes lemmas but no lemma orders selected")
        if self.uses_pos and not self.pos_orders:
            raise DataError("source includes pos but no pos orders selected")
        if self.min_count < 1:
            raise DataError("min_count must be >= 1")

    @property
    def uses_lemmas(self) -> bool:
        return self.source in ("lemma", "both")

    @property
    def uses_pos(self) -> bool:
        return self.source in ("pos", "both")


def _preset(source: str, lemma: set[int], pos: set[int], min_count: int = 3) -> FeatureConfig:
    return FeatureConfig(
        source=source,
        lemma_orders=frozenset(lemma),
        pos_orders=frozenset(pos),
        min_count=min_count,
    )


# the six named presets; lex1 is the production default
PRESETS: dict[str, FeatureConfig] = {
    "pos1": _preset("pos", set(), {1}),
    "pos1-2": _preset("pos", set(), {1, 2}),
    "pos1-3": _preset("pos", set(), {1, 2, 3}),
    "lex1": _preset("lemma", {1}, set()),
    "lex1-2": _preset("lemma", {1, 2}, set()),
    "lex1-2_pos1-3": _preset("both", {1, 2}, {1, 2, 3}),
}


def preset(name: str, min_count: int = 3) -> FeatureConfig:
    key = name.lower()
    if key not in PRESETS:
        raise DataError(f"unknown feature preset: {name} (choose from {sorted(PRESETS)})")
    base = PRESETS[key]
    return FeatureConfig(base.source, base.lemma_orders, base.pos_orders, min_count)


@dataclass(frozen=True)
class FeatureVector:
    """Strictly increasing indices of the features present."""

    indices: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise DataError("feature indices must be strictly increasing")
        if self.indices and self.indices[0] < 1:
            raise DataError("feature indices start at 1")

    def __len__(self) -> int:
        return len(self.indices)


def ngrams(tokens: Sequence[str], order: int) -> Iterable[tuple[str, ...]]:
    """Consecutive ngrams; no padding, so a short text yields none."""
    for start in range(len(tokens) - order + 1):
        yield tuple(tokens[start : start + order])


@dataclass(frozen=True)
class Vocabulary:
    """Ordered (kind, ngram) -> index map with dense 1-based indices."""

    entries: dict[tuple[str, tuple[str, ...]], int]
    config: FeatureConfig

    def __len__(self) -> int:
        return len(self.entries)


def _tweet_ngrams(tweet: AnalyzedTweet, config: FeatureConfig) -> Iterable[tuple[str, tuple[str, ...]]]:
    if config.uses_lemmas:
        for order in sorted(config.lemma_orders):
            for gram in ngrams(tweet.lemmas, order):
                yield (KIND_LEMMA, gram)
    if config.uses_pos:
        if tweet.pos is None:
            raise DataError(f"tweet {tweet.tweet.id} has no pos stream but config requires one")
        for order in sorted(config.pos_orders):
            for gram in ngrams(tweet.pos, order):
                yield (KIND_POS, gram)


def build_vocabulary(corpus: Sequence[AnalyzedTweet], config: FeatureConfig) -> Vocabulary:
    """Count ngrams over the corpus and keep those whose total occurrence
    count reaches ``min_count``; entries are ordered lexicographically by
    (kind, ngram) and indexed 1..N, so two builds over the same corpus are
    identical entry-for-entry."""
    if not corpus:
        raise DataError("cannot build a vocabulary from an empty corpus")
    counts: Counter[tuple[str, tuple[str, ...]]] = Counter()
    for tweet in corpus:
        grams = _tweet_ngrams(tweet, config)
        counts.update(set(grams) if config.count_mode == "documents" else grams)
    kept = sorted(key for key, count in counts.items() if count >= config.min_count)
    entries = {key: index for index, key in enumerate(kept, start=1)}
    return Vocabulary(entries=entries, config=config)


def vectorize(tweet: AnalyzedTweet, vocab: Vocabulary) -> FeatureVector:
    """Presence vector of the tweet's in-vocabulary ngrams."""
    present = {
        vocab.entries[key]
        for key in _tweet_ngrams(tweet, vocab.config)
        if key in vocab.entries
    }
    return FeatureVector(indices=tuple(sorted(present)))


def save_vocabulary(vocab: Vocabulary, fp: TextIO) -> None:
    """One line per entry: `index TAB kind TAB ngram tokens joined by space`."""
    by_index = sorted((index, key) for key, index in vocab.entries.items())
    for index, (kind, gram) in by_index:
        fp.write(f"{index}\t{kind}\t{' '.join(gram)}\n")


def load_vocabulary(fp: TextIO, config: FeatureConfig) -> Vocabulary:
    entries: dict[tuple[str, tuple[str, ...]], int] = {}
    for line_no, line in enumerate(fp, start=1):
        if not line.strip():
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 3:
            raise DataError(f"vocabulary line {line_no}: expected 3 tab-separated fields")
        index, kind, gram = int(parts[0]), parts[1], tuple(parts[2].split(" "))
        entries[(kind, gram)] = index
    if sorted(entries.values()) != list(range(1, len(entries) + 1)):
        raise DataError("vocabulary indices are not dense 1..N")
    return Vocabulary(entries=entries, config=config)


def format_sparse_line(label: int, vector: FeatureVector) -> str:
    """`label index:1 index:1 ...` with ascending indices."""
    parts = [str(label)]
    parts.extend(f"{index}:1" for index in vector.indices)
    return " ".join(parts)


def parse_sparse_line(line: str) -> tuple[int, FeatureVector]:
    parts = line.split()
    if not parts:
        raise DataError("empty sparse vector line")
    label = int(parts[0])
    indices = []
    for part in parts[1:]:
        index, _, value = part.partition(":")
        if value != "1":
            raise DataError(f"binary vectors only; got value {value!r}")
        indices.append(int(index))
    return label, FeatureVector(indices=tuple(indices))
