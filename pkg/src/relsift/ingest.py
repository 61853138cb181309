"""Parse, clean, normalize, deduplicate, filter, and sample text records.

The input format is UTF-8 JSON lines: one object per record with required
``id`` (string), ``ts`` (integer UTC seconds) and ``text``, optional parallel
``lemmas``/``pos`` analysis streams, and an optional binary ``label``
(1 = relevant, 0 = irrelevant). Records without an analysis stream fall back
to a passthrough tokenizer (whitespace split), so the toolkit works without
any external morphological analyzer.

Normalization replaces known emoji sequences with ``emojiN`` tokens, URLs
with ``LINK``, freestanding numbers with ``NUMBER``, and strips punctuation
except for configured keep characters (default ``#``, ``@``, ``_`` so
hashtags and user mentions survive).
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import DataError

LINK_TOKEN = "LINK"
NUMBER_TOKEN = "NUMBER"
EMOJI_TOKEN_RE = re.compile(r"emoji\d+")
URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
# freestanding number: ASCII or Arabic-Indic digits only, nothing attached
DIGITS_RE = re.compile(r"[0-9٠-٩۰-۹]+")

ARABIC_SCRIPT_RANGES: tuple[tuple[int, int], ...] = (
    (0x0600, 0x06FF),
    (0x0750, 0x077F),
    (0x08A0, 0x08FF),
    (0xFB50, 0xFDFF),
    (0xFE70, 0xFEFF),
)


@dataclass(frozen=True)
class Tweet:
    id: str
    timestamp: int
    text: str
    label: int | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise DataError("tweet id must be nonempty")
        if self.label is not None and self.label not in (0, 1):
            raise DataError(f"label must be 0 or 1, got {self.label!r}")


@dataclass(frozen=True)
class AnalyzedTweet:
    """A tweet plus its lemma stream and optional parallel POS stream.

    ``filtered`` marks records whose lemma stream was shortened by stopword
    removal while the POS stream was left complete; only then may the two
    stream lengths differ.
    """

    tweet: Tweet
    lemmas: tuple[str, ...]
    pos: tuple[str, ...] | None = None
    filtered: bool = False

    def __post_init__(self) -> None:
        if self.pos is not None and not self.filtered and len(self.pos) != len(self.lemmas):
            raise DataError(
                f"tweet {self.tweet.id}: lemma/pos length mismatch "
                f"({len(self.lemmas)} vs {len(self.pos)})"
            )


@dataclass(frozen=True)
class NormalizationConfig:
    emoji_table: dict[str, int] = field(default_factory=dict)
    stopwords: frozenset[str] = frozenset()
    keep_chars: frozenset[str] = frozenset({"#", "@", "_"})
    allowed_scripts: tuple[tuple[int, int], ...] | None = None
    blocked_keywords: frozenset[str] = frozenset()
    pos_collapse_map: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        indices = list(self.emoji_table.values())
        if len(set(indices)) != len(indices):
            raise DataError("emoji indices must be unique")
        for ch in self.keep_chars:
            if not unicodedata.category(ch).startswith("P"):
                raise DataError(f"keep_chars must be punctuation, got {ch!r}")

    @staticmethod
    def default() -> "NormalizationConfig":
        """Shipped emoji table and POS collapse map, Arabic script ranges."""
        return NormalizationConfig(
            emoji_table=default_emoji_table(),
            allowed_scripts=ARABIC_SCRIPT_RANGES,
            pos_collapse_map=default_pos_collapse_map(),
        )


@dataclass(frozen=True)
class ParseIssue:
    line: int
    message: str


def _read_data_file(name: str) -> str:
    return resources.files("relsift.data").joinpath(name).read_text(encoding="utf-8")


def default_emoji_table() -> dict[str, int]:
    return parse_emoji_table(_read_data_file("emoji_table.tsv").splitlines())


def default_pos_collapse_map() -> dict[str, str]:
    return parse_pos_map(_read_data_file("pos_collapse.tsv").splitlines())


def parse_emoji_table(lines: Iterable[str]) -> dict[str, int]:
    """TSV: emoji codepoint sequence TAB index. Sequences may be written as
    literal characters or as space-joined `U+XXXX` notation."""
    table: dict[str, int] = {}
    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"emoji table line {line_no}: expected 2 tab-separated fields")
        seq, index = parts
        if seq.startswith("U+"):
            seq = "".join(chr(int(cp[2:], 16)) for cp in seq.split(" "))
        table[seq] = int(index)
    if len(set(table.values())) != len(table):
        raise DataError("emoji table indices are not unique")
    return table


def parse_pos_map(lines: Iterable[str]) -> dict[str, str]:
    """TSV: fine POS tag TAB collapsed tag."""
    mapping: dict[str, str] = {}
    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"pos map line {line_no}: expected 2 tab-separated fields")
        mapping[parts[0]] = parts[1]
    return mapping


def parse_wordlist(lines: Iterable[str]) -> frozenset[str]:
    """One token per line; blank lines and # comments skipped."""
    words = set()
    for raw in lines:
        token = raw.strip()
        if token and not token.startswith("#"):
            words.add(token)
    return frozenset(words)


def parse_records(
    stream: Iterable[str | bytes],
    fmt: str = "jsonl",
) -> tuple[list[AnalyzedTweet], list[ParseIssue]]:
    """One AnalyzedTweet per well-formed line, order preserved.

    Malformed lines are reported with their line number and skipped; a
    duplicate id is reported naming both lines and the later record skipped.
    """
    if fmt != "jsonl":
        raise DataError(f"unknown record format: {fmt}")
    out: list[AnalyzedTweet] = []
    issues: list[ParseIssue] = []
    seen: dict[str, int] = {}
    for line_no, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                issues.append(ParseIssue(line_no, f"not valid UTF-8: {exc}"))
                continue
        line = raw.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            issues.append(ParseIssue(line_no, f"invalid JSON: {exc.msg}"))
            continue
        try:
            analyzed = record_to_tweet(record)
        except DataError as exc:
            issues.append(ParseIssue(line_no, str(exc)))
            continue
        tid = analyzed.tweet.id
        if tid in seen:
            issues.append(
                ParseIssue(line_no, f"duplicate id {tid!r} (first seen on line {seen[tid]})")
            )
            continue
        seen[tid] = line_no
        out.append(analyzed)
    return out, issues


def record_to_tweet(record: dict) -> AnalyzedTweet:
    if not isinstance(record, dict):
        raise DataError("record must be a JSON object")
    for name in ("id", "ts", "text"):
        if name not in record:
            raise DataError(f"missing required field {name!r}")
    if not isinstance(record["id"], str) or not record["id"]:
        raise DataError("id must be a nonempty string")
    if not isinstance(record["ts"], int):
        raise DataError("ts must be an integer (UTC seconds)")
    if not isinstance(record["text"], str):
        raise DataError("text must be a string")
    label = record.get("label")
    if label is not None and label not in (0, 1):
        raise DataError(f"label must be 0 or 1, got {label!r}")
    tweet = Tweet(id=record["id"], timestamp=record["ts"], text=record["text"], label=label)
    lemmas = record.get("lemmas")
    pos = record.get("pos")
    filtered = bool(record.get("analysis_filtered", False))
    if lemmas is None:
        if pos is not None:
            raise DataError("pos stream present without a lemma stream")
        # passthrough tokenizer
        return AnalyzedTweet(tweet=tweet, lemmas=tuple(tweet.text.split()))
    if not all(isinstance(t, str) for t in lemmas):
        raise DataError("lemmas must be strings")
    if pos is not None and not all(isinstance(t, str) for t in pos):
        raise DataError("pos tags must be strings")
    return AnalyzedTweet(
        tweet=tweet,
        lemmas=tuple(lemmas),
        pos=tuple(pos) if pos is not None else None,
        filtered=filtered,
    )


def tweet_to_record(analyzed: AnalyzedTweet) -> dict:
    record: dict = {
        "id": analyzed.tweet.id,
        "ts": analyzed.tweet.timestamp,
        "text": analyzed.tweet.text,
    }
    if analyzed.tweet.label is not None:
        record["label"] = analyzed.tweet.label
    record["lemmas"] = list(analyzed.lemmas)
    if analyzed.pos is not None:
        record["pos"] = list(analyzed.pos)
    if analyzed.filtered:
        record["analysis_filtered"] = True
    return record


def write_records(tweets: Iterable[AnalyzedTweet], fp: TextIO) -> None:
    for analyzed in tweets:
        fp.write(json.dumps(tweet_to_record(analyzed), ensure_ascii=False))
        fp.write("\n")


@lru_cache(maxsize=4096)
def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def _emoji_regex(table: dict[str, int]) -> re.Pattern | None:
    if not table:
        return None
    # longest sequences first so multi-codepoint emojis win over prefixes
    ordered = sorted(table, key=len, reverse=True)
    return re.compile("|".join(re.escape(seq) for seq in ordered))


def normalize_token(token: str, config: NormalizationConfig, emoji_re: re.Pattern | None = None) -> list[str]:
    """Normalize one raw token; may yield zero or several output tokens."""
    if emoji_re is None:
        emoji_re = _emoji_regex(config.emoji_table)
    text = token
    if emoji_re is not None:
        text = emoji_re.sub(lambda m: f" emoji{config.emoji_table[m.group(0)]} ", text)
    text = URL_RE.sub(f" {LINK_TOKEN} ", text)
    text = "".join(
        " " if (_is_punct(ch) and ch not in config.keep_chars) or ch in "\r\n" else ch
        for ch in text
    )
    out = []
    for piece in text.split():
        out.append(NUMBER_TOKEN if DIGITS_RE.fullmatch(piece) else piece)
    return out


def normalize(text: str, config: NormalizationConfig) -> list[str]:
    """Full normalization of raw text into a token list. Idempotent: running
    the output back through changes nothing."""
    emoji_re = _emoji_regex(config.emoji_table)
    tokens: list[str] = []
    for raw in text.split():
        tokens.extend(normalize_token(raw, config, emoji_re))
    return tokens


def normalize_analyzed(analyzed: AnalyzedTweet, config: NormalizationConfig) -> AnalyzedTweet:
    """Normalize the lemma stream, keeping the POS stream aligned.

    A lemma that normalizes to several tokens has its POS tag replicated;
    one that normalizes away drops its POS tag. POS tags are collapsed via
    the config map (unknown tags pass through). Already-filtered records
    have independent streams and are normalized independently.
    """
    emoji_re = _emoji_regex(config.emoji_table)
    collapse = config.pos_collapse_map

    def collapse_tag(tag: str) -> str:
        return collapse.get(tag, tag)

    if analyzed.pos is None or analyzed.filtered:
        lemmas: list[str] = []
        for token in analyzed.lemmas:
            lemmas.extend(normalize_token(token, config, emoji_re))
        pos = tuple(collapse_tag(t) for t in analyzed.pos) if analyzed.pos is not None else None
        return replace(analyzed, lemmas=tuple(lemmas), pos=pos)

    lemmas = []
    pos_out: list[str] = []
    for token, tag in zip(analyzed.lemmas, analyzed.pos):
        pieces = normalize_token(token, config, emoji_re)
        lemmas.extend(pieces)
        pos_out.extend([collapse_tag(tag)] * len(pieces))
    return replace(analyzed, lemmas=tuple(lemmas), pos=tuple(pos_out))


def filter_stopwords(tokens: Sequence[str], stopwords: frozenset[str] | set[str]) -> list[str]:
    """Drop stopword tokens, preserving the order of survivors."""
    return [t for t in tokens if t not in stopwords]


def apply_stopwords(analyzed: AnalyzedTweet, stopwords: frozenset[str] | set[str]) -> AnalyzedTweet:
    """Stopword-filter the lemma stream only; the POS stream is never
    filtered. If that breaks alignment the record is marked ``filtered``."""
    lemmas = tuple(filter_stopwords(analyzed.lemmas, stopwords))
    if lemmas == analyzed.lemmas:
        return analyzed
    filtered = analyzed.filtered or (analyzed.pos is not None and len(analyzed.pos) != len(lemmas))
    return AnalyzedTweet(tweet=analyzed.tweet, lemmas=lemmas, pos=analyzed.pos, filtered=filtered)


def keyword_prefilter(tweets: Sequence[AnalyzedTweet], keywords: frozenset[str] | set[str]) -> list[AnalyzedTweet]:
    """Retain tweets whose token stream contains at least one keyword.

    Matching is exact and token-level on the normalized lemma stream; a
    keyword occurring only inside a longer token does not count.
    """
    if not keywords:
        raise DataError("keyword set is empty; omit the prefilter instead")
    keyset = set(keywords)
    return [t for t in tweets if keyset.intersection(t.lemmas)]


def blocked_keyword_filter(tweets: Sequence[AnalyzedTweet], blocked: frozenset[str] | set[str]) -> list[AnalyzedTweet]:
    """Drop tweets containing any blocked token (spam/porn bait lists)."""
    if not blocked:
        return list(tweets)
    blockset = set(blocked)
    return [t for t in tweets if not blockset.intersection(t.lemmas)]


def _letters_outside(token: str, ranges: tuple[tuple[int, int], ...]) -> bool:
    for ch in token:
        if unicodedata.category(ch).startswith("L"):
            cp = ord(ch)
            if not any(lo <= cp <= hi for lo, hi in ranges):
                return True
    return False


def script_filter(
    tweets: Sequence[AnalyzedTweet],
    allowed_scripts: tuple[tuple[int, int], ...],
) -> list[AnalyzedTweet]:
    """Drop tweets with any letter codepoint outside the allowed ranges.

    Substitution tokens (LINK, NUMBER, emojiN) are exempt; non-letter
    characters (digits, keep chars, symbols) are never checked.
    """
    out = []
    for tweet in tweets:
        bad = False
        for token in tweet.lemmas:
            if token in (LINK_TOKEN, NUMBER_TOKEN) or EMOJI_TOKEN_RE.fullmatch(token):
                continue
            if _letters_outside(token, allowed_scripts):
                bad = True
                break
        if not bad:
            out.append(tweet)
    return out


def dedup_key(lemmas: Sequence[str]) -> tuple[str, ...]:
    """Normalized token sequence with a leading retweet marker stripped.

    The marker is a literal "RT" token followed by an @-mention.
    """
    if len(lemmas) >= 2 and lemmas[0] == "RT" and lemmas[1].startswith("@"):
        return tuple(lemmas[2:])
    return tuple(lemmas)


def deduplicate(tweets: Sequence[AnalyzedTweet]) -> list[AnalyzedTweet]:
    """Keep the first occurrence (input order) of each dedup key."""
    seen: set[tuple[str, ...]] = set()
    out = []
    for tweet in tweets:
        key = dedup_key(tweet.lemmas)
        if key in seen:
            continue
        seen.add(key)
        out.append(tweet)
    return out


def stratified_sample(
    tweets: Sequence[AnalyzedTweet], batch_size: int, seed: int
) -> list[AnalyzedTweet]:
    """One uniform draw from each of ``batch_size`` contiguous timestamp
    strata of (near-)equal count. Deterministic given the seed."""
    if batch_size <= 0:
        raise DataError(f"batch_size must be > 0, got {batch_size}")
    n = len(tweets)
    if batch_size > n:
        raise DataError(f"batch_size {batch_size} exceeds corpus size {n}")
    order = sorted(range(n), key=lambda i: (tweets[i].tweet.timestamp, i))
    rng = np.random.default_rng(seed)
    picks = []
    for stratum in range(batch_size):
        lo = (stratum * n) // batch_size
        hi = ((stratum + 1) * n) // batch_size
        picks.append(order[int(rng.integers(lo, hi))])
    return [tweets[i] for i in picks]


def preprocess_corpus(
    records: Sequence[AnalyzedTweet],
    config: NormalizationConfig,
    keywords: frozenset[str] | set[str] | None = None,
    dedup: bool = True,
) -> list[AnalyzedTweet]:
    """The standard cleaning pipeline: normalize (emoji/URL/number/punct,
    POS collapse), drop blocked-keyword and out-of-script tweets, keyword
    prefilter, exact dedup on the normalized stream, then stopword removal.
    """
    out = [normalize_analyzed(t, config) for t in records]
    if config.blocked_keywords:
        out = blocked_keyword_filter(out, config.blocked_keywords)
    if config.allowed_scripts is not None:
        out = script_filter(out, config.allowed_scripts)
    if keywords is not None:
        out = keyword_prefilter(out, keywords)
    if dedup:
        out = deduplicate(out)
    if config.stopwords:
        out = [apply_stopwords(t, config.stopwords) for t in out]
    return out
