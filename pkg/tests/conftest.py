import pytest

from relsift.ingest import AnalyzedTweet, NormalizationConfig, Tweet


@pytest.fixture
def plain_config() -> NormalizationConfig:
    return NormalizationConfig()


def make_tweet(tid: str, text: str, ts: int = 0, label: int | None = None,
               lemmas: tuple[str, ...] | None = None,
               pos: tuple[str, ...] | None = None) -> AnalyzedTweet:
    tweet = Tweet(id=tid, timestamp=ts, text=text, label=label)
    return AnalyzedTweet(tweet=tweet, lemmas=lemmas if lemmas is not None else tuple(text.split()), pos=pos)
