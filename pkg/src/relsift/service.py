"""Long-running annotation and filtering service.

Serves an uncertainty-ranked labeling queue, ingests human labels, retrains
after every ``retrain_batch`` labels, tracks the kappa-stabilization stopping
signal on a frozen stop set, and filters new records by score threshold.

State is plain files in a session directory: an append-only label log, an
append-only kappa history, whole-file model and vocabulary snapshots, and the
pool itself. A label is acknowledged only after its log line is flushed to
disk, and reloading the directory reproduces the session exactly: retraining
from the same log with the stored seed yields identical weights.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from . import features, harness, metrics, svm
from .errors import DataError
from .ingest import (
    AnalyzedTweet,
    NormalizationConfig,
    normalize_analyzed,
    parse_records,
    record_to_tweet,
    tweet_to_record,
    write_records,
)

logger = logging.getLogger(__name__)

POOL_FILE = "pool.jsonl"
HOLDOUT_FILE = "holdout.jsonl"
SESSION_FILE = "session.json"
LABEL_LOG = "labels.log"
KAPPA_LOG = "kappas.log"
MODEL_FILE = "model.txt"
VOCAB_FILE = "vocab.tsv"
META_FILE = "meta.json"
STOP_PREDS_FILE = "stop_predictions.txt"


@dataclass(frozen=True)
class SessionConfig:
    seed: int = 0
    retrain_batch: int = 50
    stop_threshold: float = 0.99
    stop_window: int = 3
    stop_set_size: int = 2000
    feature_preset: str = "lex1"
    min_count: int = 3
    C: float | None = None
    tolerance: float = 1e-3

    def feature_config(self) -> features.FeatureConfig:
        return features.preset(self.feature_preset, self.min_count)

    def train_config(self) -> svm.TrainConfig:
        return svm.TrainConfig(C=self.C, tolerance=self.tolerance, seed=self.seed)


@dataclass(frozen=True)
class LabelRecord:
    tweet_id: str
    label: int
    annotator: str
    timestamp: float

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise DataError(f"label must be 0 or 1, got {self.label!r}")
        if not self.annotator:
            raise DataError("annotator id must be nonempty")


@dataclass(frozen=True)
class ModelSnapshot:
    model: svm.LinearModel
    vocab: features.Vocabulary
    version: int
    holdout_metrics: dict[str, float] = field(default_factory=dict)


class AnnotationSession:
    """All state of one annotation effort, bound to a session directory.

    Thread-safe for concurrent label submissions and status queries: log
    appends are serialized behind a lock, readers use an immutable model
    snapshot that is swapped atomically after each retrain.
    """

    def __init__(
        self,
        directory: Path,
        pool: list[AnalyzedTweet],
        config: SessionConfig,
        stop_set_ids: list[str],
        holdout: list[AnalyzedTweet] | None = None,
    ):
        self.directory = directory
        self.config = config
        self.pool = pool
        self.holdout = holdout or []
        self._by_id = {t.tweet.id: t for t in pool}
        self._pool_index = {t.tweet.id: i for i, t in enumerate(pool)}
        self.stop_set_ids = stop_set_ids
        # training labels: last writer wins, ordered by first labeling
        self._labels: dict[str, int] = {}
        self._log_entries = 0
        self._labels_since_retrain = 0
        self.kappas: list[float] = []
        self.snapshot: ModelSnapshot | None = None
        self._stop_preds: list[int] | None = None
        self._cold_order = [
            pool[i].tweet.id
            for i in np.random.default_rng(harness.derive_seed(config.seed, "queue")).permutation(len(pool))
        ]
        self._log_lock = threading.Lock()
        self._retrain_lock = threading.Lock()
        self._log_fp = open(self.directory / LABEL_LOG, "a", encoding="utf-8")

    # -- construction ------------------------------------------------------

    @classmethod
    def create(
        cls,
        directory: str | Path,
        pool: Sequence[AnalyzedTweet],
        config: SessionConfig = SessionConfig(),
        holdout: Sequence[AnalyzedTweet] | None = None,
    ) -> "AnnotationSession":
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        if (directory / SESSION_FILE).exists():
            raise DataError(f"session already exists in {directory}")
        if not pool:
            raise DataError("cannot create a session with an empty pool")
        pool = list(pool)
        with open(directory / POOL_FILE, "w", encoding="utf-8") as fp:
            write_records(pool, fp)
        if holdout:
            with open(directory / HOLDOUT_FILE, "w", encoding="utf-8") as fp:
                write_records(holdout, fp)
        rng = np.random.default_rng(harness.derive_seed(config.seed, "stopset"))
        size = min(config.stop_set_size, len(pool))
        stop_ids = [pool[int(i)].tweet.id for i in rng.choice(len(pool), size=size, replace=False)]
        with open(directory / SESSION_FILE, "w", encoding="utf-8") as fp:
            json.dump({"config": asdict(config), "stop_set_ids": stop_ids}, fp, indent=2)
        return cls(directory, pool, config, stop_ids, list(holdout) if holdout else None)

    @classmethod
    def load(cls, directory: str | Path) -> "AnnotationSession":
        directory = Path(directory)
        try:
            with open(directory / SESSION_FILE, encoding="utf-8") as fp:
                stored = json.load(fp)
        except FileNotFoundError:
            raise DataError(f"no session in {directory}") from None
        config = SessionConfig(**stored["config"])
        with open(directory / POOL_FILE, encoding="utf-8") as fp:
            pool, issues = parse_records(fp)
        if issues:
            raise DataError(f"corrupt pool file: {issues[0].message}")
        holdout = None
        if (directory / HOLDOUT_FILE).exists():
            with open(directory / HOLDOUT_FILE, encoding="utf-8") as fp:
                holdout, _ = parse_records(fp)
        session = cls(directory, pool, config, stored["stop_set_ids"], holdout)
        session._replay_log()
        session._load_snapshot()
        return session

    def _replay_log(self) -> None:
        meta = self._read_meta()
        last_retrain_seq = meta.get("last_retrain_seq", 0)
        path = self.directory / LABEL_LOG
        if path.exists():
            with open(path, encoding="utf-8") as fp:
                for line in fp:
                    if not line.strip():
                        continue
                    entry = json.loads(line)
                    self._log_entries += 1
                    self._labels[entry["id"]] = entry["label"]
        self._labels_since_retrain = self._log_entries - last_retrain_seq
        kappa_path = self.directory / KAPPA_LOG
        if kappa_path.exists():
            with open(kappa_path, encoding="utf-8") as fp:
                self.kappas = [float(line.split("\t")[1]) for line in fp if line.strip()]

    def _read_meta(self) -> dict:
        path = self.directory / META_FILE
        if not path.exists():
            return {}
        with open(path, encoding="utf-8") as fp:
            return json.load(fp)

    def _load_snapshot(self) -> None:
        meta = self._read_meta()
        if not meta.get("model_version"):
            return
        with open(self.directory / VOCAB_FILE, encoding="utf-8") as fp:
            vocab = features.load_vocabulary(fp, self.config.feature_config())
        with open(self.directory / MODEL_FILE, encoding="utf-8") as fp:
            model = svm.load_model(fp, vocab_size=len(vocab))
        self.snapshot = ModelSnapshot(
            model=model,
            vocab=vocab,
            version=meta["model_version"],
            holdout_metrics=meta.get("holdout_metrics", {}),
        )
        preds_path = self.directory / STOP_PREDS_FILE
        if preds_path.exists():
            with open(preds_path, encoding="utf-8") as fp:
                preds = {line.split("\t")[0]: int(line.split("\t")[1]) for line in fp if line.strip()}
            self._stop_preds = [preds[tid] for tid in self.stop_set_ids]

    # -- queue -------------------------------------------------------------

    def unlabeled_ids(self) -> list[str]:
        return [t.tweet.id for t in self.pool if t.tweet.id not in self._labels]

    def next_batch(self, n: int) -> tuple[list[AnalyzedTweet], str]:
        """The n most uncertain unlabeled tweets (cold start: seeded random
        order). Returns (batch, status)."""
        if n <= 0:
            raise DataError(f"n must be > 0, got {n}")
        unlabeled = self.unlabeled_ids()
        if not unlabeled:
            return [], "pool exhausted"
        snapshot = self.snapshot
        if snapshot is None:
            labeled = self._labels
            ordered = [tid for tid in self._cold_order if tid not in labeled]
        else:
            vectors = [features.vectorize(self._by_id[tid], snapshot.vocab) for tid in unlabeled]
            ranking = sorted(
                range(len(unlabeled)),
                key=lambda i: (abs(svm.score(snapshot.model, vectors[i])), self._pool_index[unlabeled[i]]),
            )
            ordered = [unlabeled[i] for i in ranking]
        return [self._by_id[tid] for tid in ordered[:n]], "ok"

    # -- labeling & retraining ----------------------------------------------

    def submit_label(self, record: LabelRecord) -> dict:
        """Durably append one label; retrain when the batch threshold is hit."""
        if record.tweet_id not in self._by_id:
            raise DataError(f"unknown tweet id: {record.tweet_id}")
        with self._log_lock:
            superseded = record.tweet_id in self._labels
            line = json.dumps(
                {
                    "seq": self._log_entries + 1,
                    "id": record.tweet_id,
                    "label": record.label,
                    "annotator": record.annotator,
                    "ts": record.timestamp,
                }
            )
            self._log_fp.write(line + "\n")
            self._log_fp.flush()
            os.fsync(self._log_fp.fileno())
            self._log_entries += 1
            self._labels[record.tweet_id] = record.label
            self._labels_since_retrain += 1
            due = self._labels_since_retrain >= self.config.retrain_batch
        retrained = False
        if due:
            retrained = self._maybe_retrain()
        return {
            "ack": True,
            "labeled_count": len(self._labels),
            "retrain_scheduled": bool(due),
            "retrained": retrained,
            "superseded": superseded,
        }

    def _training_set(self, up_to_seq: int | None = None) -> list[tuple[AnalyzedTweet, int]]:
        """Labeled tweets in order of first labeling, last label winning,
        replayed from the log (optionally only its first ``up_to_seq`` lines)."""
        latest: dict[str, int] = {}
        order: list[str] = []
        with open(self.directory / LABEL_LOG, encoding="utf-8") as fp:
            for line in fp:
                if not line.strip():
                    continue
                entry = json.loads(line)
                if up_to_seq is not None and entry["seq"] > up_to_seq:
                    break
                if entry["id"] not in latest:
                    order.append(entry["id"])
                latest[entry["id"]] = entry["label"]
        return [(self._by_id[tid], latest[tid]) for tid in order]

    def _maybe_retrain(self) -> bool:
        if not self._retrain_lock.acquire(blocking=False):
            return False  # a retrain is already running; labels queue for the next cycle
        try:
            return self._retrain()
        finally:
            self._retrain_lock.release()

    def _retrain(self) -> bool:
        with self._log_lock:
            retrain_seq = self._log_entries
        training = self._training_set(up_to_seq=retrain_seq)
        labels = {label for _, label in training}
        if len(labels) < 2:
            logger.info("retrain postponed: only one class labeled so far")
            return False
        tweets = [t for t, _ in training]
        vocab = features.build_vocabulary(tweets, self.config.feature_config())
        examples = [
            (features.vectorize(t, vocab), 1 if label == 1 else -1) for t, label in training
        ]
        model = svm.train(examples, self.config.train_config())
        version = (self.snapshot.version if self.snapshot else 0) + 1

        stop_preds = [
            svm.classify(model, features.vectorize(self._by_id[tid], vocab))
            for tid in self.stop_set_ids
        ]
        if self._stop_preds is not None:
            kappa = metrics.cohen_kappa(self._stop_preds, stop_preds)
            self.kappas.append(kappa)
            with open(self.directory / KAPPA_LOG, "a", encoding="utf-8") as fp:
                fp.write(f"{version}\t{kappa!r}\n")
                fp.flush()
                os.fsync(fp.fileno())
        self._stop_preds = stop_preds

        holdout_metrics: dict[str, float] = {}
        if self.holdout:
            golds = [harness.signed_label(t) for t in self.holdout]
            preds = [svm.classify(model, features.vectorize(t, vocab)) for t in self.holdout]
            result = metrics.prf(metrics.ConfusionCounts.from_pairs(list(zip(golds, preds))))
            holdout_metrics = {
                "precision": result.precision,
                "recall": result.recall,
                "f1": result.f1,
            }

        self._write_snapshot_files(model, vocab, version, retrain_seq, stop_preds, holdout_metrics)
        self.snapshot = ModelSnapshot(model, vocab, version, holdout_metrics)
        with self._log_lock:
            self._labels_since_retrain = self._log_entries - retrain_seq
        logger.info("retrained model v%d on %d labels", version, len(training))
        return True

    def _write_snapshot_files(self, model, vocab, version, retrain_seq, stop_preds, holdout_metrics) -> None:
        def replace_with(name: str, writer) -> None:
            tmp = self.directory / (name + ".tmp")
            with open(tmp, "w", encoding="utf-8") as fp:
                writer(fp)
                fp.flush()
                os.fsync(fp.fileno())
            os.replace(tmp, self.directory / name)

        replace_with(MODEL_FILE, lambda fp: svm.save_model(model, fp))
        replace_with(VOCAB_FILE, lambda fp: features.save_vocabulary(vocab, fp))
        replace_with(
            STOP_PREDS_FILE,
            lambda fp: fp.writelines(
                f"{tid}\t{pred}\n" for tid, pred in zip(self.stop_set_ids, stop_preds)
            ),
        )
        replace_with(
            META_FILE,
            lambda fp: json.dump(
                {
                    "model_version": version,
                    "last_retrain_seq": retrain_seq,
                    "holdout_metrics": holdout_metrics,
                },
                fp,
            ),
        )

    def rebuild_model_from_log(self) -> svm.LinearModel:
        """Retrain from the persisted label log alone, replaying exactly the
        prefix the current snapshot was trained on; yields identical weights."""
        meta = self._read_meta()
        if not meta.get("model_version"):
            raise DataError("untrained session: nothing to rebuild")
        training = self._training_set(up_to_seq=meta["last_retrain_seq"])
        tweets = [t for t, _ in training]
        vocab = features.build_vocabulary(tweets, self.config.feature_config())
        examples = [
            (features.vectorize(t, vocab), 1 if label == 1 else -1) for t, label in training
        ]
        return svm.train(examples, self.config.train_config())

    # -- status & filtering -------------------------------------------------

    def stop_recommended(self) -> bool:
        return (
            harness.stopping_check(self.kappas, self.config.stop_threshold, self.config.stop_window)
            is not None
        )

    def status(self) -> dict:
        snapshot = self.snapshot
        report = {
            "labeled": len(self._labels),
            "remaining": len(self.pool) - len(self._labels),
            "kappas": list(self.kappas),
            "stop_recommended": self.stop_recommended(),
            "model_version": snapshot.version if snapshot else 0,
        }
        if snapshot and snapshot.holdout_metrics:
            report["holdout_metrics"] = snapshot.holdout_metrics
        return report

    def filter(
        self,
        tweets: Sequence[AnalyzedTweet],
        threshold: float,
        limit: int | None = None,
    ) -> tuple[list[tuple[AnalyzedTweet, float]], list[tuple[AnalyzedTweet, float]], list[tuple[AnalyzedTweet, float]]]:
        """Partition into (relevant, irrelevant, uncertain) by score.

        relevant: score >= threshold, sorted by descending score (capped at
        ``limit``); irrelevant: score <= -threshold; uncertain: |score| <
        threshold. With threshold 0 nothing is uncertain.
        """
        snapshot = self.snapshot
        if snapshot is None:
            raise DataError("untrained session")
        if threshold < 0:
            raise DataError("threshold must be >= 0")
        relevant, irrelevant, uncertain = [], [], []
        for t in tweets:
            s = svm.score(snapshot.model, features.vectorize(t, snapshot.vocab))
            if s >= threshold:
                relevant.append((t, s))
            elif s <= -threshold:
                irrelevant.append((t, s))
            else:
                uncertain.append((t, s))
        relevant.sort(key=lambda pair: -pair[1])
        if limit is not None:
            relevant = relevant[: max(limit, 0)]
        return relevant, irrelevant, uncertain

    def close(self) -> None:
        self._log_fp.close()


def create_app(
    session: AnnotationSession,
    curve_file: str | Path | None = None,
    sweep_file: str | Path | None = None,
    frontend_dir: str | Path | None = None,
):
    """FastAPI app exposing the annotation API over the session."""
    app = FastAPI(title="relsift annotation service")

    def error(status: int, message: str) -> JSONResponse:
        return JSONResponse(status_code=status, content={"error": message})

    @app.get("/queue/next")
    def queue_next(n: int = 10):
        if n <= 0:
            return error(400, "n must be a positive integer")
        batch, status = session.next_batch(n)
        payload = [{"id": t.tweet.id, "text": t.tweet.text} for t in batch]
        headers = {"X-Pool-Status": "exhausted"} if status == "pool exhausted" else {}
        return JSONResponse(content=payload, headers=headers)

    @app.post("/labels")
    async def post_label(request: Request):
        try:
            body = await request.json()
        except Exception:
            return error(400, "body must be a JSON object")
        if not isinstance(body, dict):
            return error(400, "body must be a JSON object")
        missing = [k for k in ("id", "label", "annotator") if k not in body]
        if missing:
            return error(400, f"missing fields: {', '.join(missing)}")
        if body["label"] not in (0, 1):
            return error(400, f"label must be 0 or 1, got {body['label']!r}")
        if not isinstance(body["annotator"], str) or not body["annotator"]:
            return error(400, "annotator must be a nonempty string")
        record = LabelRecord(
            tweet_id=str(body["id"]),
            label=int(body["label"]),
            annotator=body["annotator"],
            timestamp=time.time(),
        )
        try:
            return session.submit_label(record)
        except DataError as exc:
            if "unknown tweet id" in str(exc):
                return error(404, str(exc))
            return error(400, str(exc))

    @app.get("/status")
    def get_status():
        return session.status()

    @app.post("/filter")
    async def post_filter(request: Request, threshold: float = 0.0, limit: int | None = None):
        try:
            body = await request.json()
        except Exception:
            return error(400, "body must be a JSON array of tweet records")
        if not isinstance(body, list):
            return error(400, "body must be a JSON array of tweet records")
        tweets = []
        for i, record in enumerate(body):
            if isinstance(record, dict) and "ts" not in record:
                record = {**record, "ts": 0}  # filtering does not need timestamps
            try:
                tweets.append(record_to_tweet(record))
            except DataError as exc:
                return error(400, f"record {i}: {exc}")
        try:
            relevant, irrelevant, uncertain = session.filter(tweets, threshold, limit)
        except DataError as exc:
            return error(409, str(exc))

        def render(pairs):
            return [{**tweet_to_record(t), "score": s} for t, s in pairs]

        return {
            "relevant": render(relevant),
            "irrelevant": render(irrelevant),
            "uncertain_count": len(uncertain),
        }

    def file_endpoint(path: str | Path | None, label: str):
        if path is None or not Path(path).exists():
            return error(404, f"no {label} data; run the `{label}` command first")
        return PlainTextResponse(Path(path).read_text(encoding="utf-8"))

    @app.get("/curve")
    def get_curve():
        return file_endpoint(curve_file, "curve")

    @app.get("/sweep")
    def get_sweep():
        return file_endpoint(sweep_file, "sweep")

    if frontend_dir is not None and Path(frontend_dir).exists():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True), name="ui")

    return app


def load_or_create_session(
    directory: str | Path,
    pool_records: str | Path | None = None,
    config: SessionConfig = SessionConfig(),
    normalization: NormalizationConfig | None = None,
) -> AnnotationSession:
    """Load an existing session directory, or create one from a pool file."""
    directory = Path(directory)
    if (directory / SESSION_FILE).exists():
        return AnnotationSession.load(directory)
    if pool_records is None:
        raise DataError(f"no session in {directory} and no pool file given")
    with open(pool_records, encoding="utf-8") as fp:
        pool, issues = parse_records(fp)
    for issue in issues:
        logger.warning("pool line %d: %s", issue.line, issue.message)
    if normalization is not None:
        pool = [normalize_analyzed(t, normalization) for t in pool]
    return AnnotationSession.create(directory, pool, config)
