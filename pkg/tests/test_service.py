import json

import pytest
from fastapi.testclient import TestClient

from relsift.errors import DataError
from relsift.service import (
    AnnotationSession,
    LabelRecord,
    SessionConfig,
    create_app,
    load_or_create_session,
)
from synthetic import make_two_cluster_corpus

CONFIG = SessionConfig(seed=3, retrain_batch=20, min_count=1, C=1.0, stop_set_size=100)


def make_session(tmp_path, n=200, config=CONFIG, holdout=None):
    pool = make_two_cluster_corpus(n, seed=1)
    return AnnotationSession.create(tmp_path / "session", pool, config, holdout=holdout), pool


def label_of(tweet) -> int:
    return tweet.tweet.label


class TestQueue:
    def test_cold_start_is_seeded_random_and_stable(self, tmp_path):
        session, _ = make_session(tmp_path)
        first, status = session.next_batch(5)
        again, _ = session.next_batch(5)
        assert status == "ok"
        assert [t.tweet.id for t in first] == [t.tweet.id for t in again]

    def test_with_model_returns_minimum_score_item(self, tmp_path):
        session, pool = make_session(tmp_path)
        for tweet in pool[:40]:
            session.submit_label(LabelRecord(tweet.tweet.id, label_of(tweet), "ann", 0.0))
        assert session.snapshot is not None
        batch, _ = session.next_batch(1)
        import relsift.features as features
        import relsift.svm as svm

        snap = session.snapshot
        scores = {
            tid: abs(svm.score(snap.model, features.vectorize(session._by_id[tid], snap.vocab)))
            for tid in session.unlabeled_ids()
        }
        assert scores[batch[0].tweet.id] == min(scores.values())

    def test_never_returns_labeled_ids(self, tmp_path):
        session, pool = make_session(tmp_path)
        labeled = set()
        for tweet in pool[:50]:
            session.submit_label(LabelRecord(tweet.tweet.id, label_of(tweet), "ann", 0.0))
            labeled.add(tweet.tweet.id)
        batch, _ = session.next_batch(30)
        assert not labeled & {t.tweet.id for t in batch}

    def test_clamps_to_remainder_and_reports_exhaustion(self, tmp_path):
        session, pool = make_session(tmp_path, n=10, config=CONFIG)
        batch, _ = session.next_batch(50)
        assert len(batch) == 10
        for tweet in pool:
            session.submit_label(LabelRecord(tweet.tweet.id, label_of(tweet), "ann", 0.0))
        batch, status = session.next_batch(3)
        assert batch == [] and status == "pool exhausted"


class TestLabeling:
    def test_ack_counts_distinct_ids(self, tmp_path):
        session, pool = make_session(tmp_path)
        first = session.submit_label(LabelRecord(pool[0].tweet.id, 1, "a", 0.0))
        assert first == {
            "ack": True, "labeled_count": 1, "retrain_scheduled": False,
            "retrained": False, "superseded": False,
        }
        duplicate = session.submit_label(LabelRecord(pool[0].tweet.id, 0, "b", 1.0))
        assert duplicate["superseded"] and duplicate["labeled_count"] == 1

    def test_unknown_id_rejected(self, tmp_path):
        session, _ = make_session(tmp_path)
        with pytest.raises(DataError, match="unknown tweet id"):
            session.submit_label(LabelRecord("nope", 1, "a", 0.0))

    def test_bad_label_rejected(self):
        with pytest.raises(DataError):
            LabelRecord("x", 2, "a", 0.0)

    def test_retrain_fires_on_batch_boundary(self, tmp_path):
        session, pool = make_session(tmp_path)
        for i, tweet in enumerate(pool[:20]):
            ack = session.submit_label(LabelRecord(tweet.tweet.id, label_of(tweet), "a", 0.0))
            assert ack["retrain_scheduled"] == (i == 19)
        assert session.snapshot is not None and session.snapshot.version == 1

    def test_single_class_retrain_postponed_then_recovers(self, tmp_path):
        session, pool = make_session(tmp_path)
        positives = [t for t in pool if label_of(t) == 1][:20]
        for tweet in positives:
            ack = session.submit_label(LabelRecord(tweet.tweet.id, 1, "a", 0.0))
        assert ack["retrain_scheduled"] and not ack["retrained"]
        assert session.snapshot is None
        negative = next(t for t in pool if label_of(t) == 0)
        ack = session.submit_label(LabelRecord(negative.tweet.id, 0, "a", 0.0))
        assert ack["retrained"] and session.snapshot.version == 1

    def test_kappa_appends_after_second_retrain(self, tmp_path):
        session, pool = make_session(tmp_path)
        for tweet in pool[:40]:
            session.submit_label(LabelRecord(tweet.tweet.id, label_of(tweet), "a", 0.0))
        assert session.snapshot.version == 2
        assert len(session.kappas) == 1

    def test_holdout_metrics_in_status(self, tmp_path):
        holdout = make_two_cluster_corpus(50, seed=9)
        session, pool = make_session(tmp_path, holdout=holdout)
        for tweet in pool[:20]:
            session.submit_label(LabelRecord(tweet.tweet.id, label_of(tweet), "a", 0.0))
        status = session.status()
        assert 0.0 <= status["holdout_metrics"]["f1"] <= 1.0


class TestStatus:
    def test_fresh_session(self, tmp_path):
        session, pool = make_session(tmp_path)
        status = session.status()
        assert status == {
            "labeled": 0, "remaining": len(pool), "kappas": [],
            "stop_recommended": False, "model_version": 0,
        }

    def test_stop_recommendation_rules(self, tmp_path):
        session, _ = make_session(tmp_path)
        session.kappas = [0.991, 0.993, 0.995]
        assert session.status()["stop_recommended"]
        session.kappas = [0.991, 0.98, 0.995]
        assert not session.status()["stop_recommended"]


class TestFilter:
    def trained_session(self, tmp_path):
        session, pool = make_session(tmp_path)
        for tweet in pool[:60]:
            session.submit_label(LabelRecord(tweet.tweet.id, label_of(tweet), "a", 0.0))
        return session, pool

    def test_untrained_session_rejected(self, tmp_path):
        session, pool = make_session(tmp_path)
        with pytest.raises(DataError, match="untrained session"):
            session.filter(pool[:5], threshold=0.5)

    def test_partition_properties(self, tmp_path):
        session, pool = self.trained_session(tmp_path)
        incoming = make_two_cluster_corpus(80, seed=33)
        relevant, irrelevant, uncertain = session.filter(incoming, threshold=0.4)
        ids = [t.tweet.id for t, _ in relevant + irrelevant + uncertain]
        assert sorted(ids) == sorted(t.tweet.id for t in incoming)
        assert all(s >= 0.4 for _, s in relevant)
        assert all(s <= -0.4 for _, s in irrelevant)
        assert all(abs(s) < 0.4 for _, s in uncertain)
        rel_scores = [s for _, s in relevant]
        assert rel_scores == sorted(rel_scores, reverse=True)

    def test_zero_threshold_has_no_uncertain(self, tmp_path):
        session, _ = self.trained_session(tmp_path)
        incoming = make_two_cluster_corpus(40, seed=34)
        _, _, uncertain = session.filter(incoming, threshold=0.0)
        assert uncertain == []

    def test_limit_caps_relevant(self, tmp_path):
        session, _ = self.trained_session(tmp_path)
        incoming = make_two_cluster_corpus(100, seed=35)
        relevant, _, _ = session.filter(incoming, threshold=0.0, limit=5)
        assert len(relevant) == 5


class TestDurability:
    def test_restart_reproduces_state_and_weights(self, tmp_path):
        session, pool = make_session(tmp_path)
        for tweet in pool[:47]:
            session.submit_label(LabelRecord(tweet.tweet.id, label_of(tweet), "a", 0.0))
        before = session.status()
        weights_before = dict(session.snapshot.model.weights)
        session.close()

        reloaded = AnnotationSession.load(tmp_path / "session")
        assert reloaded.status() == before
        assert reloaded.snapshot.model.weights == weights_before
        assert reloaded.snapshot.model.bias == session.snapshot.model.bias
        # counter survives: 7 labels past the last retrain at 40
        assert reloaded._labels_since_retrain == 7
        # retraining purely from the log reproduces the snapshot weights
        rebuilt = reloaded.rebuild_model_from_log()
        assert rebuilt.weights == weights_before

    def test_kappa_history_survives_restart(self, tmp_path):
        session, pool = make_session(tmp_path)
        for tweet in pool[:60]:
            session.submit_label(LabelRecord(tweet.tweet.id, label_of(tweet), "a", 0.0))
        assert len(session.kappas) == 2
        session.close()
        reloaded = AnnotationSession.load(tmp_path / "session")
        assert reloaded.kappas == session.kappas

    def test_create_refuses_to_overwrite(self, tmp_path):
        make_session(tmp_path)
        with pytest.raises(DataError, match="already exists"):
            AnnotationSession.create(tmp_path / "session", make_two_cluster_corpus(10, seed=2), CONFIG)


class TestHttpApi:
    def client(self, tmp_path, **kwargs):
        session, pool = make_session(tmp_path)
        app = create_app(session, **kwargs)
        return TestClient(app), session, pool

    def test_queue_next(self, tmp_path):
        client, _, _ = self.client(tmp_path)
        response = client.get("/queue/next?n=3")
        assert response.status_code == 200
        items = response.json()
        assert len(items) == 3 and set(items[0]) == {"id", "text"}

    def test_queue_rejects_bad_n(self, tmp_path):
        client, _, _ = self.client(tmp_path)
        assert client.get("/queue/next?n=0").status_code == 400
        assert "error" in client.get("/queue/next?n=0").json()

    def test_label_flow(self, tmp_path):
        client, _, pool = self.client(tmp_path)
        body = {"id": pool[0].tweet.id, "label": 1, "annotator": "ui"}
        response = client.post("/labels", json=body)
        assert response.status_code == 200
        assert response.json()["ack"] and response.json()["labeled_count"] == 1

    def test_label_validation_errors(self, tmp_path):
        client, _, pool = self.client(tmp_path)
        assert client.post("/labels", json={"id": "x"}).status_code == 400
        assert client.post("/labels", json={"id": "x", "label": 5, "annotator": "a"}).status_code == 400
        missing = client.post("/labels", json={"id": "zzz", "label": 1, "annotator": "a"})
        assert missing.status_code == 404 and "error" in missing.json()

    def test_status_endpoint(self, tmp_path):
        client, _, _ = self.client(tmp_path)
        body = client.get("/status").json()
        assert set(body) >= {"labeled", "remaining", "kappas", "stop_recommended", "model_version"}

    def test_filter_endpoint(self, tmp_path):
        client, session, pool = self.client(tmp_path)
        for tweet in pool[:40]:
            session.submit_label(LabelRecord(tweet.tweet.id, label_of(tweet), "a", 0.0))
        records = [{"id": f"new-{i}", "text": t.tweet.text} for i, t in enumerate(make_two_cluster_corpus(10, seed=5))]
        response = client.post("/filter?threshold=0.2&limit=3", json=records)
        assert response.status_code == 200
        body = response.json()
        assert set(body) == {"relevant", "irrelevant", "uncertain_count"}
        assert len(body["relevant"]) <= 3

    def test_filter_untrained_409(self, tmp_path):
        client, _, _ = self.client(tmp_path)
        response = client.post("/filter?threshold=0.5", json=[{"id": "a", "text": "x"}])
        assert response.status_code == 409

    def test_curve_and_sweep_endpoints(self, tmp_path):
        curve_file = tmp_path / "curve.tsv"
        curve_file.write_text("active\t0\t10\t1\t1\t1\tNA\t0\n")
        client, _, _ = self.client(tmp_path, curve_file=curve_file)
        assert client.get("/curve").text.startswith("active\t0")
        missing = client.get("/sweep")
        assert missing.status_code == 404 and "error" in missing.json()


def test_load_or_create_round_trip(tmp_path):
    pool_file = tmp_path / "pool.jsonl"
    corpus = make_two_cluster_corpus(30, seed=4)
    with open(pool_file, "w", encoding="utf-8") as fp:
        from relsift.ingest import write_records

        write_records(corpus, fp)
    session = load_or_create_session(tmp_path / "s", pool_file, CONFIG)
    assert len(session.pool) == 30
    session.close()
    again = load_or_create_session(tmp_path / "s")
    assert len(again.pool) == 30
