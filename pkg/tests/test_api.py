from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

import synthetic
from threatmon.ioc import validate_event_json
from threatmon.service import pipeline as pl
from threatmon.service.api import create_app

from test_pipeline import ASSET_LINES, SECURITY_WORDS


@pytest.fixture(scope="module")
def env(tmp_path_factory):
    root = tmp_path_factory.mktemp("api")
    assets = root / "assets.txt"
    assets.write_text(ASSET_LINES + "\n")
    security = root / "security.txt"
    security.write_text("# rho = 0.2\n" + "\n".join(SECURITY_WORDS.split()) + "\n")
    config = pl.PipelineConfig(
        asset_keywords_file=assets,
        security_keywords_file=security,
        feature_dimension=128,
    )
    trained = pl.train(
        config, synthetic.generate_labeled_corpus(seed=7, relevant=80, irrelevant=80)
    )
    return config, trained.bundle


@pytest.fixture()
def client(env):
    config, bundle = env
    pipeline = pl.Pipeline(
        config, pl.ModelBundle(bundle.tfidf, bundle.classifier, bundle.classifier_kind)
    )
    return TestClient(create_app(pipeline))


def _post_body(post_id: str, text: str, minutes: float = 0.0) -> dict:
    post = synthetic.make_post(post_id, text, minutes)
    return {
        "id": post.id,
        "author": post.author,
        "timestamp": post.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ"),
        "text": post.text,
    }


THREAT = "Vuln: Cisco irisrail Web Security Appliance HTTP POST Denial of Service Vulnerability"


class TestReadEndpoints:
    def test_health(self, client):
        data = client.get("/health").json()
        assert data["status"] == "ok"
        assert data["posts"] == 0

    def test_clusters_empty_state(self, client):
        response = client.get("/clusters")
        assert response.status_code == 200
        assert response.json() == []

    def test_cluster_listing_after_ingest(self, client):
        assert client.post("/posts", json=_post_body("a", THREAT)).status_code == 200
        assert client.post("/posts", json=_post_body("b", THREAT + " #infosec", 5)).status_code == 200
        clusters = client.get("/clusters").json()
        assert len(clusters) == 1
        assert clusters[0]["member_count"] == 2
        assert clusters[0]["exemplar_text"].startswith("Vuln: Cisco")
        detail = client.get(f"/clusters/{clusters[0]['id']}").json()
        assert len(detail["members"]) == 2

    def test_unknown_cluster_404(self, client):
        assert client.get("/clusters/99").status_code == 404
        assert client.get("/iocs/99").status_code == 404

    def test_ioc_endpoint_serves_schema_valid_event(self, client):
        client.post("/posts", json=_post_body("a", THREAT))
        cid = client.get("/clusters").json()[0]["id"]
        event = client.get(f"/iocs/{cid}").json()
        validate_event_json(event)
        assert any("DoS" in tag["name"] for tag in event["Event"]["Tag"])

    def test_metrics_and_reports(self, client):
        client.post("/posts", json=_post_body("a", THREAT))
        assert client.get("/metrics/daily").status_code == 200
        assert client.get("/reports/durations").status_code == 200
        reduction = client.get("/reports/reduction")
        assert reduction.status_code == 200
        assert reduction.json()["total_collected"] == 1


class TestWriteEndpoints:
    def test_post_push_and_duplicate(self, client):
        body = _post_body("a", THREAT)
        assert client.post("/posts", json=body).status_code == 200
        assert client.post("/posts", json=body).status_code == 409

    def test_malformed_post_400(self, client):
        assert client.post("/posts", json={"id": "x"}).status_code == 400
        assert (
            client.post(
                "/posts", json={"id": "x", "timestamp": "garbage", "text": "t"}
            ).status_code
            == 400
        )

    def test_label_roundtrip(self, client):
        client.post("/posts", json=_post_body("a", THREAT))
        response = client.post("/labels", json={"post_id": "a", "label": "irrelevant"})
        assert response.status_code == 200
        echoed = client.get("/labels/a").json()
        assert echoed["label"] == "irrelevant"
        assert echoed["post_id"] == "a"

    def test_duplicate_label_409_idempotent(self, client):
        client.post("/posts", json=_post_body("a", THREAT))
        client.post("/labels", json={"post_id": "a", "label": "irrelevant"})
        again = client.post("/labels", json={"post_id": "a", "label": "irrelevant"})
        assert again.status_code == 409
        assert client.get("/labels/a").json()["label"] == "irrelevant"
        flip = client.post("/labels", json={"post_id": "a", "label": "relevant"})
        assert flip.status_code == 200

    def test_label_unknown_post_404(self, client):
        assert (
            client.post("/labels", json={"post_id": "ghost", "label": "relevant"}).status_code
            == 404
        )

    def test_label_bad_value_400(self, client):
        client.post("/posts", json=_post_body("a", THREAT))
        assert (
            client.post("/labels", json={"post_id": "a", "label": "maybe"}).status_code == 400
        )

    def test_queue_and_retrain_flow(self, client):
        for i in range(12):
            client.post(
                "/posts",
                json=_post_body(
                    f"t{i}",
                    f"Vuln: Linux corejet kernel module{i} Heap Overflow Exploit CVE-2016-{4000+i}",
                    minutes=float(i),
                ),
            )
            client.post(
                "/posts",
                json=_post_body(
                    f"b{i}", f"Linux release party photos are up on the blog {i}", minutes=50.0 + i
                ),
            )
        queue = client.get("/queue", params={"source": "filtered"}).json()
        assert len(queue) == 24
        for i in range(12):
            client.post("/labels", json={"post_id": f"t{i}", "label": "relevant"})
            client.post("/labels", json={"post_id": f"b{i}", "label": "irrelevant"})
        response = client.post("/retrain", json={})
        assert response.status_code == 200
        assert response.json()["examples"] == 24
        assert client.get("/health").json()["model_versions"] == 1

    def test_retrain_without_labels_400(self, client):
        assert client.post("/retrain", json={}).status_code == 400

    def test_queue_bad_source_400(self, client):
        assert client.get("/queue", params={"source": "weird"}).status_code == 400
