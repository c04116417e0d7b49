import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from gridsight.manifest import SampleRecord, write_manifest
from gridsight.service import (
    ReviewVerdict,
    ServiceConfig,
    create_app,
    export_relabeled_manifest,
    read_review_log,
    replay_statuses,
)

def _png_bytes(size=32, value=128):
    import io

    from PIL import Image

    arr = np.full((size, size, 3), value, dtype=np.uint8)
    arr[:, size // 2 :] = 255
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


PNG = _png_bytes()


def build_fixture(tmp_path, n_flagged=13):
    """A manifest + evaluation report with n_flagged class-2 predictions."""
    img_dir = tmp_path / "imgs"
    img_dir.mkdir()
    records = []
    flagged = []
    for i in range(n_flagged + 3):
        path = img_dir / f"s{i:03d}.png"
        path.write_bytes(PNG)
        label = 2 if i < n_flagged else 0
        rec = SampleRecord(id=f"s{i:03d}", path=str(path), lat=37.0 + i * 0.001, lon=-122.0, label=label)
        records.append(rec)
        if i < n_flagged:
            conf2 = 0.9 - 0.01 * i
            flagged.append(
                {
                    "id": rec.id,
                    "lat": rec.lat,
                    "lon": rec.lon,
                    "path": rec.path,
                    "predicted": 2,
                    "label": rec.label,
                    "confidences": [0.05, 1.0 - conf2 - 0.05, conf2],
                    "votes": [2, 2, 2],
                }
            )
    manifest = tmp_path / "manifest.jsonl"
    write_manifest(manifest, records)
    report = {
        "confusion": [[3, 0, 0], [0, 0, 0], [0, 0, n_flagged]],
        "per_class_accuracy": [1.0, 0.0, 1.0],
        "overall": 1.0,
        "flagged": flagged,
    }
    report_path = tmp_path / "report.json"
    report_path.write_text(json.dumps(report))
    return manifest, report_path, records


@pytest.fixture()
def client(tmp_path):
    manifest, report, _ = build_fixture(tmp_path)
    app = create_app(ServiceConfig(manifest_path=str(manifest), report_path=str(report), out_dir=str(tmp_path / "triage")))
    return TestClient(app)


class TestFlaggedListing:
    def test_empty_when_no_flags(self, tmp_path):
        manifest, report, _ = build_fixture(tmp_path, n_flagged=0)
        app = create_app(ServiceConfig(manifest_path=str(manifest), report_path=str(report), out_dir=str(tmp_path / "t")))
        c = TestClient(app)
        page = c.get("/api/flagged").json()
        assert page == {"items": [], "total": 0}

    def test_pagination_metadata(self, client):
        page = client.get("/api/flagged", params={"limit": 5}).json()
        assert len(page["items"]) == 5
        assert page["total"] == 13

    def test_ordering_by_confidence_desc(self, client):
        page = client.get("/api/flagged", params={"limit": 50}).json()
        confs = [item["confidences"][2] for item in page["items"]]
        assert confs == sorted(confs, reverse=True)

    def test_status_filter(self, client):
        client.post("/api/reviews", json={"sample_id": "s000", "verdict": "confirm"})
        pending = client.get("/api/flagged", params={"status": "pending"}).json()
        confirmed = client.get("/api/flagged", params={"status": "confirmed"}).json()
        assert pending["total"] == 12
        assert confirmed["total"] == 1
        assert confirmed["items"][0]["id"] == "s000"


class TestReviews:
    def test_confirm_updates_status(self, client):
        r = client.post("/api/reviews", json={"sample_id": "s001", "verdict": "confirm"})
        assert r.status_code == 200
        assert r.json()["status"] == "confirmed"

    def test_relabel_requires_and_applies_label(self, client):
        r = client.post("/api/reviews", json={"sample_id": "s002", "verdict": "relabel", "new_label": 0})
        assert r.status_code == 200
        body = r.json()
        assert body["status"] == "relabeled" and body["new_label"] == 0

    def test_unknown_sample_404(self, client):
        r = client.post("/api/reviews", json={"sample_id": "nope", "verdict": "confirm"})
        assert r.status_code == 404

    def test_malformed_verdict_400(self, client):
        assert client.post("/api/reviews", json={"sample_id": "s001", "verdict": "maybe"}).status_code == 400
        assert client.post("/api/reviews", json={"sample_id": "s001", "verdict": "relabel"}).status_code == 400
        assert (
            client.post("/api/reviews", json={"sample_id": "s001", "verdict": "confirm", "new_label": 1}).status_code
            == 400
        )

    def test_duplicate_verdict_single_log_entry(self, client, tmp_path):
        for _ in range(3):
            client.post("/api/reviews", json={"sample_id": "s003", "verdict": "reject"})
        log = read_review_log(tmp_path / "triage" / "reviews.jsonl")
        assert sum(1 for v in log if v.sample_id == "s003") == 1

    def test_image_endpoint_serves_bytes(self, client):
        r = client.get("/api/samples/s000/image")
        assert r.status_code == 200
        assert r.headers["content-type"] == "image/png"
        assert r.content == PNG

    def test_overlays_generated(self, client):
        r = client.get("/api/samples/s000/overlays")
        assert r.status_code == 200
        body = r.json()
        assert body["hog_png"].endswith("_hog.png")
        assert body["hough_png"].endswith("_hough.png")
        hog = client.get(body["hog_png"])
        assert hog.status_code == 200

    def test_metrics_round_trip(self, client):
        m = client.get("/api/metrics").json()
        assert m["confusion"][2][2] == 13


class TestReplayAndExport:
    def test_replay_reproduces_statuses(self, client, tmp_path):
        rng = np.random.default_rng(0)
        ids = [f"s{i:03d}" for i in range(13)]
        for _ in range(60):
            sid = ids[int(rng.integers(len(ids)))]
            verdict = ("confirm", "reject", "relabel")[int(rng.integers(3))]
            body = {"sample_id": sid, "verdict": verdict}
            if verdict == "relabel":
                body["new_label"] = int(rng.integers(3))
            client.post("/api/reviews", json=body)
        listed = {i["id"]: (i["status"], i["new_label"]) for i in client.get("/api/flagged", params={"limit": 99}).json()["items"]}
        replayed = replay_statuses(read_review_log(tmp_path / "triage" / "reviews.jsonl"))
        for sid, st in replayed.items():
            assert listed[sid] == (st["status"], st["new_label"])

    def test_export_empty_log_identity(self, tmp_path):
        _, _, records = build_fixture(tmp_path)
        out, warnings = export_relabeled_manifest(records, [])
        assert [r.__dict__ for r in out] == [r.__dict__ for r in records]
        assert warnings == []

    def test_export_relabel_updates_record_and_mirror(self, tmp_path):
        from gridsight.manifest import flip_augment

        _, _, records = build_fixture(tmp_path)
        doubled = flip_augment(records)
        verdicts = [ReviewVerdict(sample_id="s001", verdict="relabel", new_label=0)]
        out, _ = export_relabeled_manifest(doubled, verdicts)
        changed = {r.id: r.label for r in out if r.base_id() == "s001"}
        assert changed == {"s001": 0, "s001#flip": 0}
        untouched = [r for r in out if r.base_id() != "s001"]
        originals = [r for r in doubled if r.base_id() != "s001"]
        assert [r.label for r in untouched] == [r.label for r in originals]

    def test_export_reject_keeps_label_with_attention(self, tmp_path):
        _, _, records = build_fixture(tmp_path)
        verdicts = [ReviewVerdict(sample_id="s000", verdict="reject")]
        out, warnings = export_relabeled_manifest(records, verdicts)
        assert next(r for r in out if r.id == "s000").label == 2
        assert any(w["type"] == "attention" for w in warnings)

    def test_export_reject_on_non_risk_label_warns(self, tmp_path):
        _, _, records = build_fixture(tmp_path)
        verdicts = [ReviewVerdict(sample_id="s013", verdict="reject")]  # label 0 sample
        out, warnings = export_relabeled_manifest(records, verdicts)
        assert next(r for r in out if r.id == "s013").label == 0
        assert any(w["type"] == "mismatch" for w in warnings)

    def test_export_endpoint_byte_deterministic(self, client):
        client.post("/api/reviews", json={"sample_id": "s004", "verdict": "relabel", "new_label": 1})
        path1 = client.post("/api/export").json()["path"]
        first = open(path1, "rb").read()
        path2 = client.post("/api/export").json()["path"]
        second = open(path2, "rb").read()
        assert path1 == path2
        assert first == second
