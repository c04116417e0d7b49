"""Human-in-the-loop triage: flagged high-risk predictions are served with
their geotags and confidences; operators confirm, reject, or relabel, and the
corrected manifest can be exported for retraining.

State is an append-only JSON Lines review log next to an evaluation report;
replaying the log from empty always reproduces current statuses.
"""

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse
from fastapi.staticfiles import StaticFiles

from . import images as img_io
from .hog import hog_channel
from .hough import HoughConfig, hough_channel
from .images import resize_bilinear, to_grayscale
from .manifest import SampleRecord, read_manifest, record_to_json

VERDICTS = ("confirm", "reject", "relabel")
STATUS_OF = {"confirm": "confirmed", "reject": "rejected", "relabel": "relabeled"}
VALID_LABELS = (0, 1, 2)


@dataclass
class ReviewVerdict:
    sample_id: str
    verdict: str
    new_label: int | None = None
    reviewer: str = ""
    timestamp: float = 0.0

    def validate(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"verdict must be one of {VERDICTS}, got {self.verdict!r}")
        if self.verdict == "relabel":
            if self.new_label not in VALID_LABELS:
                raise ValueError("relabel requires new_label in {0, 1, 2}")
        elif self.new_label is not None:
            raise ValueError("new_label is only valid with a relabel verdict")

    def to_json(self) -> str:
        return json.dumps(
            {
                "sample_id": self.sample_id,
                "verdict": self.verdict,
                "new_label": self.new_label,
                "reviewer": self.reviewer,
                "timestamp": self.timestamp,
            },
            separators=(",", ":"),
        )


def read_review_log(path) -> list[ReviewVerdict]:
    path = Path(path)
    if not path.exists():
        return []
    verdicts = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line:
            verdicts.append(ReviewVerdict(**json.loads(line)))
    return verdicts


def replay_statuses(verdicts) -> dict[str, dict]:
    """Latest verdict per sample wins; earlier entries are history."""
    state: dict[str, dict] = {}
    for v in verdicts:
        state[v.sample_id] = {"status": STATUS_OF[v.verdict], "new_label": v.new_label}
    return state


def export_relabeled_manifest(records: list[SampleRecord], verdicts) -> tuple[list[SampleRecord], list[dict]]:
    """Apply reviewed corrections to a manifest.

    Relabeled samples (and every record sharing their base id, so flip
    mirrors stay consistent) take the new label.  Confirmations keep the
    high-risk label.  Rejections never change labels: a rejected sample that
    was labeled high-risk goes on the attention list for a human, and a
    rejection of anything else is recorded as a mismatch warning.
    """
    latest: dict[str, ReviewVerdict] = {}
    for v in verdicts:
        latest[v.sample_id] = v

    relabels: dict[str, int] = {}
    warnings: list[dict] = []
    by_id = {r.id: r for r in records}
    for sid, v in sorted(latest.items()):
        rec = by_id.get(sid)
        if rec is None:
            warnings.append({"id": sid, "type": "unknown-sample", "message": "verdict for a sample not in the manifest"})
            continue
        if v.verdict == "relabel":
            relabels[rec.base_id()] = int(v.new_label)
        elif v.verdict == "reject":
            if rec.label == VALID_LABELS[-1]:
                warnings.append(
                    {"id": sid, "type": "attention", "message": "rejected flag on a high-risk-labeled sample; review the ground truth by hand"}
                )
            else:
                warnings.append(
                    {"id": sid, "type": "mismatch", "message": f"reject verdict on a sample labeled {rec.label}; record passed through"}
                )

    out = []
    for rec in records:
        new_label = relabels.get(rec.base_id())
        if new_label is not None and new_label != rec.label:
            fields = {**rec.__dict__, "label": new_label}
            out.append(SampleRecord(**fields))
        else:
            out.append(rec)
    return out, warnings


@dataclass
class ServiceConfig:
    manifest_path: str
    report_path: str
    out_dir: str
    frontend_dir: str | None = None
    hough_seed: int = 0


@dataclass
class TriageState:
    config: ServiceConfig
    records: list[SampleRecord] = field(default_factory=list)
    report: dict = field(default_factory=dict)
    items: dict[str, dict] = field(default_factory=dict)
    log_path: Path = None
    lock: threading.Lock = field(default_factory=threading.Lock)

    @classmethod
    def load(cls, config: ServiceConfig) -> "TriageState":
        out_dir = Path(config.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        records = read_manifest(config.manifest_path)
        report = json.loads(Path(config.report_path).read_text(encoding="utf-8"))
        state = cls(config=config, records=records, report=report, log_path=out_dir / "reviews.jsonl")
        by_id = {r.id: r for r in records}
        for entry in report.get("flagged", []):
            rec = by_id.get(entry["id"])
            state.items[entry["id"]] = {
                "id": entry["id"],
                "lat": entry.get("lat", rec.lat if rec else 0.0),
                "lon": entry.get("lon", rec.lon if rec else 0.0),
                "image_url": f"/api/samples/{entry['id']}/image",
                "predicted": entry.get("predicted", 2),
                "confidences": entry.get("confidences", [0.0, 0.0, 1.0]),
                "votes": entry.get("votes", []),
                "status": "pending",
                "new_label": None,
            }
        for sid, st in replay_statuses(read_review_log(state.log_path)).items():
            if sid in state.items:
                state.items[sid].update(st)
        return state

    def ordered_items(self, status: str | None = None) -> list[dict]:
        rows = list(self.items.values())
        if status:
            rows = [r for r in rows if r["status"] == status]
        rows.sort(key=lambda r: (-r["confidences"][2], r["id"]))
        return rows

    def record(self, sample_id: str) -> SampleRecord | None:
        for r in self.records:
            if r.id == sample_id:
                return r
        return None

    def apply_review(self, verdict: ReviewVerdict) -> dict:
        item = self.items.get(verdict.sample_id)
        if item is None:
            raise KeyError(verdict.sample_id)
        with self.lock:
            update = {"status": STATUS_OF[verdict.verdict], "new_label": verdict.new_label}
            already = item["status"] == update["status"] and item["new_label"] == update["new_label"]
            if not already:
                with open(self.log_path, "a", encoding="utf-8") as fh:
                    fh.write(verdict.to_json() + "\n")
                item.update(update)
        return item

    def export(self) -> Path:
        verdicts = read_review_log(self.log_path)
        new_records, warnings = export_relabeled_manifest(self.records, verdicts)
        out = Path(self.config.out_dir) / "relabeled_manifest.jsonl"
        tmp = out.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            for rec in new_records:
                fh.write(record_to_json(rec) + "\n")
        tmp.replace(out)
        (Path(self.config.out_dir) / "relabeled_manifest.warnings.json").write_text(
            json.dumps(warnings, indent=2), encoding="utf-8"
        )
        return out


def _overlay_paths(state: TriageState, rec: SampleRecord) -> dict:
    """Generate (once) and return HOG/Hough overlay PNGs for one sample."""
    overlays = Path(state.config.out_dir) / "overlays"
    overlays.mkdir(parents=True, exist_ok=True)
    from .features import cache_key

    key = cache_key(rec.id)
    hog_png = overlays / f"{key}_hog.png"
    hough_png = overlays / f"{key}_hough.png"
    if not (hog_png.exists() and hough_png.exists()):
        img = img_io.load_image(rec.path)
        if rec.flipped:
            img = img_io.hflip(img)
        gray = to_grayscale(resize_bilinear(img, 224, 224))
        img_io.save_unit_png(hog_png, hog_channel(gray))
        img_io.save_unit_png(hough_png, hough_channel(gray, HoughConfig(rng_seed=state.config.hough_seed)))
    sal = overlays / f"{key}_salience.png"
    return {
        "hog_png": f"/overlays/{hog_png.name}",
        "hough_png": f"/overlays/{hough_png.name}",
        "salience_png": f"/overlays/{sal.name}" if sal.exists() else None,
    }


def create_app(config: ServiceConfig) -> FastAPI:
    state = TriageState.load(config)
    app = FastAPI(title="gridsight triage")
    app.state.triage = state

    @app.get("/api/flagged")
    def list_flagged(limit: int = 50, offset: int = 0, status: str | None = None):
        rows = state.ordered_items(status)
        return {"items": rows[offset : offset + limit], "total": len(rows)}

    @app.get("/api/samples/{sample_id}/image")
    def sample_image(sample_id: str):
        rec = state.record(sample_id)
        if rec is None or not Path(rec.path).exists():
            raise HTTPException(status_code=404, detail=f"no image for sample {sample_id}")
        media = "image/png" if rec.path.lower().endswith(".png") else "image/jpeg"
        return FileResponse(rec.path, media_type=media)

    @app.get("/api/samples/{sample_id}/overlays")
    def sample_overlays(sample_id: str):
        rec = state.record(sample_id)
        if rec is None:
            raise HTTPException(status_code=404, detail=f"unknown sample {sample_id}")
        return _overlay_paths(state, rec)

    @app.post("/api/reviews")
    def post_review(body: dict):
        try:
            verdict = ReviewVerdict(
                sample_id=body.get("sample_id", ""),
                verdict=body.get("verdict", ""),
                new_label=body.get("new_label"),
                reviewer=body.get("reviewer", ""),
                timestamp=float(body.get("timestamp", 0.0)),
            )
            verdict.validate()
        except (ValueError, TypeError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        try:
            item = state.apply_review(verdict)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"sample {verdict.sample_id} is not flagged")
        return item

    @app.get("/api/metrics")
    def metrics():
        return state.report

    @app.post("/api/export")
    def export():
        path = state.export()
        return {"path": str(path)}

    overlays_dir = Path(config.out_dir) / "overlays"
    overlays_dir.mkdir(parents=True, exist_ok=True)
    app.mount("/overlays", StaticFiles(directory=str(overlays_dir)), name="overlays")
    if config.frontend_dir and Path(config.frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(config.frontend_dir), html=True), name="ui")
    return app
