"""Sample manifests: one JSON record per line, one line per image.

Fields: {id, path, lat, lon, heading, pitch, fov, label, flipped, split}.
Horizontal-flip augmentation appends mirror records that share everything
with the original except the id suffix and the flipped flag.
"""

import json
from dataclasses import asdict, dataclass

FLIP_SUFFIX = "#flip"


@dataclass
class SampleRecord:
    id: str
    path: str
    lat: float = 0.0
    lon: float = 0.0
    heading: float = 0.0
    pitch: float = 0.0
    fov: float = 90.0
    label: int = 0
    flipped: bool = False
    split: str = ""

    def base_id(self) -> str:
        return self.id[: -len(FLIP_SUFFIX)] if self.id.endswith(FLIP_SUFFIX) else self.id


def record_to_json(rec: SampleRecord) -> str:
    return json.dumps(asdict(rec), separators=(",", ":"), sort_keys=False)


def write_manifest(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(record_to_json(rec) + "\n")


def read_manifest(path) -> list[SampleRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            records.append(SampleRecord(**json.loads(line)))
    return records


def flip_augment(records) -> list[SampleRecord]:
    """Double a manifest with horizontal mirrors that inherit the original's
    label and split; existing mirrors are not re-flipped."""
    out = []
    for rec in records:
        out.append(rec)
        if not rec.flipped:
            mirror = SampleRecord(**{**asdict(rec), "id": rec.id + FLIP_SUFFIX, "flipped": True})
            out.append(mirror)
    return out
