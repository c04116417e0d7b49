"""Assembly of the 5x224x224 network input: RGB + HOG channel + Hough channel.

RGB channels are standardized per channel with training-split statistics on
the [0, 1] scale; the HOG and Hough channels stay in [0, 1] because their
zero means absence of structure.
"""

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from . import images
from .hog import HogConfig, hog_channel
from .hough import HoughConfig, hough_channel
from .manifest import SampleRecord

INPUT_SIZE = 224
CHANNEL_ORDER = ("R", "G", "B", "HOG", "Hough")
STD_FLOOR = 1e-6


@dataclass
class ChannelStats:
    mean: tuple[float, float, float] = (0.0, 0.0, 0.0)
    std: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def stats_id(self) -> str:
        payload = json.dumps({"mean": self.mean, "std": self.std}, sort_keys=True)
        return hashlib.sha1(payload.encode()).hexdigest()[:12]

    def to_json(self) -> dict:
        return {"mean": list(self.mean), "std": list(self.std)}

    @classmethod
    def from_json(cls, data) -> "ChannelStats":
        return cls(mean=tuple(data["mean"]), std=tuple(data["std"]))


IDENTITY_STATS = ChannelStats()


def featurize(
    img: np.ndarray,
    stats: ChannelStats | None = None,
    hog_cfg: HogConfig | None = None,
    hough_cfg: HoughConfig | None = None,
) -> np.ndarray:
    """Build the (5, 224, 224) input stack for one RGB image."""
    stats = stats or IDENTITY_STATS
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got shape {img.shape}")
    resized = images.resize_bilinear(img, INPUT_SIZE, INPUT_SIZE)

    stack = np.zeros((5, INPUT_SIZE, INPUT_SIZE), dtype=np.float64)
    mean = np.asarray(stats.mean, dtype=np.float64)
    std = np.maximum(np.asarray(stats.std, dtype=np.float64), STD_FLOOR)
    for c in range(3):
        stack[c] = (resized[:, :, c] / 255.0 - mean[c]) / std[c]

    gray = images.to_grayscale(resized)
    stack[3] = hog_channel(gray, hog_cfg)
    stack[4] = hough_channel(gray, hough_cfg)
    if not np.all(np.isfinite(stack)):
        raise ValueError("featurize produced non-finite values")
    return stack


def compute_channel_stats(records, load_image, split: str = "train") -> ChannelStats:
    """Per-channel mean/std of R, G, B on the [0, 1] scale over one split.

    `load_image` maps a SampleRecord to its (H, W, 3) pixel array.  The
    reduction order is fixed by sorting record ids, so results do not depend
    on manifest ordering.
    """
    chosen = sorted((r for r in records if r.split == split), key=lambda r: r.id)
    if not chosen:
        raise ValueError(f"no records in split {split!r}")
    count = 0
    total = np.zeros(3, dtype=np.float64)
    total_sq = np.zeros(3, dtype=np.float64)
    for rec in chosen:
        img = np.asarray(load_image(rec), dtype=np.float64) / 255.0
        total += img.sum(axis=(0, 1))
        total_sq += (img * img).sum(axis=(0, 1))
        count += img.shape[0] * img.shape[1]
    mean = total / count
    var = np.maximum(total_sq / count - mean * mean, 0.0)
    std = np.maximum(np.sqrt(var), STD_FLOOR)
    return ChannelStats(mean=tuple(mean.tolist()), std=tuple(std.tolist()))


def record_image(rec: SampleRecord) -> np.ndarray:
    """Load a record's pixels, applying the horizontal flip for mirror records."""
    img = images.load_image(rec.path)
    return images.hflip(img) if rec.flipped else img


def cache_key(sample_id: str) -> str:
    safe = "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in sample_id)
    digest = hashlib.sha1(sample_id.encode()).hexdigest()[:8]
    return f"{safe}-{digest}"


def save_stack(directory, sample_id: str, stack: np.ndarray, stats: ChannelStats) -> str:
    """Cache one stack as a raw little-endian float32 blob plus a JSON sidecar."""
    key = cache_key(sample_id)
    blob = directory / f"{key}.f32"
    stack32 = np.ascontiguousarray(stack, dtype="<f4")
    blob.write_bytes(stack32.tobytes())
    sidecar = {
        "shape": list(stack.shape),
        "channel_order": list(CHANNEL_ORDER),
        "stats_id": stats.stats_id(),
    }
    (directory / f"{key}.json").write_text(json.dumps(sidecar, indent=0))
    return key


def load_stack(directory, sample_id: str) -> np.ndarray:
    key = cache_key(sample_id)
    sidecar = json.loads((directory / f"{key}.json").read_text())
    shape = tuple(sidecar["shape"])
    data = np.frombuffer((directory / f"{key}.f32").read_bytes(), dtype="<f4")
    return data.reshape(shape).astype(np.float64)
