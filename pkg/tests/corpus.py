"""Synthetic three-class street-scene corpus for end-to-end checks.

Class 0: sky/road gradient only.  Class 1: adds a dark pole and thin wires.
Class 2: adds foliage blobs crowding the wires.  The classes are separable
by construction, so a correct pipeline should reach high accuracy quickly.
"""

import numpy as np

from gridsight.images import save_png
from gridsight.manifest import SampleRecord


def _background(rng, size):
    img = np.zeros((size, size, 3))
    sky_top = np.array([120.0, 160.0, 220.0]) + rng.uniform(-20, 20, 3)
    sky_bottom = np.array([190.0, 200.0, 210.0]) + rng.uniform(-15, 15, 3)
    t = np.linspace(0, 1, size)[:, None, None]
    img[:] = sky_top * (1 - t) + sky_bottom * t
    road_start = int(size * rng.uniform(0.72, 0.82))
    img[road_start:] = np.array([95.0, 92.0, 90.0]) + rng.uniform(-10, 10, 3)
    img += rng.normal(0, 3.0, img.shape)
    return np.clip(img, 0, 255), road_start


def _draw_pole(img, rng, size):
    x = int(rng.uniform(0.25, 0.75) * size)
    w = int(rng.integers(3, 6))
    top = int(rng.uniform(0.05, 0.15) * size)
    img[top:, x : x + w] = rng.uniform(25, 55)
    return x, top


def _draw_wires(img, rng, size, pole_x, pole_top):
    n = int(rng.integers(2, 4))
    for k in range(n):
        y = pole_top + int(k * rng.uniform(8, 16)) + 4
        if y >= size - 2:
            continue
        sag = rng.uniform(-6, 6)
        xs = np.arange(size)
        ys = (y + sag * np.sin(np.pi * xs / size)).astype(int)
        ys = np.clip(ys, 0, size - 2)
        shade = rng.uniform(20, 50)
        img[ys, xs] = shade
        img[ys + 1, xs] = shade


def _draw_foliage(img, rng, size):
    n = int(rng.integers(3, 6))
    yy, xx = np.mgrid[0:size, 0:size]
    for _ in range(n):
        cy = rng.uniform(0.1, 0.5) * size
        cx = rng.uniform(0.1, 0.9) * size
        ry = rng.uniform(0.08, 0.2) * size
        rx = rng.uniform(0.1, 0.25) * size
        mask = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 < 1.0
        green = np.array([rng.uniform(20, 60), rng.uniform(100, 160), rng.uniform(20, 70)])
        img[mask] = green + rng.normal(0, 8, 3)


def synth_image(label: int, rng: np.random.Generator, size: int = 224) -> np.ndarray:
    img, _road = _background(rng, size)
    if label >= 1:
        pole_x, pole_top = _draw_pole(img, rng, size)
        _draw_wires(img, rng, size, pole_x, pole_top)
    if label == 2:
        _draw_foliage(img, rng, size)
    return np.clip(img, 0, 255)


def write_corpus(directory, n_per_class: int, seed: int = 0, size: int = 224):
    """Render PNGs and return unsplit manifest records."""
    rng = np.random.default_rng(seed)
    directory.mkdir(parents=True, exist_ok=True)
    records = []
    for label in range(3):
        for i in range(n_per_class):
            img = synth_image(label, rng, size)
            path = directory / f"cls{label}_{i:03d}.png"
            save_png(path, img)
            records.append(
                SampleRecord(
                    id=f"cls{label}_{i:03d}",
                    path=str(path),
                    lat=37.0 + 0.001 * i,
                    lon=-122.0 - 0.001 * label,
                    label=label,
                )
            )
    return records
