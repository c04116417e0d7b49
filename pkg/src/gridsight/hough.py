"""Line detection in polar parameter space: r = x*cos(theta) + y*sin(theta).

Provides the classical vote accumulator with local-maximum peak extraction
and the progressive probabilistic variant that returns finite segments while
voting, governed by an accumulator threshold, a minimum segment length, and
a maximum bridgeable gap.
"""

import math
from dataclasses import dataclass

import numpy as np

from .edges import DEFAULT_HIGH, DEFAULT_LOW, canny


@dataclass
class HoughConfig:
    n_angles: int = 180  # 1-degree steps over [0, 180)
    n_radii: int | None = None  # default: 1-px resolution for the image size
    accumulator_threshold: int = 30
    min_line_length: float = 30.0
    max_line_gap: float = 10.0
    rng_seed: int = 0
    mode: str = "probabilistic"  # or "classical" (deterministic render)
    max_peaks: int = 25  # classical mode only

    def __post_init__(self):
        if self.n_angles < 1 or (self.n_radii is not None and self.n_radii < 1):
            raise ValueError("bin counts must be at least 1")
        if self.accumulator_threshold < 0 or self.min_line_length < 0 or self.max_line_gap < 0:
            raise ValueError("thresholds must be non-negative")
        if self.mode not in ("probabilistic", "classical"):
            raise ValueError(f"unknown hough mode {self.mode!r}")


@dataclass
class HoughAccumulator:
    bins: np.ndarray  # (n_radii, n_angles) int votes
    radii: np.ndarray  # bin centers, pixels
    angles: np.ndarray  # bin centers, radians

    def vote_total(self) -> int:
        return int(self.bins.sum())


@dataclass
class LineSegment:
    x1: float
    y1: float
    x2: float
    y2: float

    @property
    def length(self) -> float:
        return math.hypot(self.x2 - self.x1, self.y2 - self.y1)


def _bin_geometry(shape, cfg: HoughConfig):
    h, w = shape
    r_max = math.sqrt(h * h + w * w)
    if cfg.n_radii is None:
        r_lim = math.ceil(r_max)
        radii = np.arange(-r_lim, r_lim + 1, dtype=np.float64)
    else:
        radii = np.linspace(-r_max, r_max, cfg.n_radii)
    angles = np.arange(cfg.n_angles) * (np.pi / cfg.n_angles)
    return radii, angles


def _radius_bin(r, radii):
    """Nearest radius-bin index for r values (bins are uniformly spaced)."""
    step = radii[1] - radii[0] if len(radii) > 1 else 1.0
    idx = np.rint((r - radii[0]) / step).astype(int)
    return np.clip(idx, 0, len(radii) - 1)


def hough_accumulate(edges: np.ndarray, cfg: HoughConfig | None = None) -> HoughAccumulator:
    """Vote every non-zero pixel into the nearest (r, theta) bin per angle."""
    cfg = cfg or HoughConfig()
    edges = np.asarray(edges)
    radii, angles = _bin_geometry(edges.shape, cfg)
    bins = np.zeros((len(radii), len(angles)), dtype=np.int64)
    ys, xs = np.nonzero(edges)
    if len(ys) == 0:
        return HoughAccumulator(bins=bins, radii=radii, angles=angles)
    cos_t, sin_t = np.cos(angles), np.sin(angles)
    # (npix, n_angles) radii for all pixel/angle pairs
    r = xs[:, None] * cos_t[None, :] + ys[:, None] * sin_t[None, :]
    r_idx = _radius_bin(r, radii)
    a_idx = np.broadcast_to(np.arange(len(angles)), r_idx.shape)
    np.add.at(bins, (r_idx.ravel(), a_idx.ravel()), 1)
    return HoughAccumulator(bins=bins, radii=radii, angles=angles)


def find_peaks(acc: HoughAccumulator, threshold: int, max_peaks: int | None = None):
    """Bins that are >= all 8 neighbors and >= threshold.

    Returns (r, theta, votes) tuples sorted by votes descending; ties break
    toward smaller r, then smaller theta.
    """
    if threshold < 1:
        raise ValueError("threshold must be at least 1")
    b = acc.bins
    padded = np.pad(b, 1, mode="constant", constant_values=-1)
    is_peak = b >= threshold
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            is_peak &= b >= padded[1 + dy : padded.shape[0] - 1 + dy, 1 + dx : padded.shape[1] - 1 + dx]
    ri, ai = np.nonzero(is_peak)
    peaks = [(acc.radii[i], acc.angles[j], int(b[i, j])) for i, j in zip(ri, ai)]
    peaks.sort(key=lambda p: (-p[2], p[0], p[1]))
    if max_peaks is not None:
        peaks = peaks[:max_peaks]
    return peaks


def _walk_segment(edge_set, h, w, x0, y0, theta, max_gap):
    """Collect edge pixels along the line through (x0, y0) with direction
    theta + 90deg, tolerating a 3-px corridor and gaps up to max_gap."""
    dx, dy = -math.sin(theta), math.cos(theta)  # line direction
    nx, ny = math.cos(theta), math.sin(theta)  # unit normal
    pixels = []

    def probe(t):
        cx, cy = x0 + t * dx, y0 + t * dy
        for off in (0.0, 1.0, -1.0):
            px = int(round(cx + off * nx))
            py = int(round(cy + off * ny))
            if 0 <= px < w and 0 <= py < h and (px, py) in edge_set:
                return px, py
        return None

    for direction in (1, -1):
        gap = 0
        t = 0 if direction == 1 else -1
        while gap <= max_gap:
            hit = probe(t)
            if hit is not None:
                pixels.append(hit)
                gap = 0
            else:
                gap += 1
            t += direction
    return pixels


def probabilistic_hough(edges: np.ndarray, cfg: HoughConfig | None = None) -> list[LineSegment]:
    """Progressive probabilistic transform.

    Pixels vote one at a time in random order; once a bin crosses the
    accumulator threshold, the corresponding line is walked for a connected
    run, emitted if long enough, and its pixels retire from the pool (their
    votes are withdrawn).  Deterministic for a fixed rng_seed.
    """
    cfg = cfg or HoughConfig()
    edges = np.asarray(edges)
    h, w = edges.shape
    radii, angles = _bin_geometry(edges.shape, cfg)
    cos_t, sin_t = np.cos(angles), np.sin(angles)
    bins = np.zeros((len(radii), len(angles)), dtype=np.int64)

    ys, xs = np.nonzero(edges)
    pool = list(zip(xs.tolist(), ys.tolist()))
    pool.sort()  # independent of input array layout
    edge_set = set(pool)
    voted: dict[tuple, np.ndarray] = {}
    rng = np.random.default_rng(cfg.rng_seed)
    segments: list[LineSegment] = []

    angle_idx = np.arange(len(angles))
    while pool:
        pick = int(rng.integers(len(pool)))
        p = pool[pick]
        pool[pick] = pool[-1]
        pool.pop()
        x, y = p
        r_idx = _radius_bin(x * cos_t + y * sin_t, radii)
        # one vote per angle: the (r, angle) pairs are distinct, so plain
        # fancy indexing accumulates correctly and avoids np.add.at overhead
        bins[r_idx, angle_idx] += 1
        voted[p] = r_idx

        best_a = int(np.argmax(bins[r_idx, angle_idx]))
        if bins[r_idx[best_a], best_a] < max(cfg.accumulator_threshold, 1):
            continue

        run = _walk_segment(edge_set, h, w, x, y, angles[best_a], cfg.max_line_gap)
        if not run:
            continue
        # retire the run from the pool and withdraw any votes it cast
        run_set = set(run)
        edge_set -= run_set
        pool = [q for q in pool if q not in run_set]
        for q in run_set:
            cast = voted.pop(q, None)
            if cast is not None:
                bins[cast, angle_idx] -= 1

        dxl, dyl = -math.sin(angles[best_a]), math.cos(angles[best_a])
        ts = [(px - x) * dxl + (py - y) * dyl for px, py in run]
        lo, hi = run[int(np.argmin(ts))], run[int(np.argmax(ts))]
        seg = LineSegment(x1=lo[0], y1=lo[1], x2=hi[0], y2=hi[1])
        if seg.length >= cfg.min_line_length:
            segments.append(seg)
    return segments


def draw_segment(canvas: np.ndarray, seg: LineSegment, value: float = 1.0) -> None:
    """1-px Bresenham stroke onto the canvas, in place."""
    x0, y0 = int(round(seg.x1)), int(round(seg.y1))
    x1, y1 = int(round(seg.x2)), int(round(seg.y2))
    h, w = canvas.shape
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    while True:
        if 0 <= y0 < h and 0 <= x0 < w:
            canvas[y0, x0] = value
        if x0 == x1 and y0 == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def _clip_line_to_canvas(r, theta, h, w):
    """Endpoints of the infinite line r = x cos + y sin clipped to the image."""
    dx, dy = -math.sin(theta), math.cos(theta)
    px, py = r * math.cos(theta), r * math.sin(theta)
    ts = []
    if abs(dx) > 1e-12:
        ts += [(0 - px) / dx, (w - 1 - px) / dx]
    if abs(dy) > 1e-12:
        ts += [(0 - py) / dy, (h - 1 - py) / dy]
    pts = []
    for t in ts:
        x, y = px + t * dx, py + t * dy
        if -0.5 <= x <= w - 0.5 and -0.5 <= y <= h - 0.5:
            pts.append((x, y))
    if len(pts) < 2:
        return None
    pts.sort()
    (x1, y1), (x2, y2) = pts[0], pts[-1]
    return LineSegment(x1=x1, y1=y1, x2=x2, y2=y2)


def hough_channel(
    gray: np.ndarray,
    hough_cfg: HoughConfig | None = None,
    canny_low: float = DEFAULT_LOW,
    canny_high: float = DEFAULT_HIGH,
) -> np.ndarray:
    """Detected-lines channel: canny -> hough -> rasterized strokes in {0, 1}."""
    cfg = hough_cfg or HoughConfig()
    gray = np.asarray(gray, dtype=np.float64)
    edges = canny(gray, canny_low, canny_high)
    canvas = np.zeros_like(gray, dtype=np.float64)
    if cfg.mode == "classical":
        acc = hough_accumulate(edges, cfg)
        peaks = find_peaks(acc, max(cfg.accumulator_threshold, 1), cfg.max_peaks)
        h, w = gray.shape
        for r, theta, _votes in peaks:
            seg = _clip_line_to_canvas(r, theta, h, w)
            if seg is not None:
                draw_segment(canvas, seg)
    else:
        for seg in probabilistic_hough(edges, cfg):
            draw_segment(canvas, seg)
    return canvas
