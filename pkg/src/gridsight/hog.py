"""Histogram-of-oriented-gradients descriptor and its rendered feature channel.

Cells accumulate gradient magnitude into angular bins with linear
interpolation between the two nearest bin centers; overlapping blocks of
cells are concatenated and contrast-normalized.  The rendered channel draws
one anti-aliased stroke per bin through each cell center, perpendicular to
the bin's gradient orientation, so line-like structure stays line-like.
"""

from dataclasses import dataclass

import numpy as np

from .edges import GradientField, sobel_gradients

NORM_EPS = 1e-5


@dataclass
class HogConfig:
    cell_size: int = 8
    bins: int = 9
    block_size: int = 2  # in cells, square blocks
    block_stride: int = 1  # in cells
    norm: str = "L2"  # "L1" or "L2"
    signed: bool = False  # unsigned folds orientation to [0, 180)

    def __post_init__(self):
        if self.bins < 2:
            raise ValueError("need at least 2 orientation bins")
        if self.norm not in ("L1", "L2"):
            raise ValueError(f"norm must be 'L1' or 'L2', got {self.norm!r}")

    @property
    def span_deg(self) -> float:
        return 360.0 if self.signed else 180.0


@dataclass
class HogDescriptor:
    cell_histograms: np.ndarray  # (cells_y, cells_x, bins)
    block_vectors: np.ndarray  # (blocks_y, blocks_x, block_size^2 * bins)


def cell_histograms(field: GradientField, cfg: HogConfig) -> np.ndarray:
    """Per-cell orientation histograms, (cells_y, cells_x, bins).

    Each pixel votes its gradient magnitude into the two bins whose centers
    (at multiples of the bin width, cyclic) straddle its folded orientation.
    """
    h, w = field.magnitude.shape
    cs = cfg.cell_size
    if h % cs or w % cs:
        raise ValueError(f"image size {h}x{w} not divisible by cell size {cs}")
    cy, cx = h // cs, w // cs

    span = cfg.span_deg
    width = span / cfg.bins
    ang = np.degrees(field.orientation) % span
    pos = ang / width  # fractional bin position; centers sit at integers
    b0 = np.floor(pos).astype(int) % cfg.bins
    b1 = (b0 + 1) % cfg.bins
    frac = pos - np.floor(pos)
    mag = field.magnitude

    cell_y = np.arange(h) // cs
    cell_x = np.arange(w) // cs
    flat_cell = (cell_y[:, None] * cx + cell_x[None, :]).ravel()

    hist = np.zeros((cy * cx, cfg.bins), dtype=np.float64)
    np.add.at(hist, (flat_cell, b0.ravel()), (mag * (1.0 - frac)).ravel())
    np.add.at(hist, (flat_cell, b1.ravel()), (mag * frac).ravel())
    return hist.reshape(cy, cx, cfg.bins)


def block_normalize(grid: np.ndarray, cfg: HogConfig) -> HogDescriptor:
    """Group cells into overlapping blocks and normalize each concatenation
    by v / (||v|| + eps)."""
    cy, cx, nb = grid.shape
    bs, stride = cfg.block_size, cfg.block_stride
    if cy < bs or cx < bs:
        raise ValueError(f"cell grid {cy}x{cx} smaller than block size {bs}")
    by = (cy - bs) // stride + 1
    bx = (cx - bs) // stride + 1
    blocks = np.zeros((by, bx, bs * bs * nb), dtype=np.float64)
    for i in range(by):
        for j in range(bx):
            v = grid[i * stride : i * stride + bs, j * stride : j * stride + bs].ravel()
            if cfg.norm == "L2":
                n = np.sqrt(np.sum(v * v))
            else:
                n = np.sum(np.abs(v))
            blocks[i, j] = v / (n + NORM_EPS)
    return HogDescriptor(cell_histograms=grid, block_vectors=blocks)


def hog_descriptor(img: np.ndarray, cfg: HogConfig | None = None) -> HogDescriptor:
    """Full descriptor of a grayscale image: gradients, cell histograms, blocks."""
    cfg = cfg or HogConfig()
    return block_normalize(cell_histograms(sobel_gradients(img), cfg), cfg)


def render_cell_strokes(grid: np.ndarray, cfg: HogConfig, h: int, w: int) -> np.ndarray:
    """Rasterize per-cell bin weights as strokes on an (h, w) canvas.

    A bin with gradient orientation a paints a stroke at a + 90 degrees
    through the cell center, tent-antialiased over perpendicular distance,
    clipped to the cell and to half the cell diagonal along the stroke.
    """
    cs = cfg.cell_size
    cy, cx, nb = grid.shape
    canvas = np.zeros((h, w), dtype=np.float64)
    half_len = cs / 2.0

    centers_deg = np.arange(nb) * (cfg.span_deg / nb)
    stroke_rad = np.radians(centers_deg + 90.0)
    dirs = np.stack([np.cos(stroke_rad), np.sin(stroke_rad)], axis=1)  # (nb, 2) as (dx, dy)

    # pixel center offsets within a cell, relative to the cell center
    local = np.arange(cs) + 0.5 - cs / 2.0
    px, py = np.meshgrid(local, local)  # (cs, cs)

    for b in range(nb):
        dx, dy = dirs[b]
        along = px * dx + py * dy
        across = np.abs(px * dy - py * dx)
        stencil = np.maximum(0.0, 1.0 - across) * (np.abs(along) <= half_len)
        if not stencil.any():
            continue
        weights = grid[:, :, b]
        # paint every cell's stencil scaled by that cell's bin weight
        canvas += np.kron(weights, np.ones((cs, cs))) * np.tile(stencil, (cy, cx))
    return canvas


def hog_channel(img: np.ndarray, cfg: HogConfig | None = None) -> np.ndarray:
    """Render the per-cell histograms of a grayscale image into one [0, 1]
    channel of the same size."""
    cfg = cfg or HogConfig()
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    grid = cell_histograms(sobel_gradients(img), cfg)
    canvas = render_cell_strokes(grid, cfg, h, w)
    peak = canvas.max()
    if peak > 0:
        canvas /= peak
    return canvas
