"""Dense image arrays and the basic pixel operations everything else consumes.

Conventions: single images are numpy float64 arrays, (H, W) for grayscale and
(H, W, 3) for RGB with intensities in [0, 255].  Stacked network inputs are
channel-first (C, H, W).  All functions are pure.
"""

import numpy as np
from PIL import Image

LUMA_R, LUMA_G, LUMA_B = 0.299, 0.587, 0.114


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """BT.601 luma of an (H, W, 3) image, rounded half-up to integer-valued reals."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) RGB image, got shape {img.shape}")
    luma = LUMA_R * img[:, :, 0] + LUMA_G * img[:, :, 1] + LUMA_B * img[:, :, 2]
    # np.round is half-to-even; grayscale quantization is specified half-up
    return np.floor(luma + 0.5)


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize of an (H, W) or (H, W, C) image.

    Sample centers follow the corner-aligned-off convention: output pixel i
    reads the source at (i + 0.5) * scale - 0.5.  Values are kept as reals.
    """
    img = np.asarray(img, dtype=np.float64)
    if out_h < 1 or out_w < 1:
        raise ValueError("output size must be at least 1x1")
    if img.ndim not in (2, 3):
        raise ValueError(f"expected 2-D or 3-D image, got shape {img.shape}")
    h, w = img.shape[:2]
    if h == 0 or w == 0:
        raise ValueError("cannot resize a zero-sized image")
    if (out_h, out_w) == (h, w):
        return img.copy()

    src_y = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    src_x = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    y0 = np.clip(np.floor(src_y).astype(int), 0, h - 1)
    x0 = np.clip(np.floor(src_x).astype(int), 0, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = np.clip(src_y - y0, 0.0, 1.0)
    fx = np.clip(src_x - x0, 0.0, 1.0)

    if img.ndim == 2:
        fy_c = fy[:, None]
        fx_c = fx[None, :]
    else:
        fy_c = fy[:, None, None]
        fx_c = fx[None, :, None]

    top = img[np.ix_(y0, x0)] * (1 - fx_c) + img[np.ix_(y0, x1)] * fx_c
    bot = img[np.ix_(y1, x0)] * (1 - fx_c) + img[np.ix_(y1, x1)] * fx_c
    return top * (1 - fy_c) + bot * fy_c


def hflip(arr: np.ndarray) -> np.ndarray:
    """Mirror the width axis.

    Accepts (H, W) gray, (H, W, 3) RGB, or channel-first (C, H, W) stacks;
    3-D arrays whose last axis is not 3 are treated as channel-first.
    """
    arr = np.asarray(arr)
    if arr.ndim == 2:
        return arr[:, ::-1].copy()
    if arr.ndim == 3:
        if arr.shape[-1] == 3:
            return arr[:, ::-1, :].copy()
        return arr[:, :, ::-1].copy()
    raise ValueError(f"cannot flip array of shape {arr.shape}")


def load_image(path) -> np.ndarray:
    """Decode a PNG or JPEG file into an (H, W, 3) float array in [0, 255]."""
    with Image.open(path) as im:
        rgb = im.convert("RGB")
        return np.asarray(rgb, dtype=np.float64)


def save_png(path, img: np.ndarray) -> None:
    """Write an (H, W) or (H, W, 3) array in [0, 255] as a PNG file."""
    arr = np.asarray(img, dtype=np.float64)
    data = np.clip(np.floor(arr + 0.5), 0, 255).astype(np.uint8)
    Image.fromarray(data).save(path, format="PNG")


def save_unit_png(path, channel: np.ndarray) -> None:
    """Write an (H, W) array in [0, 1] as an 8-bit PNG."""
    save_png(path, np.asarray(channel, dtype=np.float64) * 255.0)
