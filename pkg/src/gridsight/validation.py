"""Input validation helpers shared by the estimator layer and the pipeline."""

import numpy as np


def check_rgb_image(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) RGB image, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("RGB image contains non-finite values")
    if img.min() < 0 or img.max() > 255:
        raise ValueError("RGB intensities must lie in [0, 255]")
    return img


def check_gray_image(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"expected (H, W) grayscale image, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("grayscale image contains non-finite values")
    return img


def check_stack_batch(X, channels: int = 5, size: int = 224) -> np.ndarray:
    """Validate a batch of channel-first feature stacks, promoting a single stack."""
    X = np.asarray(X)
    if X.ndim == 3:
        X = X[None]
    if X.ndim != 4 or X.shape[1] != channels or X.shape[2:] != (size, size):
        raise ValueError(
            f"expected (N, {channels}, {size}, {size}) feature stacks, got shape {X.shape}"
        )
    if not np.all(np.isfinite(X)):
        raise ValueError("feature stacks contain non-finite values")
    return X


def check_labels(y, n_classes: int = 3) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"expected 1-D label vector, got shape {y.shape}")
    if y.size and (not np.issubdtype(y.dtype, np.integer)):
        if not np.all(y == y.astype(int)):
            raise ValueError("labels must be integers")
        y = y.astype(int)
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise ValueError(f"labels must lie in [0, {n_classes})")
    return y.astype(int)
