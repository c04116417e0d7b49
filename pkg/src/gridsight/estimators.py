"""Scikit-learn style wrappers so the pipeline composes with the ecosystem.

Transformers turn raw (H, W, 3) images into feature channels or full
5x224x224 stacks; the classifier wraps the training loop behind
fit/predict/predict_proba with get_params/set_params from BaseEstimator.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.exceptions import NotFittedError

from . import nn
from .features import INPUT_SIZE, ChannelStats, featurize
from .hog import HogConfig, hog_channel
from .hough import HoughConfig, hough_channel
from .images import resize_bilinear, to_grayscale
from .training import Predictor, TrainConfig, train_arrays
from .validation import check_labels, check_rgb_image, check_stack_batch


def _as_gray_224(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3:
        img = to_grayscale(check_rgb_image(img))
    if img.shape != (INPUT_SIZE, INPUT_SIZE):
        img = resize_bilinear(img, INPUT_SIZE, INPUT_SIZE)
    return img


class HogChannelTransformer(BaseEstimator, TransformerMixin):
    """Maps images to their rendered gradient-histogram channel."""

    def __init__(self, cell_size=8, bins=9, block_size=2, block_stride=1, norm="L2"):
        self.cell_size = cell_size
        self.bins = bins
        self.block_size = block_size
        self.block_stride = block_stride
        self.norm = norm

    def _config(self) -> HogConfig:
        return HogConfig(
            cell_size=self.cell_size,
            bins=self.bins,
            block_size=self.block_size,
            block_stride=self.block_stride,
            norm=self.norm,
        )

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        cfg = self._config()
        return np.stack([hog_channel(_as_gray_224(img), cfg) for img in X])


class HoughChannelTransformer(BaseEstimator, TransformerMixin):
    """Maps images to their rasterized detected-lines channel."""

    def __init__(self, accumulator_threshold=30, min_line_length=30.0, max_line_gap=10.0, rng_seed=0, mode="probabilistic"):
        self.accumulator_threshold = accumulator_threshold
        self.min_line_length = min_line_length
        self.max_line_gap = max_line_gap
        self.rng_seed = rng_seed
        self.mode = mode

    def _config(self) -> HoughConfig:
        return HoughConfig(
            accumulator_threshold=self.accumulator_threshold,
            min_line_length=self.min_line_length,
            max_line_gap=self.max_line_gap,
            rng_seed=self.rng_seed,
            mode=self.mode,
        )

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        cfg = self._config()
        return np.stack([hough_channel(_as_gray_224(img), cfg) for img in X])


class FeatureStackBuilder(BaseEstimator, TransformerMixin):
    """Builds the 5-channel network input; fit() learns RGB channel stats."""

    def __init__(self, standardize=True, hough_mode="probabilistic", hough_seed=0):
        self.standardize = standardize
        self.hough_mode = hough_mode
        self.hough_seed = hough_seed

    def fit(self, X, y=None):
        if self.standardize:
            total = np.zeros(3)
            total_sq = np.zeros(3)
            count = 0
            for img in X:
                arr = check_rgb_image(img) / 255.0
                total += arr.sum(axis=(0, 1))
                total_sq += (arr * arr).sum(axis=(0, 1))
                count += arr.shape[0] * arr.shape[1]
            if count == 0:
                raise ValueError("cannot fit channel statistics on an empty set")
            mean = total / count
            std = np.sqrt(np.maximum(total_sq / count - mean * mean, 0.0))
            self.stats_ = ChannelStats(mean=tuple(mean), std=tuple(np.maximum(std, 1e-6)))
        else:
            self.stats_ = ChannelStats()
        return self

    def transform(self, X):
        if not hasattr(self, "stats_"):
            raise NotFittedError("FeatureStackBuilder.transform called before fit")
        hough_cfg = HoughConfig(mode=self.hough_mode, rng_seed=self.hough_seed)
        return np.stack([featurize(check_rgb_image(img), self.stats_, hough_cfg=hough_cfg) for img in X])


class StackedCnnClassifier(BaseEstimator, ClassifierMixin):
    """The small CNN over 5-channel stacks, trained by the seeded loop."""

    def __init__(
        self,
        batch_size=8,
        alpha0=1e-3,
        tau_max=30,
        tau_start=10,
        weight_decay=1e-4,
        epochs=None,
        seed=0,
        risk_class=2,
        risk_multiplier=1.0,
        dev_fraction=0.0,
    ):
        self.batch_size = batch_size
        self.alpha0 = alpha0
        self.tau_max = tau_max
        self.tau_start = tau_start
        self.weight_decay = weight_decay
        self.epochs = epochs
        self.seed = seed
        self.risk_class = risk_class
        self.risk_multiplier = risk_multiplier
        self.dev_fraction = dev_fraction

    def _config(self) -> TrainConfig:
        return TrainConfig(
            batch_size=self.batch_size,
            alpha0=self.alpha0,
            tau_max=self.tau_max,
            tau_start=self.tau_start,
            weight_decay=self.weight_decay,
            epochs=self.epochs,
            seed=self.seed,
            risk_class=self.risk_class,
            risk_multiplier=self.risk_multiplier,
        )

    def fit(self, X, y):
        X = check_stack_batch(X)
        y = check_labels(y)
        if len(X) != len(y):
            raise ValueError(f"{len(X)} stacks but {len(y)} labels")
        if self.dev_fraction > 0:
            rng = np.random.default_rng(self.seed)
            order = rng.permutation(len(X))
            n_dev = max(1, int(round(self.dev_fraction * len(X))))
            dev_idx, train_idx = order[:n_dev], order[n_dev:]
        else:
            train_idx = np.arange(len(X))
            dev_idx = np.array([], dtype=int)
        records, params = train_arrays(
            X[train_idx], y[train_idx], X[dev_idx], y[dev_idx], self._config()
        )
        self.spec_ = nn.smallnet_spec()
        self.params_ = params
        self.records_ = records
        self.classes_ = np.arange(nn.N_CLASSES)
        return self

    def _predictor(self) -> Predictor:
        if not hasattr(self, "params_"):
            raise NotFittedError("classifier is not fitted")
        return Predictor(self.spec_, self.params_)

    def decision_function(self, X):
        return self._predictor().scores(check_stack_batch(X))

    def predict_proba(self, X):
        return self._predictor().probabilities(check_stack_batch(X))

    def predict(self, X):
        return self._predictor().predict(check_stack_batch(X))
