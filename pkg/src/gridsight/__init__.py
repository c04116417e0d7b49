"""Street-level utility asset and vegetation-overgrowth classification.

Raw RGB imagery is enhanced with rendered HOG and Hough line channels,
stacked into 5x224x224 inputs, and classified by a small trainable CNN into
{no utility, utility, utility with overgrown vegetation}.  High-risk
predictions feed a human-in-the-loop triage service.
"""

from .edges import GradientField, canny, sobel_gradients
from .estimators import (
    FeatureStackBuilder,
    HogChannelTransformer,
    HoughChannelTransformer,
    StackedCnnClassifier,
)
from .features import ChannelStats, compute_channel_stats, featurize
from .geo import FixtureProvider, HttpProvider, ImageRequest, StreetSpec, fetch_images, interpolate_street
from .hog import HogConfig, HogDescriptor, block_normalize, cell_histograms, hog_channel, hog_descriptor
from .hough import (
    HoughAccumulator,
    HoughConfig,
    LineSegment,
    find_peaks,
    hough_accumulate,
    hough_channel,
    probabilistic_hough,
)
from .images import hflip, load_image, resize_bilinear, save_png, to_grayscale
from .manifest import SampleRecord, flip_augment, read_manifest, write_manifest
from .nn import (
    NetworkSpec,
    backward,
    forward,
    init_params,
    loss_and_grad,
    salience_map,
    smallnet_spec,
    softmax,
    weighted_cross_entropy,
)
from .optim import AdamConfig, AdamState, LrSchedule, adam_step, class_weights, lr_at
from .training import (
    EpochRecord,
    Predictor,
    TrainConfig,
    ensemble_vote,
    evaluate,
    preset_config,
    select_top_k,
    split_dataset,
    train_arrays,
    vote_tally,
)

__version__ = "0.1.0"
