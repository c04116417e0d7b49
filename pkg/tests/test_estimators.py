import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import Pipeline

from gridsight.estimators import (
    FeatureStackBuilder,
    HogChannelTransformer,
    HoughChannelTransformer,
    StackedCnnClassifier,
)


def toy_images(n=4, size=64, seed=0):
    rng = np.random.default_rng(seed)
    return [rng.uniform(0, 255, (size, size, 3)) for _ in range(n)]


def toy_stacks(n_per_class=3, size=224, seed=1):
    rng = np.random.default_rng(seed)
    X, y = [], []
    for cls in range(3):
        for _ in range(n_per_class):
            s = rng.normal(0, 0.05, (5, size, size))
            s[cls, :40, :40] += 1.5
            X.append(s)
            y.append(cls)
    return np.asarray(X, dtype=np.float32), np.asarray(y)


class TestTransformers:
    def test_hog_transformer_shapes_and_params(self):
        tr = HogChannelTransformer(cell_size=16)
        out = tr.fit_transform(toy_images(3))
        assert out.shape == (3, 224, 224)
        assert tr.get_params()["cell_size"] == 16
        cloned = clone(tr)
        assert cloned.get_params() == tr.get_params()

    def test_hough_transformer_deterministic_seed(self):
        imgs = toy_images(2, seed=3)
        tr = HoughChannelTransformer(rng_seed=5)
        a = tr.transform(imgs)
        b = HoughChannelTransformer(rng_seed=5).transform(imgs)
        np.testing.assert_array_equal(a, b)

    def test_stack_builder_learns_stats(self):
        imgs = toy_images(4, size=224, seed=4)
        fb = FeatureStackBuilder(hough_seed=2)
        stacks = fb.fit_transform(imgs)
        assert stacks.shape == (4, 5, 224, 224)
        rgb_means = stacks[:, :3].mean(axis=(0, 2, 3))
        assert np.all(np.abs(rgb_means) < 1e-3)

    def test_stack_builder_requires_fit(self):
        with pytest.raises(NotFittedError):
            FeatureStackBuilder().transform(toy_images(1))

    def test_set_params_round_trip(self):
        tr = HoughChannelTransformer()
        tr.set_params(min_line_length=44.0)
        assert tr._config().min_line_length == 44.0


class TestClassifier:
    def test_fit_predict_on_separable_stacks(self):
        X, y = toy_stacks()
        clf = StackedCnnClassifier(batch_size=3, alpha0=5e-3, tau_max=8, tau_start=3, weight_decay=0.0, seed=0)
        clf.fit(X, y)
        acc = (clf.predict(X) == y).mean()
        assert acc >= 0.9
        probs = clf.predict_proba(X)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-6)

    def test_get_params_matches_init(self):
        clf = StackedCnnClassifier(alpha0=3e-4, seed=11)
        params = clf.get_params()
        assert params["alpha0"] == 3e-4 and params["seed"] == 11
        cloned = clone(clf)
        assert cloned.get_params() == params

    def test_unfitted_predict_raises(self):
        with pytest.raises(NotFittedError):
            StackedCnnClassifier().predict(np.zeros((1, 5, 224, 224), dtype=np.float32))

    def test_label_validation(self):
        X, _ = toy_stacks(n_per_class=1)
        with pytest.raises(ValueError):
            StackedCnnClassifier(tau_max=1).fit(X, np.array([0, 1, 5]))

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            StackedCnnClassifier().predict(np.zeros((1, 3, 224, 224)))

    def test_pipeline_composition(self):
        imgs = toy_images(6, size=224, seed=6)
        y = np.array([0, 1, 2, 0, 1, 2])
        pipe = Pipeline(
            [
                ("stack", FeatureStackBuilder(hough_seed=1)),
                ("clf", StackedCnnClassifier(batch_size=2, tau_max=2, tau_start=1, seed=1)),
            ]
        )
        pipe.fit(imgs, y)
        preds = pipe.predict(imgs)
        assert preds.shape == (6,)
        assert set(np.unique(preds)) <= {0, 1, 2}
