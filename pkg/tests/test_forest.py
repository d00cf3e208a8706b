"""Random-forest classifier: behavior, determinism, persistence, sampling."""

import json
import re
import warnings

import numpy as np
import pytest

from aquascan.descriptors import (
    PatchMeanExtractor,
    fuse_early,
    lbp_code_map,
    lbp_region_histogram,
    temporal_descriptor,
)
from aquascan.forest import (
    Dataset,
    ForestConfig,
    dump_descriptors,
    load_model,
    predict_proba,
    predict_proba_batch,
    sample_training_set,
    save_model,
    train,
)
from aquascan.video_io import FrameSequence


def as_dataset(x, y):
    """Wrap a plain feature matrix in a Dataset with dummy provenance."""
    n = x.shape[0]
    return Dataset(x, y, ["synthetic"] * n, np.zeros((n, 3), dtype=np.int64))


def two_blob_data(n, seed, spread=1.0):
    """Two well-separated Gaussian blobs in 6 dimensions."""
    rng = np.random.default_rng(seed)
    half = n // 2
    a = rng.normal(0.0, spread, (half, 6))
    b = rng.normal(4.0, spread, (n - half, 6))
    x = np.vstack([a, b])
    y = np.concatenate([np.zeros(half, dtype=np.uint8), np.ones(n - half, dtype=np.uint8)])
    perm = rng.permutation(n)
    return x[perm], y[perm]


class TestConfig:
    def test_defaults(self):
        cfg = ForestConfig()
        assert cfg.n_trees == 100
        assert cfg.min_leaf == 5
        assert cfg.bootstrap is True

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_trees": 0},
            {"min_leaf": 0},
            {"max_depth": 0},
            {"features_per_split": 0},
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            ForestConfig(**kwargs)


class TestTraining:
    def test_requires_both_classes(self):
        x = np.random.default_rng(0).normal(size=(20, 3))
        y = np.zeros(20, dtype=np.uint8)
        with pytest.raises(ValueError, match="both classes"):
            train(as_dataset(x, y), ForestConfig(n_trees=2), seed=0)

    def test_memorizes_unique_rows(self):
        # with all features per split, no bootstrap, unlimited depth and
        # leaf size 1, distinct rows must be fit exactly
        rng = np.random.default_rng(41)
        x = rng.normal(size=(40, 5))
        y = (rng.uniform(size=40) < 0.5).astype(np.uint8)
        if y.min() == y.max():
            y[0] = 1 - y[0]
        cfg = ForestConfig(
            n_trees=3, max_depth=None, min_leaf=1, features_per_split=5, bootstrap=False
        )
        model = train(as_dataset(x, y), cfg, seed=1)
        probs = predict_proba_batch(model, x)
        assert ((probs > 0.5).astype(np.uint8) == y).all()

    def test_separable_holdout_accuracy(self):
        x_train, y_train = two_blob_data(400, seed=42)
        x_test, y_test = two_blob_data(200, seed=43)
        model = train(as_dataset(x_train, y_train), ForestConfig(n_trees=20), seed=7)
        pred = (predict_proba_batch(model, x_test) > 0.5).astype(np.uint8)
        accuracy = (pred == y_test).mean()
        assert accuracy >= 0.9, accuracy

    def test_deterministic_given_seed(self):
        x, y = two_blob_data(120, seed=44, spread=2.5)
        m1 = train(as_dataset(x, y), ForestConfig(n_trees=8), seed=3)
        m2 = train(as_dataset(x, y), ForestConfig(n_trees=8), seed=3)
        probe = np.random.default_rng(45).normal(2.0, 3.0, (50, 6))
        assert np.array_equal(predict_proba_batch(m1, probe), predict_proba_batch(m2, probe))

    def test_different_seeds_differ(self):
        x, y = two_blob_data(120, seed=46, spread=3.0)
        m1 = train(as_dataset(x, y), ForestConfig(n_trees=4), seed=0)
        m2 = train(as_dataset(x, y), ForestConfig(n_trees=4), seed=99)
        probe = np.random.default_rng(47).normal(2.0, 3.0, (200, 6))
        assert not np.array_equal(predict_proba_batch(m1, probe), predict_proba_batch(m2, probe))

    def test_smoothed_leaf_posterior(self):
        # six identical rows, 4 water 2 nonwater: the single possible leaf
        # must report (4 + 1) / (6 + 2)
        x = np.ones((6, 3))
        y = np.array([1, 1, 1, 1, 0, 0], dtype=np.uint8)
        cfg = ForestConfig(n_trees=5, bootstrap=False, min_leaf=1, features_per_split=3)
        model = train(as_dataset(x, y), cfg, seed=0)
        assert predict_proba(model, np.ones(3)) == pytest.approx(5.0 / 8.0)

    def test_depth_limit_respected(self):
        x, y = two_blob_data(300, seed=48, spread=4.0)
        model = train(as_dataset(x, y), ForestConfig(n_trees=3, max_depth=2, min_leaf=1), seed=5)
        for tree in model.trees:
            assert tree.depth <= 2

    def test_min_leaf_respected(self):
        x, y = two_blob_data(200, seed=49, spread=4.0)
        cfg = ForestConfig(n_trees=4, min_leaf=17, max_depth=None, bootstrap=False)
        model = train(as_dataset(x, y), cfg, seed=6)
        for tree in model.trees:
            leaves = tree.feature < 0
            assert tree.samples[leaves].min() >= 17

    def test_batch_matches_single(self):
        x, y = two_blob_data(150, seed=50)
        model = train(as_dataset(x, y), ForestConfig(n_trees=6), seed=2)
        probe = np.random.default_rng(51).normal(2.0, 2.0, (40, 6))
        batch = predict_proba_batch(model, probe)
        singles = np.array([predict_proba(model, row) for row in probe])
        assert np.array_equal(batch, singles)

    def test_probabilities_in_open_interval(self):
        # Laplace smoothing keeps every leaf strictly inside (0, 1)
        x, y = two_blob_data(100, seed=52)
        model = train(as_dataset(x, y), ForestConfig(n_trees=10), seed=4)
        probs = predict_proba_batch(model, x)
        assert (probs > 0.0).all() and (probs < 1.0).all()

    def test_predict_validates_width(self):
        x, y = two_blob_data(60, seed=57)
        model = train(as_dataset(x, y), ForestConfig(n_trees=2), seed=0)
        with pytest.raises(ValueError, match="descriptors"):
            predict_proba_batch(model, np.zeros((4, 9)))


class TestPersistence:
    def test_round_trip_preserves_predictions(self, tmp_path):
        x, y = two_blob_data(150, seed=53)
        model = train(as_dataset(x, y), ForestConfig(n_trees=5), seed=8)
        path = tmp_path / "model.json"
        save_model(model, path)
        loaded = load_model(path)
        probe = np.random.default_rng(54).normal(2.0, 2.0, (60, 6))
        assert np.array_equal(
            predict_proba_batch(model, probe), predict_proba_batch(loaded, probe)
        )
        assert loaded.descriptor_len == model.descriptor_len

    def test_serialization_is_deterministic(self, tmp_path):
        x, y = two_blob_data(100, seed=55)
        p1 = tmp_path / "a.json"
        p2 = tmp_path / "b.json"
        save_model(train(as_dataset(x, y), ForestConfig(n_trees=3), seed=9), p1)
        save_model(train(as_dataset(x, y), ForestConfig(n_trees=3), seed=9), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_corrupt_file_named_in_error(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ValueError, match=re.escape(str(path))):
            load_model(path)

    def test_wrong_format_and_version_rejected(self, tmp_path):
        path = tmp_path / "odd.json"
        path.write_text(json.dumps({"format": "something-else", "version": 1}))
        with pytest.raises(ValueError, match="not a forest model"):
            load_model(path)
        x, y = two_blob_data(60, seed=56)
        save_model(train(as_dataset(x, y), ForestConfig(n_trees=2), seed=0), path)
        doc = json.loads(path.read_text())
        doc["version"] = 999
        path.write_text(json.dumps(doc))
        with pytest.raises(ValueError, match="version"):
            load_model(path)

    def test_empty_tree_list_rejected(self, tmp_path):
        x, y = two_blob_data(60, seed=58)
        path = tmp_path / "empty.json"
        save_model(train(as_dataset(x, y), ForestConfig(n_trees=2), seed=0), path)
        doc = json.loads(path.read_text())
        doc["trees"] = []
        path.write_text(json.dumps(doc))
        with pytest.raises(ValueError, match="no trees"):
            load_model(path)

    def test_missing_file_raises(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_model(tmp_path / "absent.json")


def make_video(seed, frames=12, height=24, width=28):
    rng = np.random.default_rng(seed)
    return FrameSequence(rng.integers(0, 256, (frames, height, width), dtype=np.uint8))


class TestSampling:
    def test_counts_and_labels(self):
        videos = [
            ("w0", make_video(60), 1),
            ("n0", make_video(61), 0),
        ]
        ds = sample_training_set(videos, per_frame=3, n=3, m=8, lbp_side=5, seed=0)
        expected_rows = 2 * (12 - 8 + 1) * 3
        assert ds.features.shape == (expected_rows, 8 + 256)
        assert ds.labels.shape == (expected_rows,)
        assert set(np.unique(ds.labels)) == {0, 1}
        assert (ds.labels[np.asarray(ds.video_ids) == "w0"] == 1).all()
        assert (ds.labels[np.asarray(ds.video_ids) == "n0"] == 0).all()

    def test_coordinates_stay_inside_margins(self):
        videos = [("w0", make_video(62), 1), ("n0", make_video(63), 0)]
        ds = sample_training_set(videos, per_frame=5, n=5, m=6, lbp_side=7, seed=1)
        margin = 3  # max(5 // 2, 7 // 2)
        xs, ys, t0s = ds.coords[:, 0], ds.coords[:, 1], ds.coords[:, 2]
        assert xs.min() >= margin and xs.max() <= 28 - 1 - margin
        assert ys.min() >= margin and ys.max() <= 24 - 1 - margin
        assert t0s.min() >= 0 and t0s.max() <= 12 - 6

    def test_deterministic(self):
        videos = [("w0", make_video(64), 1), ("n0", make_video(65), 0)]
        d1 = sample_training_set(videos, per_frame=2, n=3, m=8, lbp_side=5, seed=2)
        d2 = sample_training_set(videos, per_frame=2, n=3, m=8, lbp_side=5, seed=2)
        assert np.array_equal(d1.features, d2.features)
        assert np.array_equal(d1.coords, d2.coords)

    def test_rows_recompute_from_modules(self):
        # every sampled row must equal the descriptor computed directly
        # from its recorded coordinates
        videos = [("w0", make_video(66), 1)]
        ds = sample_training_set(videos, per_frame=2, n=3, m=8, lbp_side=5, seed=3)
        video = videos[0][1]
        ex = PatchMeanExtractor(video, 3)
        for row in range(ds.features.shape[0]):
            x, y, t0 = (int(v) for v in ds.coords[row])
            series = ex.series(x, y)[t0 : t0 + 8]
            codes = lbp_code_map(video.frames[t0])
            expected = fuse_early(
                temporal_descriptor(series), lbp_region_histogram(codes, x, y, 5)
            )
            assert np.array_equal(ds.features[row], expected)

    def test_short_video_skipped_with_warning(self):
        videos = [
            ("clip", make_video(67, frames=4), 1),
            ("ok", make_video(68), 0),
        ]
        with pytest.warns(UserWarning, match="skipping clip"):
            ds = sample_training_set(videos, per_frame=2, n=3, m=8, lbp_side=5, seed=4)
        assert set(ds.video_ids) == {"ok"}

    def test_all_skipped_raises(self):
        videos = [("clip", make_video(69, frames=4), 1)]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            with pytest.raises(ValueError, match="no samples"):
                sample_training_set(videos, per_frame=2, n=3, m=8, lbp_side=5, seed=5)

    def test_dump_descriptors_layout(self, tmp_path):
        videos = [("w0", make_video(70), 1)]
        ds = sample_training_set(videos, per_frame=1, n=3, m=8, lbp_side=5, seed=6)
        path = tmp_path / "rows.csv"
        dump_descriptors(ds, path)
        lines = path.read_text().strip().split("\n")
        d = ds.features.shape[1]
        assert lines[0].split(",") == ["x", "y", "t0", "label"] + [f"f{i}" for i in range(d)]
        assert len(lines) == 1 + ds.features.shape[0]
        for i, line in enumerate(lines[1:]):
            parts = line.split(",")
            assert [int(p) for p in parts[:3]] == [int(v) for v in ds.coords[i]]
            assert int(parts[3]) == int(ds.labels[i])
            values = np.array([float(v) for v in parts[4:]])
            assert np.array_equal(values, ds.features[i])


class TestDataset:
    def test_validation(self):
        feats = np.zeros((4, 3))
        labels = np.zeros(4, dtype=np.uint8)
        ids = ["a"] * 4
        coords = np.zeros((4, 3), dtype=np.int64)
        Dataset(feats, labels, ids, coords)
        with pytest.raises(ValueError):
            Dataset(feats, np.zeros(3, dtype=np.uint8), ids, coords)
        with pytest.raises(ValueError):
            Dataset(feats, labels + 5, ids, coords)
        with pytest.raises(ValueError):
            Dataset(feats, labels, ["a"] * 3, coords)
