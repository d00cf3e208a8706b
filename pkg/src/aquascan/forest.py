"""Random decision forest over water descriptors, built from scratch.

Binary classification (water = 1) with axis-aligned splits chosen by Gini
impurity decrease over a random feature subset per node, midpoint
thresholds between consecutive distinct feature values, bootstrap
resampling per tree, and Laplace-smoothed leaf posteriors. Every random
draw flows from one seed through numpy SeedSequence spawns, so training
is bit-for-bit reproducible.

Also provides the descriptor sampler that turns residual videos into a
training set (video-level labels, fixed samples per window position) and
JSON (de)serialization of trained models.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .descriptors import (
    PatchMeanExtractor,
    fuse_early,
    lbp_code_map,
    lbp_region_histogram,
    temporal_descriptor,
)

MODEL_FORMAT = "aquascan-forest"
MODEL_VERSION = 1


@dataclass
class ForestConfig:
    n_trees: int = 100
    max_depth: int | None = 16  # None = grow until pure or too small
    min_leaf: int = 5  # both children of a split must keep this many rows
    features_per_split: int | None = None  # None = ceil(sqrt(d)) at train time
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1 or None, got {self.max_depth}")
        if self.min_leaf < 1:
            raise ValueError(f"min_leaf must be >= 1, got {self.min_leaf}")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ValueError(f"features_per_split must be >= 1, got {self.features_per_split}")


@dataclass
class Dataset:
    """Sampled descriptors with provenance.

    features: (n, d) float64; labels: (n,) uint8 with 1 = water;
    video_ids: per-row source video; coords: (n, 3) int columns x, y, t0.
    """

    features: np.ndarray
    labels: np.ndarray
    video_ids: list[str]
    coords: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.uint8)
        self.coords = np.asarray(self.coords, dtype=np.int64)
        n = self.features.shape[0]
        if self.features.ndim != 2:
            raise ValueError(f"features must be (n, d), got shape {self.features.shape}")
        if self.labels.shape != (n,) or len(self.video_ids) != n or self.coords.shape != (n, 3):
            raise ValueError("features, labels, video_ids and coords disagree on row count")
        if not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")

    def __len__(self) -> int:
        return self.features.shape[0]


class _Tree:
    """Flat-array decision tree; feature[i] == -1 marks a leaf."""

    __slots__ = ("feature", "threshold", "left", "right", "prob", "samples", "depth")

    def __init__(self, feature, threshold, left, right, prob, samples, depth):
        self.feature = np.asarray(feature, dtype=np.int32)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.prob = np.asarray(prob, dtype=np.float64)
        self.samples = np.asarray(samples, dtype=np.int64)
        self.depth = depth


@dataclass
class ForestModel:
    config: ForestConfig
    descriptor_len: int
    seed: int
    trees: list = field(default_factory=list)


def _best_split(x: np.ndarray, idx: np.ndarray, y_node: np.ndarray, feats: np.ndarray, min_leaf: int):
    """Best (feature, threshold) over the drawn features, or None.

    Minimizes the size-weighted Gini impurity of the two children (the
    parent term is constant, so this maximizes the decrease). Ties keep
    the earlier feature in draw order, then the smallest cut position.
    """
    n = y_node.size
    v = x[np.ix_(idx, feats)]  # (n, k)
    order = np.argsort(v, axis=0, kind="stable")
    vs = np.take_along_axis(v, order, axis=0)
    w_l = np.cumsum(y_node[order].astype(np.float64), axis=0)[:-1]  # (n-1, k)
    total_w = float(y_node.sum())
    sizes_l = np.arange(1, n, dtype=np.float64)[:, None]
    sizes_r = n - sizes_l
    valid = (vs[1:] > vs[:-1]) & (sizes_l >= min_leaf) & (sizes_r >= min_leaf)
    if not valid.any():
        return None
    w_r = total_w - w_l
    cost = w_l * (sizes_l - w_l) / sizes_l + w_r * (sizes_r - w_r) / sizes_r
    cost[~valid] = np.inf
    # transpose so argmin scans feature-major: earliest drawn feature wins ties
    flat = int(np.argmin(cost.T))
    k, cut = divmod(flat, n - 1)
    lo, hi = vs[cut, k], vs[cut + 1, k]
    thr = lo + (hi - lo) / 2.0
    if not thr < hi:  # adjacent floats: keep the split strict
        thr = lo
    return int(feats[k]), float(thr)


def _grow_tree(x: np.ndarray, y: np.ndarray, cfg: ForestConfig, k_feats: int, rng) -> _Tree:
    d = x.shape[1]
    feature, threshold, left, right, prob, samples = [], [], [], [], [], []
    max_depth_seen = 0

    def leaf(idx, depth):
        nonlocal max_depth_seen
        max_depth_seen = max(max_depth_seen, depth)
        node = len(feature)
        n = idx.size
        n_w = int(y[idx].sum())
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        prob.append((n_w + 1.0) / (n + 2.0))
        samples.append(n)
        return node

    def grow(idx, depth):
        n = idx.size
        n_w = int(y[idx].sum())
        depth_ok = cfg.max_depth is None or depth < cfg.max_depth
        if not depth_ok or n < 2 * cfg.min_leaf or n_w == 0 or n_w == n:
            return leaf(idx, depth)
        feats = rng.choice(d, size=k_feats, replace=False)
        split = _best_split(x, idx, y[idx], feats, cfg.min_leaf)
        if split is None:
            return leaf(idx, depth)
        f, thr = split
        mask = x[idx, f] <= thr
        node = len(feature)
        feature.append(f)
        threshold.append(thr)
        left.append(-1)
        right.append(-1)
        prob.append(0.0)
        samples.append(n)
        left[node] = grow(idx[mask], depth + 1)
        right[node] = grow(idx[~mask], depth + 1)
        return node

    grow(np.arange(x.shape[0]), 0)
    return _Tree(feature, threshold, left, right, prob, samples, max_depth_seen)


def train(dataset: Dataset, config: ForestConfig | None = None, seed: int = 0) -> ForestModel:
    """Fit a forest on the dataset; both classes must be present."""
    if config is None:
        config = ForestConfig()
    x, y = dataset.features, dataset.labels
    n, d = x.shape
    if n < 2:
        raise ValueError(f"training needs >= 2 rows, got {n}")
    if y.min() == y.max():
        raise ValueError("training set must contain both classes")
    k_feats = config.features_per_split
    if k_feats is None:
        k_feats = math.isqrt(d) + (0 if math.isqrt(d) ** 2 == d else 1)
    k_feats = min(k_feats, d)
    streams = np.random.SeedSequence(seed).spawn(config.n_trees)
    trees = []
    for ss in streams:
        rng = np.random.default_rng(ss)
        if config.bootstrap:
            idx = rng.integers(0, n, size=n)
        else:
            idx = np.arange(n)
        trees.append(_grow_tree(x[idx], y[idx], config, k_feats, rng))
    return ForestModel(config=config, descriptor_len=d, seed=seed, trees=trees)


def predict_proba_batch(model: ForestModel, x: np.ndarray) -> np.ndarray:
    """Water probability per row: the mean of the trees' leaf posteriors."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.descriptor_len:
        raise ValueError(
            f"descriptors must be (n, {model.descriptor_len}), got shape {x.shape}"
        )
    n = x.shape[0]
    out = np.zeros(n, dtype=np.float64)
    rows = np.arange(n)
    for tree in model.trees:
        node = np.zeros(n, dtype=np.int32)
        for _ in range(tree.depth):
            f = tree.feature[node]
            at_leaf = f < 0
            if at_leaf.all():
                break
            go_left = x[rows, np.where(at_leaf, 0, f)] <= tree.threshold[node]
            step = np.where(go_left, tree.left[node], tree.right[node])
            node = np.where(at_leaf, node, step).astype(np.int32)
        out += tree.prob[node]
    return out / len(model.trees)


def predict_proba(model: ForestModel, descriptor: np.ndarray) -> float:
    """Water probability of a single descriptor."""
    descriptor = np.asarray(descriptor, dtype=np.float64)
    if descriptor.ndim != 1:
        raise ValueError(f"descriptor must be 1-d, got shape {descriptor.shape}")
    return float(predict_proba_batch(model, descriptor[np.newaxis])[0])


def _node_to_dict(tree: _Tree, node: int) -> dict:
    if tree.feature[node] < 0:
        return {"prob": float(tree.prob[node]), "samples": int(tree.samples[node])}
    return {
        "feature": int(tree.feature[node]),
        "threshold": float(tree.threshold[node]),
        "left": _node_to_dict(tree, int(tree.left[node])),
        "right": _node_to_dict(tree, int(tree.right[node])),
    }


def _node_from_dict(obj: dict, arrays: dict, depth: int, descriptor_len: int) -> int:
    node = len(arrays["feature"])
    arrays["depth"] = max(arrays["depth"], depth)
    if "feature" in obj:
        f = int(obj["feature"])
        if not 0 <= f < descriptor_len:
            raise ValueError(f"corrupt model file: feature index {f} out of range")
        arrays["feature"].append(f)
        arrays["threshold"].append(float(obj["threshold"]))
        arrays["left"].append(-1)
        arrays["right"].append(-1)
        arrays["prob"].append(0.0)
        arrays["samples"].append(0)
        arrays["left"][node] = _node_from_dict(obj["left"], arrays, depth + 1, descriptor_len)
        arrays["right"][node] = _node_from_dict(obj["right"], arrays, depth + 1, descriptor_len)
    else:
        p = float(obj["prob"])
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"corrupt model file: leaf probability {p} out of range")
        arrays["feature"].append(-1)
        arrays["threshold"].append(0.0)
        arrays["left"].append(-1)
        arrays["right"].append(-1)
        arrays["prob"].append(p)
        arrays["samples"].append(int(obj.get("samples", 0)))
    return node


def save_model(model: ForestModel, path: str) -> None:
    """Write the model as versioned JSON; output bytes are deterministic."""
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "descriptor_len": model.descriptor_len,
        "seed": model.seed,
        "config": {
            "n_trees": model.config.n_trees,
            "max_depth": model.config.max_depth,
            "min_leaf": model.config.min_leaf,
            "features_per_split": model.config.features_per_split,
            "bootstrap": model.config.bootstrap,
        },
        "trees": [_node_to_dict(t, 0) for t in model.trees],
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh, sort_keys=True, indent=None, separators=(",", ":"))


def load_model(path: str) -> ForestModel:
    """Read a model written by :func:`save_model`; rejects corrupt files."""
    try:
        with open(path, "r", encoding="ascii") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ValueError(f"corrupt model file {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"corrupt model file {path}: not a forest model")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')} in {path}")
    try:
        d = int(doc["descriptor_len"])
        cfg_doc = doc["config"]
        config = ForestConfig(
            n_trees=int(cfg_doc["n_trees"]),
            max_depth=None if cfg_doc["max_depth"] is None else int(cfg_doc["max_depth"]),
            min_leaf=int(cfg_doc["min_leaf"]),
            features_per_split=(
                None
                if cfg_doc["features_per_split"] is None
                else int(cfg_doc["features_per_split"])
            ),
            bootstrap=bool(cfg_doc["bootstrap"]),
        )
        tree_docs = doc["trees"]
        if not isinstance(tree_docs, list) or not tree_docs:
            raise ValueError(f"corrupt model file {path}: no trees")
        trees = []
        for td in tree_docs:
            arrays = {
                "feature": [],
                "threshold": [],
                "left": [],
                "right": [],
                "prob": [],
                "samples": [],
                "depth": 0,
            }
            _node_from_dict(td, arrays, 0, d)
            trees.append(
                _Tree(
                    arrays["feature"],
                    arrays["threshold"],
                    arrays["left"],
                    arrays["right"],
                    arrays["prob"],
                    arrays["samples"],
                    arrays["depth"],
                )
            )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"corrupt model file {path}: {exc!r}") from exc
    return ForestModel(config=config, descriptor_len=d, seed=int(doc.get("seed", 0)), trees=trees)


def sample_training_set(
    videos,
    per_frame: int = 10,
    n: int = 5,
    m: int = 200,
    lbp_side: int = 11,
    seed: int = 0,
) -> Dataset:
    """Sample hybrid descriptors from labeled residual videos.

    ``videos`` is an iterable of (video_id, residual_frames, label) with
    label 1 = water; every sample inherits its video's label. For each
    window start t0 in [0, frames - m], ``per_frame`` positions are drawn
    uniformly from the coordinates where both the patch and the LBP
    region fit. Videos shorter than m frames, or too small for the
    margins, are skipped with a warning. Each row is the 456-dim early
    fusion (temporal spectrum of the t0..t0+m patch-mean signal, then the
    LBP histogram of frame t0); single-descriptor training slices its
    columns. Fully reproducible from ``seed``.
    """
    if per_frame < 1:
        raise ValueError(f"per_frame must be >= 1, got {per_frame}")
    margin = max(n // 2, lbp_side // 2)
    feats, labels, ids, coords = [], [], [], []
    for v_index, (video_id, frames, label) in enumerate(videos):
        frames = frames.frames if hasattr(frames, "frames") else np.asarray(frames)
        t, height, width = frames.shape
        if t < m:
            warnings.warn(f"skipping {video_id}: {t} frames < window length {m}")
            continue
        lo, hi_x, hi_y = margin, width - 1 - margin, height - 1 - margin
        if hi_x < lo or hi_y < lo:
            warnings.warn(f"skipping {video_id}: {width}x{height} too small for margin {margin}")
            continue
        rng = np.random.default_rng(np.random.SeedSequence([seed, v_index]))
        extractor = PatchMeanExtractor(frames, n)
        code_maps: dict[int, np.ndarray] = {}
        for t0 in range(t - m + 1):
            xs = rng.integers(lo, hi_x + 1, size=per_frame)
            ys = rng.integers(lo, hi_y + 1, size=per_frame)
            if t0 not in code_maps:
                code_maps[t0] = lbp_code_map(frames[t0])
            for x, y in zip(xs, ys):
                signal = extractor.series(int(x), int(y))[t0 : t0 + m]
                td = temporal_descriptor(signal)
                sd = lbp_region_histogram(code_maps[t0], int(x), int(y), lbp_side)
                feats.append(fuse_early(td, sd))
                labels.append(label)
                ids.append(video_id)
                coords.append((int(x), int(y), t0))
    if not feats:
        raise ValueError("no samples could be drawn from the given videos")
    return Dataset(
        features=np.asarray(feats),
        labels=np.asarray(labels, dtype=np.uint8),
        video_ids=ids,
        coords=np.asarray(coords, dtype=np.int64),
    )


def dump_descriptors(dataset: Dataset, path: str) -> None:
    """Debug CSV: x, y, t0, label, then the descriptor values, one row per sample."""
    d = dataset.features.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "t0", "label"] + [f"f{i}" for i in range(d)])
        for i in range(len(dataset)):
            x, y, t0 = dataset.coords[i]
            writer.writerow(
                [int(x), int(y), int(t0), int(dataset.labels[i])]
                + [repr(float(v)) for v in dataset.features[i]]
            )
