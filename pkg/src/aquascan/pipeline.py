"""End-to-end water detection: preprocess, classify, regularize, evaluate.

A video is quarter-downsampled, reduced to its residual against the
per-pixel temporal mode, and sampled on a regular lattice: every stride-th
pixel in x and y, anchored at the first coordinate where both the patch
and the LBP region fit. Each lattice node in each m-frame window yields a
descriptor, the forest turns descriptors into water probabilities, one
spatio-temporal MRF per video smooths them, and nearest-node rendering
produces per-frame masks. Frames too close to the end to start a window
inherit the last evaluated mask.

Training samples descriptors at random valid positions (a fixed number
per window start) and inherits each video's label. The experiment driver
splits a dataset per subcategory, trains temporal, spatial and early
fusion forests on one shared sample set, and reports detection fits per
class for all four fusion modes, with and without regularization.
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .descriptors import PatchMeanExtractor, lbp_code_map, lbp_region_histogram, temporal_descriptor_batch
from .forest import Dataset, ForestConfig, predict_proba_batch, sample_training_set, save_model, train
from .metrics import NONWATER, WATER, classify_by_selection, detection_fit, per_class_report
from .mrf import ProbabilityVolume, labels_to_masks, regularize
from .residual import KdeConfig, ModeFrame, residual_video, temporal_mode_direct, temporal_mode_kde
from .synth import MANIFEST_NAME
from .video_io import (
    FrameSequence,
    MaskSequence,
    downsample_quarter,
    load_frame_sequence,
    load_mask_sequence,
    save_mask_sequence,
)

FUSION_MODES = ("temporal", "spatial", "late", "early")
MODE_VARIANTS = ("kde", "direct")


@dataclass
class PipelineConfig:
    m: int = 200  # temporal window length (and descriptor length)
    n: int = 5  # patch side for brightness signals
    lbp_side: int = 11  # spatial descriptor region side
    stride: int = 11  # test-time lattice step
    per_frame_samples: int = 10  # training samples per window start
    lam: float = 1.0  # pairwise weight of the MRF
    fusion: str = "early"
    mode_variant: str = "kde"  # temporal mode estimator
    kde_bandwidth: float | None = None  # None = Scott's rule
    forest: ForestConfig = field(default_factory=ForestConfig)
    seed: int = 0

    def __post_init__(self):
        if self.m < 2:
            raise ValueError(f"m must be >= 2, got {self.m}")
        if self.n < 1 or self.n % 2 == 0:
            raise ValueError(f"n must be odd and >= 1, got {self.n}")
        if self.lbp_side < 3 or self.lbp_side % 2 == 0:
            raise ValueError(f"lbp_side must be odd and >= 3, got {self.lbp_side}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.per_frame_samples < 1:
            raise ValueError(f"per_frame_samples must be >= 1, got {self.per_frame_samples}")
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.fusion not in FUSION_MODES:
            raise ValueError(f"unknown fusion mode {self.fusion!r}")
        if self.mode_variant not in MODE_VARIANTS:
            raise ValueError(f"unknown mode variant {self.mode_variant!r}")

    @property
    def margin(self) -> int:
        """Pixels a sample must keep from the border for patch and region."""
        return max(self.n // 2, self.lbp_side // 2)


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def grid_coordinates(width: int, height: int, cfg: PipelineConfig) -> tuple[np.ndarray, np.ndarray]:
    """Lattice node coordinates (xs, ys): every stride-th valid pixel,
    anchored at the margin. Raises when no node fits."""
    lo = cfg.margin
    hi_x, hi_y = width - 1 - cfg.margin, height - 1 - cfg.margin
    if hi_x < lo or hi_y < lo:
        raise ValueError(f"{width}x{height} frames leave no valid sample position")
    xs = np.arange(lo, hi_x + 1, cfg.stride)
    ys = np.arange(lo, hi_y + 1, cfg.stride)
    return xs, ys


def preprocess_video(
    seq: FrameSequence, cfg: PipelineConfig
) -> tuple[FrameSequence, ModeFrame, FrameSequence]:
    """Quarter-downsample, estimate the temporal mode, build the residual."""
    down = downsample_quarter(seq)
    if cfg.mode_variant == "direct":
        mode = temporal_mode_direct(down)
    else:
        mode = temporal_mode_kde(down, KdeConfig(bandwidth=cfg.kde_bandwidth))
    return down, mode, residual_video(down, mode)


def _node_descriptor_blocks(residual: FrameSequence, cfg: PipelineConfig):
    """Temporal and spatial descriptor blocks for every (window, node).

    Returns (spectra, hists, xs, ys) with spectra (n_win * n_nodes, m) and
    hists (n_win * n_nodes, 256), rows ordered window-major then raster
    over nodes.
    """
    frames = residual.frames
    t = residual.frame_count
    if t < cfg.m:
        raise ValueError(f"video has {t} frames, needs >= {cfg.m}")
    n_win = t - cfg.m + 1
    xs, ys = grid_coordinates(residual.width, residual.height, cfg)
    extractor = PatchMeanExtractor(frames, cfg.n)
    series = np.stack([extractor.series(int(x), int(y)) for y in ys for x in xs])
    windows = np.lib.stride_tricks.sliding_window_view(series, cfg.m, axis=1)
    # (n_nodes, n_win, m) -> (n_win, n_nodes, m)
    signals = np.ascontiguousarray(windows.transpose(1, 0, 2))
    spectra = temporal_descriptor_batch(signals.reshape(-1, cfg.m))
    hists = np.empty((n_win, len(ys) * len(xs), 256), dtype=np.float64)
    for t0 in range(n_win):
        codes = lbp_code_map(frames[t0])
        node = 0
        for y in ys:
            for x in xs:
                hists[t0, node] = lbp_region_histogram(codes, int(x), int(y), cfg.lbp_side)
                node += 1
    return spectra, hists.reshape(-1, 256), xs, ys


def _probs_for_mode(
    mode: str, models: dict, spectra: np.ndarray, hists: np.ndarray
) -> np.ndarray:
    if mode == "early":
        return predict_proba_batch(models["early"], np.concatenate([spectra, hists], axis=1))
    if mode == "temporal":
        return predict_proba_batch(models["temporal"], spectra)
    if mode == "spatial":
        return predict_proba_batch(models["spatial"], hists)
    if mode == "late":
        pt = predict_proba_batch(models["temporal"], spectra)
        ps = predict_proba_batch(models["spatial"], hists)
        return 0.5 * (pt + ps)
    raise ValueError(f"unknown fusion mode {mode!r}")


def _required_models(mode: str) -> tuple[str, ...]:
    if mode == "early":
        return ("early",)
    if mode in ("temporal", "spatial"):
        return (mode,)
    return ("temporal", "spatial")


def compute_probability_volume(
    residual: FrameSequence, models: dict, cfg: PipelineConfig
) -> ProbabilityVolume:
    """Per-node water probabilities for every evaluated frame of a video."""
    for key in _required_models(cfg.fusion):
        if key not in models:
            raise ValueError(f"fusion mode {cfg.fusion!r} needs a {key!r} model")
    spectra, hists, xs, ys = _node_descriptor_blocks(residual, cfg)
    probs = _probs_for_mode(cfg.fusion, models, spectra, hists)
    n_win = residual.frame_count - cfg.m + 1
    grid = probs.reshape(n_win, len(ys), len(xs))
    return ProbabilityVolume(probs=grid, stride=cfg.stride, origin=(int(xs[0]), int(ys[0])))


def _extend_masks(eval_masks: MaskSequence, total_frames: int) -> MaskSequence:
    """Give trailing frames (no full window) the last evaluated mask."""
    missing = total_frames - eval_masks.count
    if missing <= 0:
        return eval_masks
    tail = np.repeat(eval_masks.masks[-1:], missing, axis=0)
    return MaskSequence(np.concatenate([eval_masks.masks, tail]))


def detect(
    video: FrameSequence, models: dict, cfg: PipelineConfig
) -> tuple[MaskSequence, ProbabilityVolume]:
    """Full pipeline on one video: masks for every downsampled frame,
    plus the raw probability volume."""
    _, _, residual = preprocess_video(video, cfg)
    volume = compute_probability_volume(residual, models, cfg)
    labels = regularize(volume, cfg.lam)
    masks = labels_to_masks(labels, (residual.width, residual.height))
    return _extend_masks(masks, residual.frame_count), volume


def train_pipeline(videos, cfg: PipelineConfig) -> tuple[dict, Dataset]:
    """Train the forests the configured fusion mode needs.

    ``videos`` is an iterable of (video_id, FrameSequence, label) with
    label "water" or "nonwater" (full-resolution input; preprocessing
    happens here). Returns (models, dataset): the sampled hybrid dataset
    is shared, single-descriptor models train on its column slices.
    """
    prepared = []
    for video_id, seq, label in videos:
        if label not in (WATER, NONWATER):
            raise ValueError(f"unknown label {label!r} for {video_id}")
        _, _, residual = preprocess_video(seq, cfg)
        prepared.append((video_id, residual, 1 if label == WATER else 0))
    dataset = sample_training_set(
        prepared,
        per_frame=cfg.per_frame_samples,
        n=cfg.n,
        m=cfg.m,
        lbp_side=cfg.lbp_side,
        seed=_derive_seed(cfg.seed, 0),
    )
    models = _train_models(dataset, cfg, _required_models(cfg.fusion))
    return models, dataset


_MODEL_SEED_TAG = {"early": 1, "temporal": 2, "spatial": 3}


def _train_models(dataset: Dataset, cfg: PipelineConfig, which) -> dict:
    blocks = {
        "early": dataset.features,
        "temporal": dataset.features[:, : cfg.m],
        "spatial": dataset.features[:, cfg.m :],
    }
    models = {}
    for key in which:
        sub = Dataset(
            features=blocks[key],
            labels=dataset.labels,
            video_ids=dataset.video_ids,
            coords=dataset.coords,
        )
        models[key] = train(sub, cfg.forest, seed=_derive_seed(cfg.seed, _MODEL_SEED_TAG[key]))
    return models


def _split_dataset(manifest: dict, cfg: PipelineConfig) -> tuple[list, list]:
    """Per-subcategory half/half split; odd counts favor the test side."""
    groups: dict[tuple[str, str], list[str]] = {}
    for video in manifest["videos"]:
        groups.setdefault((video["label"], video["subcategory"]), []).append(video["id"])
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 4]))
    train_ids, test_ids = [], []
    for key in sorted(groups):
        ids = sorted(groups[key])
        if len(ids) < 2:
            warnings.warn(f"subcategory {key} has {len(ids)} video(s); all go to the test side")
            test_ids.extend(ids)
            continue
        perm = rng.permutation(len(ids))
        k = len(ids) // 2
        train_ids.extend(ids[i] for i in perm[:k])
        test_ids.extend(ids[i] for i in perm[k:])
    return sorted(train_ids), sorted(test_ids)


def run_experiment(dataset_dir: str, cfg: PipelineConfig | None = None, out_dir: str | None = None) -> dict:
    """Train/test experiment over a generated dataset directory.

    Splits every subcategory in half, trains temporal, spatial and early
    forests on one shared sample set, and evaluates all four fusion modes
    on the test videos, each with lambda = 0 (no regularization) and the
    configured lambda. Returns the report dict; with ``out_dir`` also
    writes report.json, report.txt, the trained models, and the masks of
    the early+regularized configuration.
    """
    if cfg is None:
        cfg = PipelineConfig()
    manifest_path = os.path.join(dataset_dir, MANIFEST_NAME)
    with open(manifest_path, "r", encoding="ascii") as fh:
        manifest = json.load(fh)
    by_id = {v["id"]: v for v in manifest["videos"]}
    train_ids, test_ids = _split_dataset(manifest, cfg)
    if not train_ids or not test_ids:
        raise ValueError("dataset too small to split into train and test")

    # preprocess every video once; keep residuals and downsampled truths
    residuals: dict[str, FrameSequence] = {}
    truths: dict[str, MaskSequence] = {}
    for video_id in train_ids + test_ids:
        seq = load_frame_sequence(os.path.join(dataset_dir, video_id))
        _, _, residual = preprocess_video(seq, cfg)
        residuals[video_id] = residual
        truths[video_id] = load_mask_sequence(
            os.path.join(dataset_dir, video_id, "mask.pgm"),
            (residual.width, residual.height),
        )

    prepared = [
        (vid, residuals[vid], 1 if by_id[vid]["label"] == WATER else 0) for vid in train_ids
    ]
    dataset = sample_training_set(
        prepared,
        per_frame=cfg.per_frame_samples,
        n=cfg.n,
        m=cfg.m,
        lbp_side=cfg.lbp_side,
        seed=_derive_seed(cfg.seed, 0),
    )
    models = _train_models(dataset, cfg, ("early", "temporal", "spatial"))

    lambdas = {"unregularized": 0.0, "regularized": cfg.lam}
    fits: dict[str, dict[str, list]] = {m_: {k: [] for k in lambdas} for m_ in FUSION_MODES}
    per_video: dict[str, dict[str, dict[str, float]]] = {
        m_: {k: {} for k in lambdas} for m_ in FUSION_MODES
    }
    classified: dict[str, dict[str, int]] = {m_: {k: 0 for k in lambdas} for m_ in FUSION_MODES}
    early_reg_masks: dict[str, MaskSequence] = {}

    for video_id in test_ids:
        residual = residuals[video_id]
        label = by_id[video_id]["label"]
        truth = truths[video_id]
        spectra, hists, xs, ys = _node_descriptor_blocks(residual, cfg)
        n_win = residual.frame_count - cfg.m + 1
        whole_frame = np.ones((residual.height, residual.width), dtype=np.uint8)
        for mode in FUSION_MODES:
            probs = _probs_for_mode(mode, models, spectra, hists)
            volume = ProbabilityVolume(
                probs=probs.reshape(n_win, len(ys), len(xs)),
                stride=cfg.stride,
                origin=(int(xs[0]), int(ys[0])),
            )
            for reg_name, lam in lambdas.items():
                labels = regularize(volume, lam)
                masks = _extend_masks(
                    labels_to_masks(labels, (residual.width, residual.height)),
                    residual.frame_count,
                )
                fit = detection_fit(masks, truth)
                fits[mode][reg_name].append((label, fit))
                per_video[mode][reg_name][video_id] = fit
                if classify_by_selection(masks, whole_frame) == label:
                    classified[mode][reg_name] += 1
                if mode == "early" and reg_name == "regularized":
                    early_reg_masks[video_id] = masks

    results: dict[str, dict] = {}
    for mode in FUSION_MODES:
        results[mode] = {}
        for reg_name in lambdas:
            report = per_class_report(fits[mode][reg_name])
            results[mode][reg_name] = {
                "water_pct": report.water_pct,
                "nonwater_pct": report.nonwater_pct,
                "average_pct": report.average_pct,
                "classification_accuracy": classified[mode][reg_name] / len(test_ids),
                "per_video": per_video[mode][reg_name],
            }

    report = {
        "config": asdict(cfg),
        "dataset": {"dir": os.path.basename(os.path.normpath(dataset_dir)), "seed": manifest.get("seed")},
        "split": {"train": train_ids, "test": test_ids},
        "training_samples": int(len(dataset)),
        "results": results,
        "table": _format_experiment_table(results),
    }

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.json"), "w", encoding="ascii") as fh:
            json.dump(report, fh, sort_keys=True, indent=2)
            fh.write("\n")
        with open(os.path.join(out_dir, "report.txt"), "w", encoding="ascii") as fh:
            fh.write(report["table"] + "\n")
        for key, model in models.items():
            save_model(model, os.path.join(out_dir, f"model.{key}.json"))
        for video_id, masks in early_reg_masks.items():
            save_mask_sequence(masks, os.path.join(out_dir, "masks", video_id))
    return report


def _format_experiment_table(results: dict) -> str:
    """Text table: detection fit percent per class, one column per fusion mode."""
    headers = {"temporal": "Temporal", "spatial": "Spatial", "late": "Late fus.", "early": "Early fus."}
    rows = [("Water", "water_pct"), ("Non-water", "nonwater_pct"), ("Average", "average_pct")]
    blocks = [("No regularization", "unregularized"), ("Regularized", "regularized")]
    lines = []
    for title, reg_name in blocks:
        lines.append(title)
        lines.append(f"{'':<12}" + "".join(f"{headers[m_]:>11}" for m_ in FUSION_MODES))
        for row_title, key in rows:
            cells = []
            for mode in FUSION_MODES:
                v = results[mode][reg_name][key]
                cells.append(f"{'-':>11}" if v is None else f"{v:11.1f}")
            lines.append(f"{row_title:<12}" + "".join(cells))
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"
