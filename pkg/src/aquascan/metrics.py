"""Detection-fit metrics and per-class result tables.

The fit of a predicted mask against the truth is one minus the fraction
of disagreeing pixels; a video's detection fit averages that over frames.
Whole-video classification calls a video water when, averaged over
frames, at least half of a selected region is labeled water.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .video_io import MaskSequence

WATER = "water"
NONWATER = "nonwater"


@dataclass
class DetectionReport:
    """Per-frame fits and their mean for one video."""

    per_frame_fit: list[float]
    video_fit: float


@dataclass
class ClassReport:
    """Mean detection fit per class, as percents, plus their unweighted mean.

    A class with no videos reports None and triggers a warning at build
    time. ``counts`` records how many videos entered each class mean.
    """

    water_pct: float | None
    nonwater_pct: float | None
    average_pct: float | None
    counts: dict = field(default_factory=dict)

    def format_table(self, title: str = "Detection fit") -> str:
        """Render the report as a small two-column text table."""

        def cell(v: float | None) -> str:
            return "   -" if v is None else f"{v:.1f}"

        lines = [
            f"{title}",
            f"{'Water':<12}{cell(self.water_pct):>8}",
            f"{'Non-water':<12}{cell(self.nonwater_pct):>8}",
            f"{'Average':<12}{cell(self.average_pct):>8}",
        ]
        return "\n".join(lines)


def _as_binary(mask: np.ndarray, name: str) -> np.ndarray:
    mask = np.asarray(mask)
    if not np.isin(mask, (0, 1)).all():
        raise ValueError(f"{name} mask must be binary 0/1")
    return mask.astype(np.uint8)


def frame_fit(pred: np.ndarray, truth: np.ndarray) -> float:
    """1 - |pred - truth| / (w * h) for one pair of binary masks."""
    pred = _as_binary(pred, "predicted")
    truth = _as_binary(truth, "truth")
    if pred.shape != truth.shape or pred.ndim != 2:
        raise ValueError(f"mask shapes differ: {pred.shape} vs {truth.shape}")
    wrong = int(np.abs(pred.astype(np.int8) - truth.astype(np.int8)).sum())
    return 1.0 - wrong / pred.size


def detection_fit(pred: MaskSequence, truth: MaskSequence) -> float:
    """Mean frame fit over a video; a static truth applies to every frame."""
    return detection_report(pred, truth).video_fit


def detection_report(pred: MaskSequence, truth: MaskSequence) -> DetectionReport:
    """Per-frame fits plus their mean. Dims must match; a static truth
    (or static prediction) is broadcast against the other side."""
    if (pred.width, pred.height) != (truth.width, truth.height):
        raise ValueError(
            f"mask dims differ: {pred.width}x{pred.height} vs {truth.width}x{truth.height}"
        )
    if not (pred.static or truth.static or pred.count == truth.count):
        raise ValueError(f"frame counts differ: {pred.count} vs {truth.count}")
    count = max(pred.count, truth.count)
    fits = [
        frame_fit(pred.mask_for_frame(i), truth.mask_for_frame(i)) for i in range(count)
    ]
    return DetectionReport(per_frame_fit=fits, video_fit=float(np.mean(fits)))


def classify_by_selection(pred: MaskSequence, selection: np.ndarray) -> str:
    """Whole-video water/nonwater decision over a selected region.

    The per-frame water ratio inside the selection is averaged over all
    frames; the video is water when that mean is at least 1/2. The
    selection is a binary 2-d map matching the mask dims and must select
    at least one pixel.
    """
    selection = _as_binary(selection, "selection")
    if selection.shape != (pred.height, pred.width):
        raise ValueError(
            f"selection {selection.shape} does not match masks "
            f"({pred.height}, {pred.width})"
        )
    chosen = selection == 1
    n_sel = int(chosen.sum())
    if n_sel == 0:
        raise ValueError("selection is empty")
    ratios = [float(pred.mask_for_frame(i)[chosen].mean()) for i in range(pred.count)]
    return WATER if float(np.mean(ratios)) >= 0.5 else NONWATER


def per_class_report(results) -> ClassReport:
    """Summarize (label, fit) pairs into per-class percent means.

    ``results`` holds one entry per video: its true class label (water /
    nonwater) and its detection fit in [0, 1]. The average row is the
    unweighted mean of the two class means, computed before any display
    rounding. Missing classes warn and leave None cells.
    """
    by_class: dict[str, list[float]] = {WATER: [], NONWATER: []}
    for label, fit in results:
        if label not in by_class:
            raise ValueError(f"unknown class label {label!r}")
        if not 0.0 <= fit <= 1.0:
            raise ValueError(f"fit {fit} outside [0, 1]")
        by_class[label].append(float(fit))
    means: dict[str, float | None] = {}
    for label, fits in by_class.items():
        if fits:
            means[label] = 100.0 * float(np.mean(fits))
        else:
            warnings.warn(f"no videos of class {label}; reporting a partial table")
            means[label] = None
    present = [v for v in means.values() if v is not None]
    average = float(np.mean(present)) if present else None
    return ClassReport(
        water_pct=means[WATER],
        nonwater_pct=means[NONWATER],
        average_pct=average,
        counts={label: len(fits) for label, fits in by_class.items()},
    )
