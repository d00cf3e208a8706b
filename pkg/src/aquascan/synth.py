"""Synthetic dynamic-texture videos with exact ground truth.

Small, fully deterministic stand-ins for real footage: water is a static
base (color plus a vertical reflection ramp) with superposed traveling
sinusoidal waves; the non-water classes are chosen to probe each
descriptor's failure mode. Flags wave aperiodically at low frequency with
coarse spatial folds (temporally water-like, spatially not), flicker is a
static fine ripple texture under per-frame global brightness jumps
(spatially water-like, temporally not), noise is white in time and space,
and static scenes do not move at all.

Every video derives from one seed; regeneration is byte-identical.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace

import numpy as np

from .video_io import FrameSequence, MaskSequence, save_frame_sequence, write_pgm

NONWATER_KINDS = ("flag", "noise", "static", "flicker")
MASK_GEOMETRIES = ("full", "half", "rect")

MANIFEST_NAME = "manifest.json"


@dataclass
class SynthConfig:
    width: int = 160
    height: int = 120
    frames: int = 260
    seed: object = 0  # anything numpy SeedSequence accepts

    # water: traveling sinusoids over a static base
    wave_count: tuple[int, int] = (2, 4)  # inclusive draw range
    freq_range: tuple[float, float] = (0.01, 0.2)  # cycles per frame
    wavelength_range: tuple[float, float] = (10.0, 28.0)  # pixels
    amp_range: tuple[float, float] = (8.0, 30.0)
    base_range: tuple[float, float] = (90.0, 160.0)
    gradient: float = 40.0  # vertical reflection ramp over the water
    mask_geometry: str = "full"
    rect_coverage: float = 0.7

    # nonwater
    kind: str = "flag"
    fold_wavelength_range: tuple[float, float] = (48.0, 120.0)  # flag folds
    flicker_gain_range: tuple[float, float] = (0.55, 1.45)

    def __post_init__(self):
        if self.width < 4 or self.height < 4:
            raise ValueError(f"frame size must be at least 4x4, got {self.width}x{self.height}")
        if self.frames < 1:
            raise ValueError(f"frames must be >= 1, got {self.frames}")
        for name in ("freq_range", "wavelength_range", "amp_range", "base_range",
                     "fold_wavelength_range", "flicker_gain_range"):
            lo, hi = getattr(self, name)
            if not 0.0 < lo <= hi:
                raise ValueError(f"{name} must satisfy 0 < low <= high, got ({lo}, {hi})")
        if self.freq_range[1] > 0.5:
            raise ValueError(f"frequencies must lie in (0, 0.5], got {self.freq_range}")
        if self.wave_count[0] < 1 or self.wave_count[0] > self.wave_count[1]:
            raise ValueError(f"bad wave_count range {self.wave_count}")
        if self.mask_geometry not in MASK_GEOMETRIES:
            raise ValueError(f"unknown mask geometry {self.mask_geometry!r}")
        if not 0.0 < self.rect_coverage <= 1.0:
            raise ValueError(f"rect_coverage must lie in (0, 1], got {self.rect_coverage}")
        if self.kind not in NONWATER_KINDS:
            raise ValueError(f"unknown nonwater kind {self.kind!r}")


def _rng(cfg: SynthConfig) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(cfg.seed))


def _quantize(field: np.ndarray) -> np.ndarray:
    return np.floor(np.clip(field, 0.0, 255.0) + 0.5).astype(np.uint8)


def _grids(cfg: SynthConfig):
    yy, xx = np.mgrid[0 : cfg.height, 0 : cfg.width].astype(np.float64)
    t = np.arange(cfg.frames, dtype=np.float64)
    return yy, xx, t


def _mask(cfg: SynthConfig) -> np.ndarray:
    mask = np.zeros((cfg.height, cfg.width), dtype=np.uint8)
    if cfg.mask_geometry == "full":
        mask[:] = 1
    elif cfg.mask_geometry == "half":
        mask[:, : (cfg.width + 1) // 2] = 1
    else:  # centered rectangle covering ~rect_coverage of the frame
        side = np.sqrt(cfg.rect_coverage)
        rw = max(1, int(round(cfg.width * side)))
        rh = max(1, int(round(cfg.height * side)))
        x0 = (cfg.width - rw) // 2
        y0 = (cfg.height - rh) // 2
        mask[y0 : y0 + rh, x0 : x0 + rw] = 1
    return mask


def _land_texture(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    """Smooth static surround for partially water scenes."""
    yy, xx, _ = _grids(cfg)
    tex = np.full((cfg.height, cfg.width), rng.uniform(*cfg.base_range))
    for _ in range(3):
        wavelength = rng.uniform(25.0, 80.0)
        theta = rng.uniform(0.0, 2.0 * np.pi)
        amp = rng.uniform(10.0, 25.0)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        spatial = 2.0 * np.pi * (xx * np.cos(theta) + yy * np.sin(theta)) / wavelength
        tex += amp * np.sin(spatial + phase)
    return tex


def generate_water(cfg: SynthConfig) -> tuple[FrameSequence, MaskSequence]:
    """Water video: static base + traveling waves inside the mask region.

    Pixels outside the mask show a static land texture. The mask is a
    single static frame.
    """
    rng = _rng(cfg)
    yy, xx, t = _grids(cfg)
    base = rng.uniform(*cfg.base_range) + cfg.gradient * yy / max(1, cfg.height - 1)
    field = np.broadcast_to(base, (cfg.frames, cfg.height, cfg.width)).copy()
    k = int(rng.integers(cfg.wave_count[0], cfg.wave_count[1] + 1))
    for _ in range(k):
        freq = rng.uniform(*cfg.freq_range)
        wavelength = rng.uniform(*cfg.wavelength_range)
        theta = rng.uniform(0.0, 2.0 * np.pi)
        amp = rng.uniform(*cfg.amp_range)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        spatial = 2.0 * np.pi * (xx * np.cos(theta) + yy * np.sin(theta)) / wavelength
        field += amp * np.sin(spatial[None] + 2.0 * np.pi * freq * t[:, None, None] + phase)
    mask = _mask(cfg)
    if not mask.all():
        land = _land_texture(cfg, rng)
        field[:, mask == 0] = land[mask == 0]
    return FrameSequence(_quantize(field)), MaskSequence(mask)


def _flag_video(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    yy, xx, t = _grids(cfg)
    base = rng.uniform(*cfg.base_range)
    field = np.full((cfg.frames, cfg.height, cfg.width), base)
    k = int(rng.integers(2, 4))
    for _ in range(k):
        wavelength = rng.uniform(*cfg.fold_wavelength_range)
        theta = rng.uniform(0.0, 2.0 * np.pi)
        amp = rng.uniform(15.0, 40.0)
        f0 = rng.uniform(0.005, 0.03)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        # aperiodic waving: base rate plus an accumulated random drift
        drift = np.cumsum(rng.normal(0.0, 0.05, size=cfg.frames))
        spatial = 2.0 * np.pi * (xx * np.cos(theta) + yy * np.sin(theta)) / wavelength
        temporal = 2.0 * np.pi * f0 * t + drift + phase
        field += amp * np.sin(spatial[None] + temporal[:, None, None])
    return field


def _flicker_video(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    yy, xx, t = _grids(cfg)
    base = rng.uniform(*cfg.base_range)
    tex = np.zeros((cfg.height, cfg.width))
    for _ in range(3):
        wavelength = rng.uniform(*cfg.wavelength_range)
        theta = rng.uniform(0.0, 2.0 * np.pi)
        amp = rng.uniform(10.0, 22.0)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        spatial = 2.0 * np.pi * (xx * np.cos(theta) + yy * np.sin(theta)) / wavelength
        tex += amp * np.sin(spatial + phase)
    gains = rng.uniform(*cfg.flicker_gain_range, size=cfg.frames)
    return base + tex[None] * gains[:, None, None]


def generate_nonwater(cfg: SynthConfig) -> tuple[FrameSequence, MaskSequence]:
    """Non-water video of the configured kind; the mask is all zero."""
    rng = _rng(cfg)
    if cfg.kind == "flag":
        field = _flag_video(cfg, rng)
        frames = _quantize(field)
    elif cfg.kind == "noise":
        frames = rng.integers(0, 256, size=(cfg.frames, cfg.height, cfg.width), dtype=np.uint8)
    elif cfg.kind == "static":
        tex = _quantize(_land_texture(cfg, rng))
        frames = np.broadcast_to(tex, (cfg.frames, cfg.height, cfg.width)).copy()
    else:  # flicker
        frames = _quantize(_flicker_video(cfg, rng))
    mask = np.zeros((cfg.height, cfg.width), dtype=np.uint8)
    return FrameSequence(frames), MaskSequence(mask)


# Subcategory templates cycled over when building a dataset. Water varies
# wave regime and mask geometry; nonwater varies the texture kind.
WATER_SUBCATEGORIES: tuple[tuple[str, dict], ...] = (
    ("calm", {"wave_count": (3, 5), "freq_range": (0.01, 0.06), "amp_range": (10.0, 22.0)}),
    ("waves", {"wave_count": (5, 8), "freq_range": (0.02, 0.16), "amp_range": (12.0, 30.0)}),
    (
        "ripple",
        {
            "wave_count": (7, 10),
            "freq_range": (0.05, 0.2),
            "wavelength_range": (10.0, 16.0),
            "amp_range": (12.0, 26.0),
        },
    ),
    (
        "pool",
        {
            "wave_count": (4, 7),
            "freq_range": (0.02, 0.14),
            "mask_geometry": "rect",
            "rect_coverage": 0.72,
        },
    ),
)

NONWATER_SUBCATEGORIES: tuple[tuple[str, dict], ...] = (
    ("flag", {"kind": "flag"}),
    ("noise", {"kind": "noise"}),
    ("static", {"kind": "static"}),
    ("flicker", {"kind": "flicker"}),
)


def generate_dataset(
    out_dir: str,
    n_per_class: int = 10,
    width: int = 160,
    height: int = 120,
    frames: int = 260,
    seed: int = 0,
) -> dict:
    """Write a labeled dataset of synthetic videos plus a manifest.

    Videos land in ``out_dir/<label>_<subcategory>_<index>/`` as
    ``frame_%06d.pgm`` with a static ``mask.pgm`` each; subcategories
    cycle through the templates above. The manifest (JSON, one entry per
    video, insertion order = generation order) is returned and written to
    ``out_dir/manifest.json``. Byte-identical for a given seed.
    """
    if n_per_class < 1:
        raise ValueError(f"n_per_class must be >= 1, got {n_per_class}")
    os.makedirs(out_dir, exist_ok=True)
    base_cfg = SynthConfig(width=width, height=height, frames=frames)
    plan = []
    for i in range(n_per_class):
        name, overrides = WATER_SUBCATEGORIES[i % len(WATER_SUBCATEGORIES)]
        plan.append(("water", name, overrides, i))
    for i in range(n_per_class):
        name, overrides = NONWATER_SUBCATEGORIES[i % len(NONWATER_SUBCATEGORIES)]
        plan.append(("nonwater", name, overrides, i))

    videos = []
    for order, (label, sub, overrides, i) in enumerate(plan):
        cfg = replace(base_cfg, seed=[seed, order], **overrides)
        if label == "water":
            seq, mask = generate_water(cfg)
        else:
            seq, mask = generate_nonwater(cfg)
        video_id = f"{label}_{sub}_{i:03d}"
        video_dir = os.path.join(out_dir, video_id)
        save_frame_sequence(seq, video_dir)
        write_pgm(os.path.join(video_dir, "mask.pgm"), mask.masks[0] * np.uint8(255))
        videos.append(
            {
                "id": video_id,
                "label": label,
                "subcategory": sub,
                "frames": frames,
                "width": width,
                "height": height,
            }
        )
    manifest = {
        "seed": seed,
        "n_per_class": n_per_class,
        "width": width,
        "height": height,
        "frames": frames,
        "videos": videos,
    }
    with open(os.path.join(out_dir, MANIFEST_NAME), "w", encoding="ascii") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return manifest
