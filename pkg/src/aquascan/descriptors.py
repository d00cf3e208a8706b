"""Local spatio-temporal descriptors for water classification.

The temporal descriptor characterizes how a small patch's mean brightness
moves over an m-frame window: the magnitude spectrum of the signal's DFT
with the DC bin zeroed and the rest l1-normalized. Zeroing DC makes it
invariant to a constant brightness offset, l1 normalization to amplitude
scaling, and taking magnitudes to cyclic temporal shifts; together these
factor out when and how strongly a wave passes, keeping only its shape.

The spatial descriptor is a 256-bin histogram of 8-neighbor local binary
patterns over a region, capturing the texture of the residual spatially.
Early fusion concatenates both vectors; late fusion averages the two
classifier outputs.
"""

from __future__ import annotations

import numpy as np

from .video_io import FrameSequence

# Post-DC l1 mass below this is treated as a degenerate (constant) signal.
DEGENERATE_NORM = 1e-12

# 8-neighbor offsets as (dx, dy), starting east and proceeding
# counter-clockwise in image coordinates (y grows downward).
LBP_OFFSETS: tuple[tuple[int, int], ...] = (
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
)


def _frames_of(video) -> np.ndarray:
    return video.frames if isinstance(video, FrameSequence) else np.asarray(video)


def extract_signal(video, x: int, y: int, t0: int, n: int, m: int) -> np.ndarray:
    """Mean brightness of the n x n patch centered at (x, y) over frames [t0, t0+m).

    n must be odd and the patch must lie fully inside every frame; the
    window must fit the video. Returns an m-vector of float64 means.
    """
    frames = _frames_of(video)
    t, height, width = frames.shape
    if n < 1 or n % 2 == 0:
        raise ValueError(f"patch side must be odd and >= 1, got {n}")
    if m < 1:
        raise ValueError(f"window length must be >= 1, got {m}")
    r = n // 2
    if not (r <= x < width - r and r <= y < height - r):
        raise ValueError(f"patch at ({x}, {y}) with side {n} leaves the {width}x{height} frame")
    if not (0 <= t0 and t0 + m <= t):
        raise ValueError(f"window [{t0}, {t0 + m}) leaves the video of {t} frames")
    patch = frames[t0 : t0 + m, y - r : y + r + 1, x - r : x + r + 1]
    return patch.astype(np.int64).sum(axis=(1, 2)) / float(n * n)


class PatchMeanExtractor:
    """Per-frame integral images for O(1) patch-mean lookups.

    Produces exactly the same float64 values as :func:`extract_signal`
    (integer box sums divided by n*n), so bulk extraction can share one
    precomputation per video.
    """

    def __init__(self, video, n: int):
        frames = _frames_of(video)
        if n < 1 or n % 2 == 0:
            raise ValueError(f"patch side must be odd and >= 1, got {n}")
        self.n = n
        self.r = n // 2
        self.frame_count, self.height, self.width = frames.shape
        ii = frames.astype(np.int64).cumsum(axis=1).cumsum(axis=2)
        self._ii = np.zeros((self.frame_count, self.height + 1, self.width + 1), dtype=np.int64)
        self._ii[:, 1:, 1:] = ii

    def series(self, x: int, y: int) -> np.ndarray:
        """Patch means at (x, y) for every frame, as a float64 (t,) vector."""
        r = self.r
        if not (r <= x < self.width - r and r <= y < self.height - r):
            raise ValueError(
                f"patch at ({x}, {y}) with side {self.n} leaves the {self.width}x{self.height} frame"
            )
        ii = self._ii
        sums = (
            ii[:, y + r + 1, x + r + 1]
            - ii[:, y - r, x + r + 1]
            - ii[:, y + r + 1, x - r]
            + ii[:, y - r, x - r]
        )
        return sums / float(self.n * self.n)


def temporal_descriptor(signal: np.ndarray) -> np.ndarray:
    """Shift-, offset- and scale-invariant spectrum of a brightness signal.

    DFT magnitudes with the DC bin set to zero, then l1-normalized. A
    signal whose post-DC l1 mass is below 1e-12 (constant signal) maps to
    the all-zero descriptor. Output length equals the input length.
    """
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 1 or signal.size < 2:
        raise ValueError(f"signal must be 1-d with length >= 2, got shape {signal.shape}")
    mag = np.abs(np.fft.fft(signal))
    mag[0] = 0.0
    total = mag.sum()
    if total < DEGENERATE_NORM:
        return np.zeros_like(mag)
    return mag / total


def temporal_descriptor_batch(signals: np.ndarray) -> np.ndarray:
    """Row-wise :func:`temporal_descriptor` for an (n, m) signal matrix."""
    signals = np.asarray(signals, dtype=np.float64)
    if signals.ndim != 2 or signals.shape[1] < 2:
        raise ValueError(f"signals must be (n, m) with m >= 2, got shape {signals.shape}")
    mag = np.abs(np.fft.fft(signals, axis=1))
    mag[:, 0] = 0.0
    totals = mag.sum(axis=1, keepdims=True)
    degenerate = totals[:, 0] < DEGENERATE_NORM
    totals[degenerate] = 1.0
    out = mag / totals
    out[degenerate] = 0.0
    return out


def min_shift_distance_oracle(
    s1: np.ndarray,
    s2: np.ndarray,
    shifts: np.ndarray,
    offsets: np.ndarray,
    amplitudes: np.ndarray,
) -> float:
    """Minimum raw-signal distance over cyclic shifts, offsets and amplitudes.

    d = min over (t, b, a) of sum_i |s1[i] - a * (s2[(i + t) mod m] + b)|.
    Exhaustive evaluation over the given finite grids; a reference for
    checking that the spectral descriptor orders signal pairs the same
    way. Restricted to signals of length <= 64 to keep it honest about
    its O(m * |T| * |B| * |A|) cost.
    """
    s1 = np.asarray(s1, dtype=np.float64)
    s2 = np.asarray(s2, dtype=np.float64)
    if s1.shape != s2.shape or s1.ndim != 1:
        raise ValueError(f"signals must be 1-d and equally long, got {s1.shape} vs {s2.shape}")
    m = s1.size
    if m > 64:
        raise ValueError(f"oracle is exhaustive; signal length {m} exceeds 64")
    shifts = np.asarray(shifts, dtype=np.int64)
    offsets = np.asarray(offsets, dtype=np.float64)
    amplitudes = np.asarray(amplitudes, dtype=np.float64)
    if shifts.size == 0 or offsets.size == 0 or amplitudes.size == 0:
        raise ValueError("shift, offset and amplitude grids must be non-empty")
    best = np.inf
    for t in shifts:
        rolled = np.roll(s2, -int(t))  # rolled[i] == s2[(i + t) mod m]
        cand = s1[None, None, :] - amplitudes[:, None, None] * (
            rolled[None, None, :] + offsets[None, :, None]
        )
        d = np.abs(cand).sum(axis=2).min()
        if d < best:
            best = float(d)
    return best


def lbp_value(center: int, neighbors) -> int:
    """8-bit local binary pattern: bit p set when neighbor p >= center.

    Neighbors are ordered east first, then counter-clockwise (E, NE, N,
    NW, W, SW, S, SE).
    """
    neighbors = list(neighbors)
    if len(neighbors) != 8:
        raise ValueError(f"need exactly 8 neighbors, got {len(neighbors)}")
    code = 0
    for p, g in enumerate(neighbors):
        if g >= center:
            code |= 1 << p
    return code


def lbp_code_map(frame: np.ndarray) -> np.ndarray:
    """LBP codes for all interior pixels of a 2-d image.

    Output has shape (h - 2, w - 2); entry (j, i) is the code of pixel
    (j + 1, i + 1). Matches :func:`lbp_value` per pixel.
    """
    frame = np.asarray(frame)
    if frame.ndim != 2 or frame.shape[0] < 3 or frame.shape[1] < 3:
        raise ValueError(f"need a 2-d image at least 3x3, got shape {frame.shape}")
    h, w = frame.shape
    center = frame[1 : h - 1, 1 : w - 1]
    codes = np.zeros((h - 2, w - 2), dtype=np.uint8)
    for p, (dx, dy) in enumerate(LBP_OFFSETS):
        nb = frame[1 + dy : h - 1 + dy, 1 + dx : w - 1 + dx]
        codes |= (nb >= center).astype(np.uint8) << np.uint8(p)
    return codes


def lbp_histogram(frame: np.ndarray, region: tuple[int, int, int, int]) -> np.ndarray:
    """l1-normalized 256-bin LBP histogram of a region's interior pixels.

    region is (x0, y0, width, height) in image coordinates; it must lie
    inside the frame and be at least 3x3 so the interior is non-empty.
    Only interior pixels contribute, so every neighborhood stays inside
    the region.
    """
    frame = np.asarray(frame)
    x0, y0, w, h = region
    if w < 3 or h < 3:
        raise ValueError(f"region must be at least 3x3, got {w}x{h}")
    if not (0 <= x0 and 0 <= y0 and x0 + w <= frame.shape[1] and y0 + h <= frame.shape[0]):
        raise ValueError(f"region {region} leaves the {frame.shape[1]}x{frame.shape[0]} frame")
    codes = lbp_code_map(frame[y0 : y0 + h, x0 : x0 + w])
    hist = np.bincount(codes.ravel(), minlength=256).astype(np.float64)
    return hist / codes.size


def lbp_region_histogram(codes: np.ndarray, x: int, y: int, side: int) -> np.ndarray:
    """Region histogram from a precomputed full-frame code map.

    Equivalent to :func:`lbp_histogram` on the side x side square centered
    at (x, y): interior neighborhoods of a region agree with the
    full-frame codes, so the map can be shared across regions. ``codes``
    is indexed by interior pixel, i.e. codes[j, i] belongs to pixel
    (j + 1, i + 1) of the original frame.
    """
    if side < 3 or side % 2 == 0:
        raise ValueError(f"region side must be odd and >= 3, got {side}")
    r = side // 2
    if not (r <= x and r <= y and x - r + side - 2 <= codes.shape[1] and y - r + side - 2 <= codes.shape[0]):
        raise ValueError(f"region centered at ({x}, {y}) leaves the frame")
    sub = codes[y - r : y - r + side - 2, x - r : x - r + side - 2]
    hist = np.bincount(sub.ravel(), minlength=256).astype(np.float64)
    return hist / sub.size


def fuse_early(temporal: np.ndarray, spatial: np.ndarray) -> np.ndarray:
    """Concatenate temporal and spatial descriptors (temporal first)."""
    temporal = np.asarray(temporal, dtype=np.float64)
    spatial = np.asarray(spatial, dtype=np.float64)
    if temporal.ndim != 1 or spatial.ndim != 1:
        raise ValueError("descriptors must be 1-d")
    return np.concatenate([temporal, spatial])


def fuse_late(p_temporal: float, p_spatial: float) -> float:
    """Average two classifier probabilities; both must lie in [0, 1]."""
    if not (0.0 <= p_temporal <= 1.0 and 0.0 <= p_spatial <= 1.0):
        raise ValueError(f"probabilities must lie in [0, 1], got {p_temporal}, {p_spatial}")
    return 0.5 * (p_temporal + p_spatial)
