"""Frame and mask I/O for water-detection videos.

Videos are directories of binary PGM (P5) frames, one file per frame,
named ``frame_%06d.pgm``; lexicographic filename order is temporal order.
Ground-truth masks use the same container with pixel values {0, 255}:
either a single static ``mask.pgm`` for the whole video or one
``mask_%06d.pgm`` per frame. Color PPM (P6) input is converted to
grayscale with BT.601 luma on load.
"""

from __future__ import annotations

import os
import re

import numpy as np

# BT.601 luma weights for P6 conversion.
_LUMA_R, _LUMA_G, _LUMA_B = 0.299, 0.587, 0.114

_FRAME_RE = re.compile(r"^frame_\d+\.pgm$")
_MASK_RE = re.compile(r"^mask_\d+\.pgm$")


class FrameSequence:
    """Ordered grayscale frames of one video, all the same size.

    Wraps a read-only uint8 array of shape (frame_count, height, width)
    with intensities in [0, 255].
    """

    def __init__(self, frames: np.ndarray):
        frames = np.asarray(frames)
        if frames.ndim != 3:
            raise ValueError(f"frames must be 3-d (t, h, w), got shape {frames.shape}")
        if frames.shape[0] < 1:
            raise ValueError("a frame sequence needs at least one frame")
        if frames.shape[1] < 1 or frames.shape[2] < 1:
            raise ValueError(f"frames must be non-empty, got shape {frames.shape}")
        if frames.dtype != np.uint8:
            if not np.issubdtype(frames.dtype, np.integer):
                raise ValueError(f"frames must be integer-valued, got dtype {frames.dtype}")
            if frames.min() < 0 or frames.max() > 255:
                raise ValueError("frame intensities must lie in [0, 255]")
            frames = frames.astype(np.uint8)
        frames = frames.copy()
        frames.setflags(write=False)
        self.frames = frames

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    def __len__(self) -> int:
        return self.frame_count

    def __getitem__(self, t: int) -> np.ndarray:
        return self.frames[t]

    def __repr__(self) -> str:
        return f"FrameSequence({self.frame_count} x {self.width}x{self.height})"


class MaskSequence:
    """Binary masks for one video: a single static mask or one per frame.

    Values are {0, 1} with 1 = water. Shape (count, height, width);
    count == 1 means the mask applies to every frame.
    """

    def __init__(self, masks: np.ndarray):
        masks = np.asarray(masks)
        if masks.ndim == 2:
            masks = masks[np.newaxis]
        if masks.ndim != 3 or masks.shape[0] < 1:
            raise ValueError(f"masks must be (count, h, w) with count >= 1, got {masks.shape}")
        if not np.isin(masks, (0, 1)).all():
            raise ValueError("mask values must be 0 or 1")
        masks = masks.astype(np.uint8)
        masks.setflags(write=False)
        self.masks = masks

    @property
    def count(self) -> int:
        return self.masks.shape[0]

    @property
    def height(self) -> int:
        return self.masks.shape[1]

    @property
    def width(self) -> int:
        return self.masks.shape[2]

    @property
    def static(self) -> bool:
        return self.count == 1

    def mask_for_frame(self, t: int) -> np.ndarray:
        """Mask that applies to frame ``t`` (a static mask applies to all)."""
        return self.masks[0] if self.static else self.masks[t]

    def __len__(self) -> int:
        return self.count

    def __repr__(self) -> str:
        kind = "static" if self.static else f"{self.count} frames"
        return f"MaskSequence({kind}, {self.width}x{self.height})"


def _read_header_tokens(data: bytes, path: str, count: int) -> tuple[list[int], int]:
    """Parse ``count`` whitespace/comment-separated integer tokens after the magic.

    Returns the tokens and the offset of the first raster byte (one
    whitespace byte after the last header token, per the PNM spec).
    """
    tokens: list[int] = []
    i = 2  # past the 2-byte magic
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i] == ord("#"):
            while i < n and data[i] != ord("\n"):
                i += 1
            continue
        j = i
        while j < n and not data[j : j + 1].isspace() and data[j] != ord("#"):
            j += 1
        if j == i:
            raise ValueError(f"malformed PNM header in {path}")
        try:
            tokens.append(int(data[i:j]))
        except ValueError:
            raise ValueError(f"malformed PNM header in {path}: bad token {data[i:j]!r}") from None
        i = j
    if i >= n or not data[i : i + 1].isspace():
        raise ValueError(f"malformed PNM header in {path}: missing raster separator")
    return tokens, i + 1


def bt601_luma(rgb: np.ndarray) -> np.ndarray:
    """BT.601 luma of an (h, w, 3) uint8 image, rounded half up to uint8."""
    rgb = np.asarray(rgb, dtype=np.float64)
    y = _LUMA_R * rgb[..., 0] + _LUMA_G * rgb[..., 1] + _LUMA_B * rgb[..., 2]
    return np.floor(y + 0.5).astype(np.uint8)


def read_pnm(path: str) -> np.ndarray:
    """Read a binary PGM (P5) or PPM (P6) file as a grayscale (h, w) uint8 array.

    P6 input is converted with BT.601 luma. Only maxval <= 255 is
    supported. Raises ValueError naming the file on any malformed input.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"unsupported PNM magic {magic!r} in {path}")
    (width, height, maxval), offset = _read_header_tokens(data, path, 3)
    if width < 1 or height < 1:
        raise ValueError(f"bad dimensions {width}x{height} in {path}")
    if not 0 < maxval <= 255:
        raise ValueError(f"unsupported maxval {maxval} in {path} (need 1..255)")
    channels = 1 if magic == b"P5" else 3
    expected = width * height * channels
    raster = data[offset : offset + expected]
    if len(raster) != expected:
        raise ValueError(f"truncated raster in {path}: got {len(raster)} of {expected} bytes")
    pixels = np.frombuffer(raster, dtype=np.uint8)
    if magic == b"P5":
        return pixels.reshape(height, width).copy()
    return bt601_luma(pixels.reshape(height, width, 3))


def write_pgm(path: str, image: np.ndarray) -> None:
    """Write a (h, w) uint8 array as a binary PGM (P5) with maxval 255."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError(f"PGM image must be 2-d, got shape {image.shape}")
    if image.dtype != np.uint8:
        if not np.issubdtype(image.dtype, np.integer):
            raise ValueError("PGM image must be integer-valued")
        if image.min() < 0 or image.max() > 255:
            raise ValueError("PGM intensities must lie in [0, 255]")
        image = image.astype(np.uint8)
    header = f"P5\n{image.shape[1]} {image.shape[0]}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(image.tobytes())


def load_frame_sequence(directory: str, limit: int | None = None) -> FrameSequence:
    """Load the ``frame_*.pgm`` files of a video directory in lexicographic order.

    ``limit`` keeps only the first that many frames. Raises
    FileNotFoundError for a missing directory and ValueError (naming the
    offending file) for malformed or inconsistently sized frames.
    """
    if not os.path.isdir(directory):
        raise FileNotFoundError(f"video directory not found: {directory}")
    names = sorted(n for n in os.listdir(directory) if _FRAME_RE.match(n))
    if not names:
        raise ValueError(f"no frame_*.pgm files in {directory}")
    if limit is not None:
        if limit < 1:
            raise ValueError("limit must be >= 1")
        names = names[:limit]
    frames = []
    shape = None
    for name in names:
        path = os.path.join(directory, name)
        img = read_pnm(path)
        if shape is None:
            shape = img.shape
        elif img.shape != shape:
            raise ValueError(
                f"frame size mismatch in {path}: got {img.shape[::-1]}, expected {shape[::-1]}"
            )
        frames.append(img)
    return FrameSequence(np.stack(frames))


def save_frame_sequence(seq: FrameSequence, directory: str) -> list[str]:
    """Write every frame as ``frame_%06d.pgm`` under ``directory``; returns the paths."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for t in range(seq.frame_count):
        path = os.path.join(directory, f"frame_{t:06d}.pgm")
        write_pgm(path, seq.frames[t])
        paths.append(path)
    return paths


def _block_starts(size: int, factor: int) -> np.ndarray:
    return np.arange(0, size, factor)


def downsample_quarter(seq: FrameSequence) -> FrameSequence:
    """Downsize every frame to a quarter of its width and height.

    Output dims are ceil(w/4) x ceil(h/4); each output pixel is the mean
    of its 4x4 source block (clipped at the right/bottom borders), rounded
    half up. Requires width >= 4 and height >= 4.
    """
    if seq.width < 4 or seq.height < 4:
        raise ValueError(f"frames too small to downsize: {seq.width}x{seq.height}")
    ys = _block_starts(seq.height, 4)
    xs = _block_starts(seq.width, 4)
    sums = np.add.reduceat(np.add.reduceat(seq.frames.astype(np.int64), ys, axis=1), xs, axis=2)
    h_sizes = np.diff(np.append(ys, seq.height))
    w_sizes = np.diff(np.append(xs, seq.width))
    counts = np.outer(h_sizes, w_sizes)[np.newaxis]
    out = np.floor(sums / counts + 0.5).astype(np.uint8)
    return FrameSequence(out)


def downsample_mask_quarter(mask: np.ndarray) -> np.ndarray:
    """Majority-vote a binary {0, 1} mask into quarter-size blocks (ties -> 0)."""
    mask = np.asarray(mask)
    h, w = mask.shape
    if w < 4 or h < 4:
        raise ValueError(f"mask too small to downsize: {w}x{h}")
    ys = _block_starts(h, 4)
    xs = _block_starts(w, 4)
    water = np.add.reduceat(np.add.reduceat(mask.astype(np.int64), ys, axis=0), xs, axis=1)
    h_sizes = np.diff(np.append(ys, h))
    w_sizes = np.diff(np.append(xs, w))
    counts = np.outer(h_sizes, w_sizes)
    # strict majority: exactly half water votes non-water
    return (2 * water > counts).astype(np.uint8)


def _mask_from_image(img: np.ndarray, path: str) -> np.ndarray:
    bad = ~np.isin(img, (0, 255))
    if bad.any():
        raise ValueError(f"mask {path} has values other than 0 and 255")
    return (img == 255).astype(np.uint8)


def load_mask_sequence(path: str, target_dims: tuple[int, int] | None = None) -> MaskSequence:
    """Load a ground-truth mask: a single ``mask.pgm`` file or a directory.

    A directory may hold one static ``mask.pgm`` or per-frame
    ``mask_%06d.pgm`` files. Pixel values must be exactly {0, 255}
    (255 = water). ``target_dims`` as (width, height): if it differs from
    the stored size it must be the quarter geometry (ceil(w/4), ceil(h/4)),
    and the mask is downsampled by per-block majority vote (ties -> 0);
    any other target raises ValueError.
    """
    if os.path.isdir(path):
        per_frame = sorted(n for n in os.listdir(path) if _MASK_RE.match(n))
        if per_frame:
            raw = [_mask_from_image(read_pnm(os.path.join(path, n)), n) for n in per_frame]
            masks = np.stack(raw)
        elif os.path.isfile(os.path.join(path, "mask.pgm")):
            file_path = os.path.join(path, "mask.pgm")
            masks = _mask_from_image(read_pnm(file_path), file_path)[np.newaxis]
        else:
            raise ValueError(f"no mask.pgm or mask_*.pgm files in {path}")
    elif os.path.isfile(path):
        masks = _mask_from_image(read_pnm(path), path)[np.newaxis]
    else:
        raise FileNotFoundError(f"mask path not found: {path}")

    if target_dims is not None:
        tw, th = target_dims
        h, w = masks.shape[1:]
        if (tw, th) == (w, h):
            pass
        elif (tw, th) == (-(-w // 4), -(-h // 4)):
            masks = np.stack([downsample_mask_quarter(m) for m in masks])
        else:
            raise ValueError(
                f"cannot fit {w}x{h} mask to {tw}x{th}: only identity or quarter size supported"
            )
    return MaskSequence(masks)


def save_mask_sequence(masks: MaskSequence, directory: str) -> list[str]:
    """Write masks as ``mask_%06d.pgm`` files with values {0, 255}; returns the paths."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for t in range(masks.count):
        path = os.path.join(directory, f"mask_{t:06d}.pgm")
        write_pgm(path, masks.masks[t] * np.uint8(255))
        paths.append(path)
    return paths
