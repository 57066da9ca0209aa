"""Frame sequence loading, ground truth masks, and CIELAB conversion.

A t-frame video is held as one (t, m, n, C) float32 lattice. Frames are
ordered by natural filename sort (frame2 before frame10) and pixel values
are scaled to [0, 1] on load.
"""

from __future__ import annotations

import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DataError

log = logging.getLogger("salgraph")

# sRGB linear -> XYZ under the D65 white point (IEC 61966-2-1).
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_D65_WHITE = np.array([0.95047, 1.0, 1.08883])

# PIL modes that carry more than 8 bits per sample.
_HIGH_DEPTH_MODES = ("I", "F", "I;16", "I;16B", "I;16L", "I;16N", "RGB;16")


@dataclass(frozen=True)
class VideoVolume:
    """Space-time lattice of pixels with per-pixel feature channels."""

    data: np.ndarray  # (t, m, n, C) float32

    def __post_init__(self):
        if self.data.ndim != 4:
            raise DataError(f"video volume must be (t, m, n, C), got shape {self.data.shape}")
        if min(self.data.shape) < 1:
            raise DataError(f"degenerate volume shape {self.data.shape}")

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def channels(self) -> int:
        return self.data.shape[3]

    @property
    def shape(self) -> tuple[int, int, int]:
        """(t, m, n) lattice dimensions."""
        return self.data.shape[:3]


@dataclass(frozen=True)
class GroundTruthMasks:
    """Per-frame binary masks on the same lattice as the video."""

    data: np.ndarray  # (t, m, n) uint8 in {0, 1}

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def positive_count(self) -> int:
        return int(self.data.sum())


def worker_count() -> int:
    """Parallel worker cap: SALGRAPH_THREADS if set, else available cores."""
    env = os.environ.get("SALGRAPH_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _natural_key(name: str):
    # frame2 sorts before frame10: digit runs compare numerically.
    return tuple(
        (0, int(part)) if part.isdigit() else (1, part)
        for part in re.split(r"(\d+)", name)
    )


def _list_frames(dir_path: Path, pattern: str) -> list[Path]:
    if not dir_path.is_dir():
        raise DataError(f"missing directory: {dir_path}")
    files = [p for p in dir_path.glob(pattern) if p.is_file()]
    if not files:
        raise DataError(f"no frames matched '{pattern}' in {dir_path}")
    files.sort(key=lambda p: _natural_key(p.name))
    return files


def _decode_image(path: Path, mode: str) -> np.ndarray:
    try:
        with Image.open(path) as img:
            if img.mode in _HIGH_DEPTH_MODES:
                raise DataError(f"{path.name}: unsupported bit depth (mode {img.mode}); 8-bit inputs only")
            return np.asarray(img.convert(mode))
    except UnidentifiedImageError as exc:
        raise DataError(f"{path.name}: undecodable image") from exc


def _decode_all(files: list[Path], mode: str) -> list[np.ndarray]:
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        return list(pool.map(lambda p: _decode_image(p, mode), files))


def load_frame_sequence(dir_path: str | Path, pattern: str = "*.png") -> VideoVolume:
    """Load an RGB frame directory into a [0, 1]-scaled video volume.

    Frames are ordered by natural filename sort and must all share the
    same dimensions.
    """
    files = _list_frames(Path(dir_path), pattern)
    frames = _decode_all(files, "RGB")
    first = frames[0].shape
    for path, frame in zip(files, frames):
        if frame.shape != first:
            raise DataError(
                f"inconsistent frame size: {path.name} is {frame.shape[:2]}, "
                f"expected {first[:2]}"
            )
    stack = np.stack(frames).astype(np.float32) / 255.0
    return VideoVolume(stack)


def load_ground_truth(dir_path: str | Path, expected_shape: tuple[int, int, int],
                      pattern: str = "*.png") -> GroundTruthMasks:
    """Load per-frame binary masks; grayscale values >= 128 count as positive.

    ``expected_shape`` is the video's (t, m, n) lattice; mask count and
    size must match it.
    """
    files = _list_frames(Path(dir_path), pattern)
    t, m, n = expected_shape
    if len(files) != t:
        raise DataError(f"ground truth count mismatch: {len(files)} masks for {t} frames")
    masks = _decode_all(files, "L")
    for path, mask in zip(files, masks):
        if mask.shape != (m, n):
            raise DataError(
                f"ground truth size mismatch: {path.name} is {mask.shape}, expected {(m, n)}"
            )
    data = (np.stack(masks) >= 128).astype(np.uint8)
    return GroundTruthMasks(data)


def rgb_to_lab(rgb: VideoVolume) -> VideoVolume:
    """Convert an sRGB volume in [0, 1] to CIELAB under D65.

    Output ranges: L in [0, 100], a and b within [-128, 127].
    """
    if rgb.channels != 3:
        raise DataError(f"rgb_to_lab expects 3 channels, got {rgb.channels}")
    srgb = rgb.data.astype(np.float64)

    # gamma expansion
    linear = np.where(srgb <= 0.04045, srgb / 12.92, ((srgb + 0.055) / 1.055) ** 2.4)
    xyz = linear @ _RGB_TO_XYZ.T
    xyz /= _D65_WHITE

    # CIE f(): cube root above (6/29)^3, linear ramp below
    eps = (6.0 / 29.0) ** 3
    f = np.where(xyz > eps, np.cbrt(xyz), xyz / (3.0 * (6.0 / 29.0) ** 2) + 4.0 / 29.0)

    fx, fy, fz = f[..., 0], f[..., 1], f[..., 2]
    lab = np.empty_like(srgb)
    lab[..., 0] = 116.0 * fy - 16.0
    lab[..., 1] = 500.0 * (fx - fy)
    lab[..., 2] = 200.0 * (fy - fz)
    return VideoVolume(lab.astype(np.float32))
