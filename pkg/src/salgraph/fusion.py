"""Render unit scores to per-pixel maps, fuse feature spaces, write outputs.

The fused map is the element-wise geometric blend
``M = M_color^(1-beta) * M_deep^(beta)``, re-normalized to [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import formats
from .errors import DataError
from .propagation import SaliencyScores
from .segmentation import LabelVolume
from .volume import VideoVolume

DEFAULT_BETA = 0.7

FRAME_NAME = "frame_{:05d}.png"
MAP_FILE = "map.fvol"


@dataclass(frozen=True)
class SaliencyMap:
    """Per-frame scalar saliency field in [0, 1]."""

    data: np.ndarray  # (t, m, n) float32

    def __post_init__(self):
        if self.data.ndim != 3:
            raise DataError(f"saliency map must be (t, m, n), got shape {self.data.shape}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def frames(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class FusionConfig:
    beta: float = DEFAULT_BETA

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise DataError(f"beta must be in [0, 1], got {self.beta}")


def render_map(scores: SaliencyScores, labels: LabelVolume) -> SaliencyMap:
    """Paint every voxel with its unit's (normalized) score."""
    g = np.asarray(scores.g, dtype=np.float64)
    if g.shape != (labels.unit_count,):
        raise DataError(
            f"unit count mismatch: {g.shape[0]} scores for {labels.unit_count} units"
        )
    field = np.clip(g, 0.0, 1.0)[labels.labels]
    return SaliencyMap(field.astype(np.float32))


def _minmax(field: np.ndarray) -> np.ndarray:
    lo = field.min()
    hi = field.max()
    if hi <= lo:
        return field
    return (field - lo) / (hi - lo)


def fuse_maps(m_color: SaliencyMap, m_deep: SaliencyMap, cfg: FusionConfig) -> SaliencyMap:
    """Geometric blend of two maps, then min-max renormalization.

    0^0 evaluates to 1 (numpy convention), which makes the beta = 0 and
    beta = 1 edges exact identities on an already-normalized input.
    """
    if m_color.shape != m_deep.shape:
        raise DataError(f"map shape mismatch: {m_color.shape} vs {m_deep.shape}")
    a = m_color.data.astype(np.float64)
    b = m_deep.data.astype(np.float64)
    fused = a ** (1.0 - cfg.beta) * b ** cfg.beta
    return SaliencyMap(np.clip(_minmax(fused), 0.0, 1.0).astype(np.float32))


def threshold_region(saliency: SaliencyMap, tau: float) -> np.ndarray:
    """Binary salient-region volume: voxel is in the region iff value >= tau."""
    if not 0.0 <= tau <= 1.0:
        raise DataError(f"tau must be in [0, 1], got {tau}")
    return (saliency.data >= tau).astype(np.uint8)


def _to_uint8(values: np.ndarray) -> np.ndarray:
    # round half up so 127.5 -> 128
    return np.floor(values + 0.5).clip(0, 255).astype(np.uint8)


def _save_png(image: np.ndarray, path: Path, mode: str) -> None:
    tmp = formats.partial_path(path)
    Image.fromarray(image, mode).save(tmp, format="PNG")
    formats.replace_atomic(tmp, path)


def write_map(saliency: SaliencyMap, out_dir: str | Path) -> list[Path]:
    """Write one 8-bit grayscale PNG per frame plus a lossless FVOL dump."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for f in range(saliency.frames):
        path = out_dir / FRAME_NAME.format(f)
        _save_png(_to_uint8(255.0 * saliency.data[f].astype(np.float64)), path, "L")
        written.append(path)
    fvol_path = out_dir / MAP_FILE
    tmp = formats.partial_path(fvol_path)
    formats.write_fvol(tmp, saliency.data[..., None])
    formats.replace_atomic(tmp, fvol_path)
    written.append(fvol_path)
    return written


def read_map(path: str | Path) -> SaliencyMap:
    """Read a map.fvol (single-channel FVOL) back into a saliency map."""
    data = formats.read_fvol(path)
    if data.shape[3] != 1:
        raise DataError(f"{path}: expected single-channel map, got C={data.shape[3]}")
    return SaliencyMap(data[..., 0])


def render_overlays(video: VideoVolume, saliency: SaliencyMap,
                    out_dir: str | Path) -> list[Path]:
    """Blend the map onto the input frames at 0.5 opacity, one PNG per frame."""
    if video.shape != saliency.shape:
        raise DataError(f"video shape {video.shape} != map shape {saliency.shape}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for f in range(saliency.frames):
        rgb = 255.0 * video.data[f].astype(np.float64)
        heat = 255.0 * saliency.data[f].astype(np.float64)
        blended = 0.5 * rgb + 0.5 * heat[..., None]
        path = out_dir / FRAME_NAME.format(f)
        _save_png(_to_uint8(blended), path, "RGB")
        written.append(path)
    return written
