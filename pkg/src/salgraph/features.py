"""Per-unit descriptors by regional pooling of pixel-wise feature maps.

Pooling is intra-frame max then inter-frame average: for every unit and
channel, take the max over the unit's voxels within each frame it
touches, then average those per-frame maxima over exactly the frames
where the unit is present.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import formats
from .errors import DataError
from .segmentation import LabelVolume
from .volume import VideoVolume


@dataclass(frozen=True)
class FeatureTensor:
    """Pixel-wise feature map aligned with the video lattice."""

    data: np.ndarray  # (t, m, n, C) float32

    def __post_init__(self):
        if self.data.ndim != 4:
            raise DataError(f"feature tensor must be (t, m, n, C), got shape {self.data.shape}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape[:3]

    @property
    def channels(self) -> int:
        return self.data.shape[3]


@dataclass(frozen=True)
class UnitFeatureTable:
    """One pooled descriptor row per unit, row index = unit id."""

    rows: np.ndarray  # (N, C) float64

    @property
    def unit_count(self) -> int:
        return self.rows.shape[0]

    @property
    def channels(self) -> int:
        return self.rows.shape[1]


def lab_feature_tensor(lab: VideoVolume) -> FeatureTensor:
    """Expose a LAB volume as a 3-channel feature tensor (identity reshape)."""
    if lab.channels != 3:
        raise DataError(f"LAB tensor expects 3 channels, got {lab.channels}")
    if not np.isfinite(lab.data).all():
        raise DataError("non-finite values in LAB volume")
    return FeatureTensor(lab.data)


def read_feature_tensor(path: str | Path, expected_dims: tuple[int, int, int]) -> FeatureTensor:
    """Read an FVOL feature file and check it against the video's (m, n, t)."""
    data = formats.read_fvol(path)
    t, m, n, _ = data.shape
    em, en, et = expected_dims
    if (m, n, t) != (em, en, et):
        raise DataError(
            f"{path}: dimension mismatch, file is (m={m}, n={n}, t={t}), "
            f"expected (m={em}, n={en}, t={et})"
        )
    if not np.isfinite(data).all():
        raise DataError(f"{path}: non-finite values in feature tensor")
    return FeatureTensor(data)


def write_feature_tensor(path: str | Path, tensor: FeatureTensor) -> None:
    formats.write_fvol(path, tensor.data)


def pool_unit_features(tensor: FeatureTensor, labels: LabelVolume) -> UnitFeatureTable:
    """Pool the tensor into per-unit descriptors (intra-frame max, inter-frame mean)."""
    if tensor.shape != labels.shape:
        raise DataError(f"tensor shape {tensor.shape} != label shape {labels.shape}")
    t = tensor.shape[0]
    n_units = labels.unit_count
    channels = tensor.channels

    sums = np.zeros((n_units, channels), dtype=np.float64)
    frame_counts = np.zeros(n_units, dtype=np.int64)
    for f in range(t):
        frame_labels = labels.labels[f].ravel()
        frame_feat = tensor.data[f].reshape(-1, channels)
        order = np.argsort(frame_labels, kind="stable")
        sorted_labels = frame_labels[order]
        starts = np.flatnonzero(np.r_[True, sorted_labels[1:] != sorted_labels[:-1]])
        present = sorted_labels[starts]
        maxima = np.maximum.reduceat(frame_feat[order], starts, axis=0)
        sums[present] += maxima
        frame_counts[present] += 1

    if np.any(frame_counts == 0):
        missing = np.flatnonzero(frame_counts == 0)
        raise DataError(f"units with zero voxels: {missing.tolist()[:8]}")
    rows = sums / frame_counts[:, None]
    if not np.isfinite(rows).all():
        raise DataError("non-finite pooled descriptors")
    return UnitFeatureTable(rows)
