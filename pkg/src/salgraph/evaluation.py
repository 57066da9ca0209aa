"""ROC/AUC and NSS evaluation of saliency maps against binary ground truth.

The ROC sweep uses the fixed grid k/256 for k = 0..256 (matching 8-bit
output quantization) plus one closing point at 257/256 where no voxel
can be predicted positive, so every curve spans (0,0) to (1,1). AUC is
the trapezoidal integral of that curve. NSS z-scores the map over all
voxels and averages the z-values over ground-truth-positive voxels.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .fusion import SaliencyMap
from .volume import GroundTruthMasks

ROC_STEPS = 256  # thresholds at k/ROC_STEPS


@dataclass(frozen=True)
class RocCurve:
    """(FPR, TPR) points ordered from (0, 0) to (1, 1), descending threshold."""

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float

    @property
    def points(self) -> np.ndarray:
        return np.stack([self.fpr, self.tpr], axis=1)


@dataclass(frozen=True)
class SequenceReport:
    sequence: str
    auc: float
    nss: float
    n_pos: int
    n_neg: int
    roc: RocCurve
    frame_auc: tuple[float, ...] = field(default_factory=tuple)


def _rates(sorted_vals: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """Fraction of values >= each threshold."""
    if len(sorted_vals) == 0:
        return np.zeros_like(thresholds)
    counts = len(sorted_vals) - np.searchsorted(sorted_vals, thresholds, side="left")
    return counts / len(sorted_vals)


def _roc_from_values(pos: np.ndarray, neg: np.ndarray) -> RocCurve:
    # descending thresholds: k = STEPS+1 (the closing point) down to 0
    ks = np.arange(ROC_STEPS + 1, -1, -1)
    thresholds = ks / ROC_STEPS
    pos_sorted = np.sort(pos.astype(np.float64))
    neg_sorted = np.sort(neg.astype(np.float64))
    tpr = _rates(pos_sorted, thresholds)
    fpr = _rates(neg_sorted, thresholds)
    auc = float(np.trapezoid(tpr, fpr))
    return RocCurve(thresholds, fpr, tpr, auc)


def roc_auc(saliency: SaliencyMap, gt: GroundTruthMasks) -> RocCurve:
    """ROC curve and AUC over the whole volume."""
    if saliency.shape != gt.shape:
        raise DataError(f"map shape {saliency.shape} != ground truth shape {gt.shape}")
    mask = gt.data.astype(bool)
    n_pos = int(mask.sum())
    n_neg = mask.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError(
            f"ground truth must contain positives and negatives (got {n_pos} pos, {n_neg} neg)"
        )
    values = saliency.data
    return _roc_from_values(values[mask], values[~mask])


def nss(saliency: SaliencyMap, gt: GroundTruthMasks) -> float:
    """Mean z-scored saliency over ground-truth-positive voxels."""
    if saliency.shape != gt.shape:
        raise DataError(f"map shape {saliency.shape} != ground truth shape {gt.shape}")
    mask = gt.data.astype(bool)
    if not mask.any():
        raise DataError("empty ground truth: NSS needs at least one positive voxel")
    values = saliency.data.astype(np.float64)
    std = values.std()
    if std == 0.0:
        raise DataError("undefined NSS: zero-variance saliency map")
    z = (values - values.mean()) / std
    return float(z[mask].mean())


def evaluate_sequence(saliency: SaliencyMap, gt: GroundTruthMasks,
                      name: str = "sequence") -> SequenceReport:
    """Volume-pooled AUC and NSS, plus per-frame AUC diagnostics.

    Frames whose ground truth is all-positive or all-negative get NaN in
    the per-frame column.
    """
    curve = roc_auc(saliency, gt)
    score = nss(saliency, gt)
    mask = gt.data.astype(bool)

    frame_auc = []
    for f in range(saliency.frames):
        frame_mask = mask[f]
        n_pos = int(frame_mask.sum())
        if n_pos == 0 or n_pos == frame_mask.size:
            frame_auc.append(math.nan)
            continue
        vals = saliency.data[f]
        frame_auc.append(_roc_from_values(vals[frame_mask], vals[~frame_mask]).auc)

    n_pos = int(mask.sum())
    return SequenceReport(
        sequence=name,
        auc=curve.auc,
        nss=score,
        n_pos=n_pos,
        n_neg=mask.size - n_pos,
        roc=curve,
        frame_auc=tuple(frame_auc),
    )


def write_metrics_csv(reports: list[SequenceReport], path: str | Path) -> None:
    """metrics.csv: sequence, auc, nss, n_pos, n_neg (one row per sequence)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sequence", "auc", "nss", "n_pos", "n_neg"])
        for r in reports:
            writer.writerow([r.sequence, f"{r.auc:.6f}", f"{r.nss:.6f}", r.n_pos, r.n_neg])


def read_metrics_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_roc_csv(curve: RocCurve, path: str | Path) -> None:
    """roc.csv: threshold, fpr, tpr."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "fpr", "tpr"])
        for thr, f, t in zip(curve.thresholds, curve.fpr, curve.tpr):
            writer.writerow([f"{thr:.6f}", f"{f:.6f}", f"{t:.6f}"])


def write_roc_points(curve: RocCurve, path: str | Path) -> None:
    """Plot-ready whitespace-separated (fpr, tpr) points, gnuplot friendly."""
    with open(path, "w") as fh:
        fh.write("# fpr tpr\n")
        for f, t in zip(curve.fpr, curve.tpr):
            fh.write(f"{f:.6f} {t:.6f}\n")


def write_frame_auc_csv(report: SequenceReport, path: str | Path) -> None:
    """Per-frame AUC diagnostics; degenerate frames written as nan."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sequence", "frame", "auc"])
        for f, value in enumerate(report.frame_auc):
            writer.writerow([report.sequence, f, f"{value:.6f}" if not math.isnan(value) else "nan"])
