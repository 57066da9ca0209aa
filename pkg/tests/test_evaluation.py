import math

import numpy as np
import pytest

from salgraph.errors import DataError
from salgraph.evaluation import (
    evaluate_sequence,
    nss,
    read_metrics_csv,
    roc_auc,
    write_metrics_csv,
    write_roc_csv,
    write_roc_points,
)
from salgraph.fusion import SaliencyMap
from salgraph.volume import GroundTruthMasks

from helpers import rank_auc_oracle


def _map(data):
    return SaliencyMap(np.asarray(data, dtype=np.float32))


def _gt(data):
    return GroundTruthMasks(np.asarray(data, dtype=np.uint8))


def _random_pair(rng, shape=(2, 12, 12)):
    saliency = _map(rng.random(shape))
    gt = rng.random(shape) < 0.4
    if not gt.any():
        gt.flat[0] = True
    if gt.all():
        gt.flat[0] = False
    return saliency, _gt(gt)


def test_auc_perfect_map():
    gt = np.zeros((2, 4, 4), dtype=np.uint8)
    gt[:, 1:3, 1:3] = 1
    curve = roc_auc(_map(gt.astype(np.float32)), _gt(gt))
    assert curve.auc == pytest.approx(1.0)


def test_auc_constant_map_is_exactly_half():
    gt = np.zeros((1, 4, 4), dtype=np.uint8)
    gt[0, 0, 0] = 1
    curve = roc_auc(_map(np.full((1, 4, 4), 0.3)), _gt(gt))
    assert curve.auc == 0.5


def test_auc_inverted_map_is_zero():
    gt = np.zeros((2, 4, 4), dtype=np.uint8)
    gt[:, 1:3, 1:3] = 1
    curve = roc_auc(_map(1.0 - gt.astype(np.float32)), _gt(gt))
    assert curve.auc == pytest.approx(0.0)


def test_auc_requires_both_classes():
    with pytest.raises(DataError, match="positives and negatives"):
        roc_auc(_map(np.zeros((1, 2, 2))), _gt(np.ones((1, 2, 2))))
    with pytest.raises(DataError, match="positives and negatives"):
        roc_auc(_map(np.zeros((1, 2, 2))), _gt(np.zeros((1, 2, 2))))


def test_roc_curve_shape_and_monotonicity():
    rng = np.random.default_rng(1)
    saliency, gt = _random_pair(rng)
    curve = roc_auc(saliency, gt)
    assert curve.fpr[0] == 0.0 and curve.tpr[0] == 0.0
    assert curve.fpr[-1] == 1.0 and curve.tpr[-1] == 1.0
    assert (np.diff(curve.fpr) >= 0).all()
    assert (np.diff(curve.tpr) >= 0).all()
    assert len(curve.thresholds) == 258  # 257 grid thresholds plus the closing point


def test_auc_against_rank_oracle():
    rng = np.random.default_rng(2)
    for _ in range(25):
        saliency, gt = _random_pair(rng)
        curve = roc_auc(saliency, gt)
        mask = gt.data.astype(bool)
        expected = rank_auc_oracle(saliency.data[mask], saliency.data[~mask])
        assert abs(curve.auc - expected) <= 1.0 / 256.0


def test_auc_monotone_transform_stability():
    # rank AUC is exactly invariant; the fixed threshold grid may move the
    # trapezoidal estimate by at most one grid cell on each side
    rng = np.random.default_rng(3)
    saliency, gt = _random_pair(rng)
    base = roc_auc(saliency, gt).auc
    squared = roc_auc(_map(saliency.data.astype(np.float64) ** 2), gt).auc
    assert abs(base - squared) <= 2.0 / 256.0


def test_nss_zero_when_positive_mean_equals_global_mean():
    saliency = _map([[[0.0, 1.0], [1.0, 0.0]]])
    gt = _gt([[[0, 1], [0, 1]]])  # one positive at 1.0, one at 0.0
    assert nss(saliency, gt) == pytest.approx(0.0)


def test_nss_half_split_reference():
    # 2x1x1 volume, map equals gt: z-score of the high level is exactly 1
    saliency = _map([[[0.0]], [[1.0]]])
    gt = _gt([[[0]], [[1]]])
    assert nss(saliency, gt) == pytest.approx(1.0)


def test_nss_zero_variance_error():
    with pytest.raises(DataError, match="undefined NSS"):
        nss(_map(np.full((1, 2, 2), 0.5)), _gt([[[0, 1], [0, 0]]]))


def test_nss_empty_ground_truth_error():
    with pytest.raises(DataError, match="empty ground truth"):
        nss(_map([[[0.0, 1.0]]]), _gt([[[0, 0]]]))


def test_nss_affine_invariance():
    rng = np.random.default_rng(4)
    saliency, gt = _random_pair(rng)
    base = nss(saliency, gt)
    doubled = nss(SaliencyMap(saliency.data * 2.0), gt)
    assert doubled == base  # power-of-two scaling is exact
    shifted = nss(SaliencyMap(saliency.data.astype(np.float64) * 1.7 + 0.3), gt)
    assert shifted == pytest.approx(base, abs=1e-12)


def test_evaluate_sequence_perfect():
    gt = np.zeros((2, 4, 4), dtype=np.uint8)
    gt[:, 1:3, 1:3] = 1
    report = evaluate_sequence(_map(gt.astype(np.float32)), _gt(gt), name="clip")
    assert report.auc == pytest.approx(1.0)
    assert report.nss > 0.0
    assert report.n_pos == 8 and report.n_neg == 24
    assert len(report.frame_auc) == 2


def test_frame_auc_nan_for_degenerate_frames():
    gt = np.zeros((2, 2, 2), dtype=np.uint8)
    gt[0, 0, 0] = 1  # frame 1 has no positives
    rng = np.random.default_rng(5)
    report = evaluate_sequence(_map(rng.random((2, 2, 2))), _gt(gt))
    assert not math.isnan(report.frame_auc[0])
    assert math.isnan(report.frame_auc[1])


def test_metrics_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(6)
    reports = []
    for name in ("alpha", "beta"):
        saliency, gt = _random_pair(rng)
        reports.append(evaluate_sequence(saliency, gt, name=name))
    path = tmp_path / "metrics.csv"
    write_metrics_csv(reports, path)
    rows = read_metrics_csv(path)
    assert [r["sequence"] for r in rows] == ["alpha", "beta"]
    for row, report in zip(rows, reports):
        assert float(row["auc"]) == pytest.approx(report.auc, abs=1e-6)
        assert float(row["nss"]) == pytest.approx(report.nss, abs=1e-6)
        assert int(row["n_pos"]) == report.n_pos
        assert int(row["n_neg"]) == report.n_neg


def test_roc_outputs(tmp_path):
    rng = np.random.default_rng(7)
    saliency, gt = _random_pair(rng)
    curve = roc_auc(saliency, gt)
    write_roc_csv(curve, tmp_path / "roc.csv")
    write_roc_points(curve, tmp_path / "roc.dat")
    csv_lines = (tmp_path / "roc.csv").read_text().strip().splitlines()
    assert csv_lines[0] == "threshold,fpr,tpr"
    assert len(csv_lines) == 1 + len(curve.thresholds)
    dat_lines = (tmp_path / "roc.dat").read_text().strip().splitlines()
    assert dat_lines[0].startswith("#")
    first = dat_lines[1].split()
    assert len(first) == 2
