"""End-to-end pipeline: segment, pool, graph, propagate, fuse, render, evaluate.

Stages run sequentially and deterministically; identical configuration
and inputs give bit-identical artifacts. Artifacts are written under a
``.partial`` name and renamed on completion, so an aborted run leaves
only clearly-marked partial files.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, formats
from .config import PipelineConfig
from .errors import StageError
from .evaluation import (
    evaluate_sequence,
    write_frame_auc_csv,
    write_metrics_csv,
    write_roc_csv,
    write_roc_points,
)
from .features import (
    FeatureTensor,
    lab_feature_tensor,
    pool_unit_features,
    read_feature_tensor,
)
from .fusion import FusionConfig, SaliencyMap, fuse_maps, render_map, render_overlays, write_map
from .graph import KernelParams, build_affinity, compute_adjacency, dump_affinity
from .propagation import (
    PropagationConfig,
    compute_seed,
    dump_vector,
    normalize_scores,
    solve_closed_form,
    verify_stationarity,
)
from .segmentation import (
    LabelVolume,
    SupervoxelHierarchy,
    build_hierarchy,
    build_voxel_graph,
    default_layer_index,
    fh_segment,
    save_labels,
    select_layer,
)
from .volume import VideoVolume, load_frame_sequence, load_ground_truth, rgb_to_lab

log = logging.getLogger("salgraph")

STAGES = ("segment", "pool", "graph", "propagate", "render")

LABELS_FILE = "labels.lvol"
SALIENCY_DIR = "saliency"
OVERLAY_DIR = "overlay"
MANIFEST_FILE = "manifest.json"


@dataclass
class RunManifest:
    """Summary of one pipeline run, written atomically at run end."""

    tool_version: str
    mode: str  # "fused" or "lab-only"
    config: dict
    stage_seconds: dict
    layer_unit_counts: list
    selected_layer: int
    artifacts: dict
    stationarity: dict
    flags: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"

    def write(self, path: str | Path) -> None:
        path = Path(path)
        tmp = formats.partial_path(path)
        tmp.write_text(self.to_json())
        formats.replace_atomic(tmp, path)


@contextmanager
def _stage(name: str, timings: dict):
    log.info("stage %s", name)
    t0 = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc
    timings[name] = time.perf_counter() - t0


def _write_labels_atomic(path: Path, layer: LabelVolume) -> None:
    tmp = formats.partial_path(path)
    save_labels(tmp, layer)
    formats.replace_atomic(tmp, path)


def segment_video(cfg: PipelineConfig) -> tuple[VideoVolume, VideoVolume, SupervoxelHierarchy, LabelVolume]:
    """Load frames, convert to LAB, and build the supervoxel hierarchy."""
    video = load_frame_sequence(cfg.input_dir, cfg.frame_pattern)
    lab = rgb_to_lab(video)
    voxel_graph = build_voxel_graph(lab, cfg.connectivity)
    base = fh_segment(voxel_graph, cfg.k, cfg.min_size)
    hierarchy = build_hierarchy(lab, base, cfg.levels, k=cfg.k, connectivity=cfg.connectivity)
    index = cfg.layer_index or default_layer_index(hierarchy.layer_count)
    layer = select_layer(hierarchy, index)
    return video, lab, hierarchy, layer


def compute_saliency(
    video: VideoVolume,
    lab: VideoVolume,
    layer: LabelVolume,
    cfg: PipelineConfig,
    out_root: Path,
    timings: dict,
    manifest_bits: dict,
) -> SaliencyMap:
    """Pool, graph, propagate, fuse, and render; shared by run and rerun paths."""
    deep_tensor: FeatureTensor | None = None
    with _stage("pool", timings):
        table_lab = pool_unit_features(lab_feature_tensor(lab), layer)
        table_deep = None
        if cfg.feature_tensor_path is not None:
            deep_tensor = read_feature_tensor(
                cfg.feature_tensor_path, (lab.height, lab.width, lab.frames)
            )
            table_deep = pool_unit_features(deep_tensor, layer)
        else:
            log.info("no deep feature tensor configured: running in lab-only mode")

    with _stage("graph", timings):
        edges = compute_adjacency(layer, cfg.connectivity)
        graph_lab = build_affinity(table_lab, edges, KernelParams(cfg.rho, scale_by_dim=False))
        graph_deep = None
        if table_deep is not None:
            graph_deep = build_affinity(
                table_deep,
                edges,
                KernelParams(cfg.effective_rho_deep, scale_by_dim=cfg.deep_dim_scaling),
            )
        if cfg.dump_affinity:
            dump_affinity(graph_lab, out_root / "affinity_lab.txt")
            if graph_deep is not None:
                dump_affinity(graph_deep, out_root / "affinity_deep.txt")

    with _stage("propagate", timings):
        seed = compute_seed(lab, layer)
        if seed.empty:
            manifest_bits.setdefault("flags", []).append("empty seed")
        prop_cfg = PropagationConfig(
            mu=cfg.mu, solver=cfg.solver, iter_tol=cfg.iter_tol, max_iter=cfg.max_iter
        )
        spaces = {"lab": graph_lab}
        if graph_deep is not None:
            spaces["deep"] = graph_deep
        normalized = {}
        residuals = {}
        for name, graph in spaces.items():
            scores = solve_closed_form(graph, seed, prop_cfg)
            residuals[name] = verify_stationarity(graph, seed, prop_cfg, scores)
            normalized[name] = normalize_scores(scores)
            if normalized[name].degenerate:
                manifest_bits.setdefault("flags", []).append(f"degenerate {name} scores")
        manifest_bits["stationarity"] = residuals
        if cfg.dump_vectors:
            dump_vector(seed.q, out_root / "seed_q.txt")
            for name, scores in normalized.items():
                dump_vector(scores.g, out_root / f"scores_{name}.txt")

    with _stage("render", timings):
        map_lab = render_map(normalized["lab"], layer)
        if "deep" in normalized:
            map_deep = render_map(normalized["deep"], layer)
            final = fuse_maps(map_lab, map_deep, FusionConfig(cfg.beta))
            manifest_bits["mode"] = "fused"
        else:
            final = map_lab
            manifest_bits["mode"] = "lab-only"
        artifacts = manifest_bits.setdefault("artifacts", {})
        saliency_dir = out_root / SALIENCY_DIR
        write_map(final, saliency_dir)
        artifacts["saliency_dir"] = str(saliency_dir)
        artifacts["map_fvol"] = str(saliency_dir / "map.fvol")
        if cfg.write_overlays:
            overlay_dir = out_root / OVERLAY_DIR
            render_overlays(video, final, overlay_dir)
            artifacts["overlay_dir"] = str(overlay_dir)
    return final


def run_pipeline(cfg: PipelineConfig) -> RunManifest:
    """Execute every stage; returns the manifest (also written to disk)."""
    cfg.validate()
    out_root = Path(cfg.output_dir)
    out_root.mkdir(parents=True, exist_ok=True)

    timings: dict = {}
    bits: dict = {}

    with _stage("segment", timings):
        video, lab, hierarchy, layer = segment_video(cfg)
        labels_path = out_root / LABELS_FILE
        _write_labels_atomic(labels_path, layer)

    final = compute_saliency(video, lab, layer, cfg, out_root, timings, bits)
    bits.setdefault("artifacts", {})["labels"] = str(labels_path)

    if cfg.gt_dir is not None:
        with _stage("evaluate", timings):
            gt = load_ground_truth(cfg.gt_dir, lab.shape)
            report = evaluate_sequence(final, gt, name=Path(cfg.input_dir).name)
            _write_eval_artifacts(report, out_root, bits["artifacts"])
            bits["evaluation"] = {"auc": report.auc, "nss": report.nss}

    manifest = RunManifest(
        tool_version=__version__,
        mode=bits.get("mode", "lab-only"),
        config=cfg.snapshot(),
        stage_seconds=timings,
        layer_unit_counts=[lv.unit_count for lv in hierarchy.layers],
        selected_layer=cfg.layer_index or default_layer_index(hierarchy.layer_count),
        artifacts=bits.get("artifacts", {}),
        stationarity=bits.get("stationarity", {}),
        flags=bits.get("flags", []),
    )
    if "evaluation" in bits:
        manifest.artifacts["metrics_csv"] = str(out_root / "metrics.csv")
    manifest.write(out_root / MANIFEST_FILE)
    return manifest


def _write_eval_artifacts(report, out_root: Path, artifacts: dict) -> None:
    metrics_path = out_root / "metrics.csv"
    roc_path = out_root / "roc.csv"
    points_path = out_root / "roc.dat"
    frames_path = out_root / "frame_auc.csv"
    write_metrics_csv([report], metrics_path)
    write_roc_csv(report.roc, roc_path)
    write_roc_points(report.roc, points_path)
    write_frame_auc_csv(report, frames_path)
    artifacts.update(
        metrics_csv=str(metrics_path),
        roc_csv=str(roc_path),
        roc_points=str(points_path),
        frame_auc_csv=str(frames_path),
    )
