"""salgraph command line interface.

Subcommands chain through the on-disk formats (LVOL / FVOL / PNG / CSV),
so a monolithic ``run`` and a sequence of stage commands produce
identical artifacts.

Exit codes: 0 success, 2 config error, 3 data-contract error,
4 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from .config import build_config, read_config_file
from .errors import EXIT_CONFIG, EXIT_DATA, EXIT_OK, EXIT_RUNTIME, ConfigError, DataError, StageError
from .evaluation import (
    evaluate_sequence,
    write_frame_auc_csv,
    write_metrics_csv,
    write_roc_csv,
    write_roc_points,
)
from .features import lab_feature_tensor, read_feature_tensor, write_feature_tensor
from .fusion import read_map, render_overlays
from .pipeline import compute_saliency, run_pipeline, segment_video
from .segmentation import load_labels, save_labels
from .volume import load_frame_sequence, load_ground_truth, rgb_to_lab

log = logging.getLogger("salgraph")


def _add_segmentation_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--k", type=float, help="FH merge threshold scale")
    parser.add_argument("--min-size", dest="min_size", type=int, help="minimum unit size in voxels")
    parser.add_argument("--levels", type=int, help="hierarchy depth")
    parser.add_argument("--layer", dest="layer_index", type=int, help="1-based layer to use")
    parser.add_argument("--connectivity", type=int, choices=(6, 26), help="lattice connectivity")


def _add_saliency_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--rho", type=float, help="RBF kernel scale")
    parser.add_argument("--rho-deep", dest="rho_deep", type=float, help="kernel scale for deep features")
    parser.add_argument("--mu", type=float, help="propagation smoothing factor")
    parser.add_argument("--beta", type=float, help="fusion trade-off in [0, 1]")
    parser.add_argument("--solver", choices=("direct", "iterative"), help="linear solver")
    parser.add_argument("--no-overlays", action="store_true", help="skip overlay rendering")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="salgraph", description=__doc__)
    parser.add_argument("--quiet", action="store_true", help="warnings only")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute the full pipeline")
    run.add_argument("-c", "--config", help="TOML config file")
    run.add_argument("--input", dest="input_dir", help="frame directory")
    run.add_argument("--output", dest="output_dir", help="artifact directory")
    run.add_argument("--gt", dest="gt_dir", help="ground truth mask directory")
    run.add_argument("--features", dest="feature_tensor_path", help="deep feature FVOL")
    run.add_argument("--pattern", dest="frame_pattern", help="frame filename glob")
    _add_segmentation_flags(run)
    _add_saliency_flags(run)

    seg = sub.add_parser("segment", help="segment frames and write labels.lvol")
    seg.add_argument("--input", dest="input_dir", required=True)
    seg.add_argument("--out", required=True, help="output LVOL path")
    seg.add_argument("--pattern", dest="frame_pattern")
    _add_segmentation_flags(seg)

    feat = sub.add_parser("features", help="export the LAB feature tensor as FVOL")
    feat.add_argument("--input", dest="input_dir", required=True)
    feat.add_argument("--out", required=True, help="output FVOL path")
    feat.add_argument("--check", help="validate an external deep FVOL against the clip")
    feat.add_argument("--pattern", dest="frame_pattern")

    sal = sub.add_parser("saliency", help="compute saliency from stored labels")
    sal.add_argument("--input", dest="input_dir", required=True)
    sal.add_argument("--labels", required=True, help="labels.lvol from 'segment'")
    sal.add_argument("--out", dest="output_dir", required=True)
    sal.add_argument("--features", dest="feature_tensor_path", help="deep feature FVOL")
    sal.add_argument("--pattern", dest="frame_pattern")
    sal.add_argument("--connectivity", type=int, choices=(6, 26))
    _add_saliency_flags(sal)

    ev = sub.add_parser("eval", help="evaluate a stored map against ground truth")
    ev.add_argument("--map", dest="map_path", required=True, help="map.fvol")
    ev.add_argument("--gt", dest="gt_dir", required=True)
    ev.add_argument("--out", dest="output_dir", required=True)
    ev.add_argument("--name", default="sequence")

    ov = sub.add_parser("render-overlay", help="blend a stored map over the input frames")
    ov.add_argument("--input", dest="input_dir", required=True)
    ov.add_argument("--map", dest="map_path", required=True)
    ov.add_argument("--out", dest="output_dir", required=True)
    ov.add_argument("--pattern", dest="frame_pattern")

    return parser


_CONFIG_KEYS = (
    "input_dir", "output_dir", "gt_dir", "feature_tensor_path", "frame_pattern",
    "rho", "rho_deep", "mu", "beta", "k", "min_size", "levels", "layer_index",
    "connectivity", "solver",
)


def _overrides_from_args(args: argparse.Namespace) -> dict:
    overrides = {k: getattr(args, k) for k in _CONFIG_KEYS if getattr(args, k, None) is not None}
    if getattr(args, "no_overlays", False):
        overrides["write_overlays"] = False
    return overrides


def _cmd_run(args) -> int:
    file_values = read_config_file(args.config) if args.config else {}
    cfg = build_config(file_values, _overrides_from_args(args))
    manifest = run_pipeline(cfg)
    log.info("done: mode=%s artifacts in %s", manifest.mode, cfg.output_dir)
    return EXIT_OK


def _cmd_segment(args) -> int:
    overrides = _overrides_from_args(args)
    overrides["output_dir"] = Path(args.out).parent
    cfg = build_config({}, overrides)
    _, _, hierarchy, layer = segment_video(cfg)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_labels(args.out, layer)
    log.info(
        "segmented: layers %s, selected layer has %d units",
        [lv.unit_count for lv in hierarchy.layers], layer.unit_count,
    )
    return EXIT_OK


def _cmd_features(args) -> int:
    video = load_frame_sequence(args.input_dir, args.frame_pattern or "*.png")
    lab = rgb_to_lab(video)
    tensor = lab_feature_tensor(lab)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_feature_tensor(args.out, tensor)
    log.info("wrote LAB tensor %s (t=%d, m=%d, n=%d, C=3)", args.out,
             lab.frames, lab.height, lab.width)
    if args.check:
        deep = read_feature_tensor(args.check, (lab.height, lab.width, lab.frames))
        log.info("validated %s: C=%d, dims match", args.check, deep.channels)
    return EXIT_OK


def _cmd_saliency(args) -> int:
    overrides = _overrides_from_args(args)
    cfg = build_config({}, overrides)
    out_root = Path(cfg.output_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    video = load_frame_sequence(cfg.input_dir, cfg.frame_pattern)
    lab = rgb_to_lab(video)
    layer = load_labels(args.labels)
    if layer.shape != lab.shape:
        raise DataError(f"labels shape {layer.shape} does not match video shape {lab.shape}")
    timings: dict = {}
    bits: dict = {}
    compute_saliency(video, lab, layer, cfg, out_root, timings, bits)
    log.info("saliency written to %s (mode=%s)", out_root, bits.get("mode"))
    return EXIT_OK


def _cmd_eval(args) -> int:
    saliency = read_map(args.map_path)
    gt = load_ground_truth(args.gt_dir, saliency.shape)
    report = evaluate_sequence(saliency, gt, name=args.name)
    out_root = Path(args.output_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    write_metrics_csv([report], out_root / "metrics.csv")
    write_roc_csv(report.roc, out_root / "roc.csv")
    write_roc_points(report.roc, out_root / "roc.dat")
    write_frame_auc_csv(report, out_root / "frame_auc.csv")
    print(f"{report.sequence}: auc={report.auc:.6f} nss={report.nss:.6f}")
    return EXIT_OK


def _cmd_render_overlay(args) -> int:
    video = load_frame_sequence(args.input_dir, args.frame_pattern or "*.png")
    saliency = read_map(args.map_path)
    if saliency.shape != video.shape:
        raise DataError(f"map shape {saliency.shape} does not match video shape {video.shape}")
    render_overlays(video, saliency, args.output_dir)
    log.info("overlays written to %s", args.output_dir)
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "segment": _cmd_segment,
    "features": _cmd_features,
    "saliency": _cmd_saliency,
    "eval": _cmd_eval,
    "render-overlay": _cmd_render_overlay,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    start = time.perf_counter()
    try:
        code = _COMMANDS[args.command](args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except StageError as exc:
        log.error("%s", exc)
        return EXIT_DATA if isinstance(exc.cause, DataError) else EXIT_RUNTIME
    except DataError as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.error("runtime failure: %s", exc)
        return EXIT_RUNTIME
    log.info("%s finished in %.2fs", args.command, time.perf_counter() - start)
    return code


if __name__ == "__main__":
    sys.exit(main())
