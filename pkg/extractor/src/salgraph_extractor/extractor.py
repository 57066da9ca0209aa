"""512-channel per-pixel deep features from a VGG16 backbone.

Each frame is pushed through the convolutional stack up to a chosen
512-channel layer, the feature map is bilinearly upsampled back to frame
resolution, and the stacked result is written as an FVOL volume the
saliency pipeline can ingest. Inference runs in deterministic mode, so
two runs over the same input are byte-identical.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torchvision
from PIL import Image
from torch.nn import functional as F
from torchvision.models import vgg16

from .fvol import write_fvol

log = logging.getLogger("salgraph_extractor")

REQUIRED_CHANNELS = 512

# 512-channel activations in vgg16.features: slice end index and stride.
LAYERS = {
    "conv4_3": (23, 8),
    "conv5_3": (30, 16),
}

_IMAGENET_MEAN = (0.485, 0.456, 0.406)
_IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class ExtractionSpec:
    """What to run: backbone layer, weight source, batching, device."""

    layer: str = "conv5_3"
    weights: str = "default"  # "default" (pretrained), "none" (seeded random), or a .pt path
    batch_size: int = 4
    device: str = "cpu"
    seed: int = 0  # used only for weights="none"

    def __post_init__(self):
        if self.layer not in LAYERS:
            raise ValueError(f"unknown layer '{self.layer}', choose from {sorted(LAYERS)}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    @property
    def stride(self) -> int:
        return LAYERS[self.layer][1]


def _natural_key(name: str):
    return tuple(
        (0, int(part)) if part.isdigit() else (1, part)
        for part in re.split(r"(\d+)", name)
    )


def load_frames(frames_dir: str | Path, pattern: str = "*.png") -> np.ndarray:
    """Load a frame directory into a (t, m, n, 3) float32 array in [0, 1]."""
    frames_dir = Path(frames_dir)
    if not frames_dir.is_dir():
        raise FileNotFoundError(f"missing directory: {frames_dir}")
    files = sorted(frames_dir.glob(pattern), key=lambda p: _natural_key(p.name))
    if not files:
        raise FileNotFoundError(f"no frames matched '{pattern}' in {frames_dir}")
    frames = []
    for path in files:
        with Image.open(path) as img:
            frames.append(np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0)
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise ValueError(f"inconsistent frame sizes: {sorted(shapes)}")
    return np.stack(frames)


def build_backbone(spec: ExtractionSpec) -> torch.nn.Module:
    """The convolutional stack up to the requested layer, eval mode."""
    end, _ = LAYERS[spec.layer]
    if spec.weights == "default":
        try:
            model = vgg16(weights=torchvision.models.VGG16_Weights.IMAGENET1K_V1)
        except Exception as exc:
            raise RuntimeError(
                "pretrained weights unavailable; pass a checkpoint path or "
                "weights='none' for a seeded random backbone"
            ) from exc
    elif spec.weights == "none":
        torch.manual_seed(spec.seed)
        model = vgg16(weights=None)
    else:
        model = vgg16(weights=None)
        state = torch.load(spec.weights, map_location="cpu", weights_only=True)
        model.load_state_dict(state)
    stack = model.features[:end]
    stack.eval()
    return stack.to(spec.device)


def extract_features(
    frames_dir: str | Path,
    spec: ExtractionSpec,
    out_path: str | Path,
    pattern: str = "*.png",
) -> np.ndarray:
    """Run the backbone per frame and write the upsampled FVOL volume.

    Returns the written (t, m, n, 512) array.
    """
    torch.use_deterministic_algorithms(True)
    frames = load_frames(frames_dir, pattern)
    t, m, n, _ = frames.shape
    backbone = build_backbone(spec)

    mean = torch.tensor(_IMAGENET_MEAN).view(1, 3, 1, 1)
    std = torch.tensor(_IMAGENET_STD).view(1, 3, 1, 1)

    chunks = []
    with torch.no_grad():
        for start in range(0, t, spec.batch_size):
            batch = torch.from_numpy(frames[start:start + spec.batch_size])
            batch = batch.permute(0, 3, 1, 2)
            batch = ((batch - mean) / std).to(spec.device)
            response = backbone(batch)
            if response.shape[1] != REQUIRED_CHANNELS:
                raise RuntimeError(
                    f"layer '{spec.layer}' produced {response.shape[1]} channels, "
                    f"contract requires {REQUIRED_CHANNELS}"
                )
            upsampled = F.interpolate(
                response, size=(m, n), mode="bilinear", align_corners=False
            )
            chunks.append(upsampled.permute(0, 2, 3, 1).cpu().numpy())
    volume = np.concatenate(chunks).astype(np.float32)

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_fvol(out_path, volume)
    _write_sidecar(out_path, spec, (t, m, n))
    log.info("wrote %s: t=%d m=%d n=%d C=%d", out_path, t, m, n, REQUIRED_CHANNELS)
    return volume


def _write_sidecar(out_path: Path, spec: ExtractionSpec, dims: tuple[int, int, int]) -> None:
    """Record model identity next to the volume for run manifests."""
    t, m, n = dims
    sidecar = {
        "model": "vgg16",
        "layer": spec.layer,
        "weights": spec.weights,
        "channels": REQUIRED_CHANNELS,
        "stride": spec.stride,
        "upsampling": "bilinear",
        "frames": t,
        "height": m,
        "width": n,
        "torch": torch.__version__,
        "torchvision": torchvision.__version__,
    }
    out_path.with_suffix(out_path.suffix + ".json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n"
    )
