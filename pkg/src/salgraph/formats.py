"""Binary volume file formats (LVOL for labels, FVOL for float features).

Both formats are little-endian with a fixed header followed by a raw
payload in (frame, row, col[, channel]) order, so a C-contiguous numpy
array maps to the payload byte for byte.

LVOL: magic ``LVOL``, u32 version=1, u32 m, n, t, u32 unit_count,
      then m*n*t u32 labels.
FVOL: magic ``FVOL``, u32 version=1, u32 m, n, t, C, u8 dtype code
      (1 = float32), then m*n*t*C floats.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .errors import DataError

LVOL_MAGIC = b"LVOL"
FVOL_MAGIC = b"FVOL"
FORMAT_VERSION = 1
DTYPE_FLOAT32 = 1

_LVOL_HEADER = struct.Struct("<4sIIIII")
_FVOL_HEADER = struct.Struct("<4sIIIIIB")


def write_lvol(path: str | Path, labels: np.ndarray, unit_count: int) -> None:
    """Write a (t, m, n) integer label array to an LVOL file."""
    if labels.ndim != 3:
        raise DataError(f"label volume must be (t, m, n), got shape {labels.shape}")
    t, m, n = labels.shape
    payload = np.ascontiguousarray(labels, dtype="<u4")
    with open(path, "wb") as fh:
        fh.write(_LVOL_HEADER.pack(LVOL_MAGIC, FORMAT_VERSION, m, n, t, unit_count))
        fh.write(payload.tobytes())


def read_lvol(path: str | Path) -> tuple[np.ndarray, int]:
    """Read an LVOL file; returns ((t, m, n) int array, unit_count)."""
    raw = Path(path).read_bytes()
    if len(raw) < _LVOL_HEADER.size:
        raise DataError(f"{path}: truncated LVOL header")
    magic, version, m, n, t, unit_count = _LVOL_HEADER.unpack_from(raw)
    if magic != LVOL_MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}, expected {LVOL_MAGIC!r}")
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported LVOL version {version}")
    expected = _LVOL_HEADER.size + 4 * m * n * t
    if len(raw) < expected:
        raise DataError(f"{path}: truncated LVOL payload ({len(raw)} < {expected} bytes)")
    labels = np.frombuffer(raw, dtype="<u4", count=m * n * t, offset=_LVOL_HEADER.size)
    return labels.reshape(t, m, n).astype(np.int64), unit_count


def write_fvol(path: str | Path, data: np.ndarray) -> None:
    """Write a (t, m, n, C) float array to an FVOL file as float32."""
    if data.ndim != 4:
        raise DataError(f"feature volume must be (t, m, n, C), got shape {data.shape}")
    t, m, n, c = data.shape
    payload = np.ascontiguousarray(data, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_FVOL_HEADER.pack(FVOL_MAGIC, FORMAT_VERSION, m, n, t, c, DTYPE_FLOAT32))
        fh.write(payload.tobytes())


def read_fvol(path: str | Path) -> np.ndarray:
    """Read an FVOL file into a (t, m, n, C) float32 array."""
    raw = Path(path).read_bytes()
    if len(raw) < _FVOL_HEADER.size:
        raise DataError(f"{path}: truncated FVOL header")
    magic, version, m, n, t, c, dtype_code = _FVOL_HEADER.unpack_from(raw)
    if magic != FVOL_MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}, expected {FVOL_MAGIC!r}")
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported FVOL version {version}")
    if dtype_code != DTYPE_FLOAT32:
        raise DataError(f"{path}: unsupported dtype code {dtype_code}")
    count = m * n * t * c
    expected = _FVOL_HEADER.size + 4 * count
    if len(raw) < expected:
        raise DataError(f"{path}: truncated FVOL payload ({len(raw)} < {expected} bytes)")
    data = np.frombuffer(raw, dtype="<f4", count=count, offset=_FVOL_HEADER.size)
    return data.reshape(t, m, n, c).copy()


def replace_atomic(tmp_path: str | Path, final_path: str | Path) -> None:
    """Promote a finished partial file to its final name."""
    os.replace(tmp_path, final_path)


def partial_path(path: Path) -> Path:
    """Scratch name used while an artifact is being written."""
    return path.with_name(path.name + ".partial")
