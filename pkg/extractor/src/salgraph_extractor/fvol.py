"""FVOL writer: the wire format shared with the saliency pipeline.

Little-endian header (magic ``FVOL``, u32 version=1, u32 m, n, t, C,
u8 dtype code 1 = float32) followed by the raw float32 payload in
(frame, row, col, channel) order.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

_HEADER = struct.Struct("<4sIIIIIB")
MAGIC = b"FVOL"
VERSION = 1
DTYPE_FLOAT32 = 1


def write_fvol(path: str | Path, data: np.ndarray) -> None:
    """Write a (t, m, n, C) array as float32 FVOL."""
    if data.ndim != 4:
        raise ValueError(f"expected (t, m, n, C), got shape {data.shape}")
    t, m, n, c = data.shape
    payload = np.ascontiguousarray(data, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, m, n, t, c, DTYPE_FLOAT32))
        fh.write(payload.tobytes())
