"""Coverage map binary format and PGM export.

Map format: magic "RPNM0001", u32 little-endian JSON header length, JSON
header {bounds, height, resolution, P_min_db, P_max_db}, then float32
row-major values (rows advance along y, columns along x).
"""

from __future__ import annotations

import json

import numpy as np

from .errors import FormatError

MAGIC = b"RPNM0001"


def save_map(path, values: np.ndarray, bounds_min, bounds_max, height: float,
             p_min_db: float, p_max_db: float) -> dict:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise FormatError(f"coverage map must be square, got {values.shape}")
    header = {
        "bounds": {"min": [float(v) for v in bounds_min],
                   "max": [float(v) for v in bounds_max]},
        "height": float(height),
        "resolution": int(values.shape[0]),
        "P_min_db": float(p_min_db),
        "P_max_db": float(p_max_db),
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.uint32(len(blob)).tobytes())
        fh.write(blob)
        fh.write(values.astype("<f4").tobytes())
    return header


def load_map(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(MAGIC) + 4 or blob[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{path} is not a coverage map file (bad magic)")
    hlen = int(np.frombuffer(blob, dtype="<u4", count=1, offset=len(MAGIC))[0])
    start = len(MAGIC) + 4
    header = json.loads(blob[start:start + hlen].decode())
    res = header["resolution"]
    values = np.frombuffer(blob, dtype="<f4", offset=start + hlen, count=res * res)
    if values.size != res * res:
        raise FormatError(f"{path} is truncated: expected {res * res} values")
    return header, values.astype(np.float64).reshape(res, res)


def save_pgm(path, values: np.ndarray) -> None:
    """8-bit grayscale PGM of normalized values in [0, 1] for quick eyeballing."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    gray = np.round(v * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{gray.shape[1]} {gray.shape[0]}\n255\n".encode())
        fh.write(gray.tobytes())
