"""Binary sample-record dataset: generation from the oracle and file IO.

Format: magic "RPND0001", u32 little-endian JSON header length, JSON header,
then records of 8 little-endian float32 each: tx_x, tx_y, tx_z, pattern_id,
rx_x, rx_y, rx_z, p_norm (positions in meters).  Record order is tx-major,
then pattern, then receiver row-major.  The header embeds the scene JSON and
point-cloud prep settings so downstream stages need only the dataset file.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .antenna import AntennaPattern
from .errors import FormatError, ValidationError
from .geometry import PointCloudScene, hash_scene_dict, scene_from_dict
from .oracle import TraceConfig, Tracer

MAGIC = b"RPND0001"
RECORD_FLOATS = 8


def train_val_split(n_tx: int):
    """85/15 split by transmitter index: first floor(0.85 n) train, rest val."""
    n_train = int(math.floor(0.85 * n_tx))
    if n_tx >= 2:
        n_train = min(max(n_train, 1), n_tx - 1)
    return list(range(n_train)), list(range(n_train, n_tx))


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


@dataclass
class Dataset:
    header: dict
    tx_positions: np.ndarray    # (T, 3) meters
    pattern_ids: np.ndarray     # (P,)
    rx_positions: np.ndarray    # (R, 3) meters
    p_norm: np.ndarray          # (T, P, R)

    @property
    def trace_config(self) -> TraceConfig:
        h = self.header
        return TraceConfig(
            frequency_hz=h["frequency_hz"],
            max_reflection_order=h["trace"]["max_reflection_order"],
            diffraction_enabled=h["trace"]["diffraction_enabled"],
            p_min_db=h["P_min_db"],
            p_max_db=h["P_max_db"],
        )

    def scene(self) -> PointCloudScene:
        return scene_from_dict(self.header["scene"])

    @property
    def train_tx(self) -> list[int]:
        return list(self.header["split"]["train_tx_indices"])

    @property
    def val_tx(self) -> list[int]:
        return list(self.header["split"]["val_tx_indices"])


def generate_dataset(scene: PointCloudScene, tx_list: np.ndarray, pattern_ids,
                     rx_grid: np.ndarray, cfg: TraceConfig, out_path,
                     prep: dict | None = None, rx_dims=None) -> dict:
    """Trace every (tx, pattern, rx) record and write the dataset file.

    Path geometry is traced once per transmitter and shared across antenna
    patterns.  Returns the written header dict.
    """
    tx_list = np.atleast_2d(np.asarray(tx_list, dtype=np.float64))
    rx_grid = np.atleast_2d(np.asarray(rx_grid, dtype=np.float64))
    pattern_ids = [int(p) for p in pattern_ids]
    if len(tx_list) == 0 or len(rx_grid) == 0 or len(pattern_ids) == 0:
        raise ValidationError("dataset generation needs transmitters, patterns, and receivers")
    if scene.source is None:
        raise ValidationError("scene lacks canonical JSON; load it via load_scene/scene_from_dict")

    train_idx, val_idx = train_val_split(len(tx_list))
    header = {
        "scene_hash": hash_scene_dict(scene.source),
        "frequency_hz": cfg.frequency_hz,
        "P_min_db": cfg.p_min_db,
        "P_max_db": cfg.p_max_db,
        "n_tx": len(tx_list),
        "n_patterns": len(pattern_ids),
        "pattern_ids": pattern_ids,
        "rx_dims": list(rx_dims) if rx_dims is not None else [len(rx_grid), 1, 1],
        "split": {"train_tx_indices": train_idx, "val_tx_indices": val_idx},
        "scene": scene.source,
        "prep": prep or {},
        "trace": {
            "max_reflection_order": cfg.max_reflection_order,
            "diffraction_enabled": cfg.diffraction_enabled,
        },
    }

    tracer = Tracer(scene, cfg)
    patterns = [AntennaPattern(p) for p in pattern_ids]
    n_rx = len(rx_grid)
    records = np.empty((len(tx_list), len(pattern_ids), n_rx, RECORD_FLOATS), dtype=np.float32)
    for t, tx in enumerate(tx_list):
        bundles = tracer.collect_bundles(tx, rx_grid)
        for p, pat in enumerate(patterns):
            _, p_norm = tracer.power_from_bundles(pat, rx_grid, bundles)
            block = records[t, p]
            block[:, 0:3] = tx.astype(np.float32)
            block[:, 3] = np.float32(pattern_ids[p])
            block[:, 4:7] = rx_grid.astype(np.float32)
            block[:, 7] = p_norm.astype(np.float32)

    header_bytes = _canonical_json(header)
    try:
        with open(out_path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(np.uint32(len(header_bytes)).tobytes())
            fh.write(header_bytes)
            fh.write(records.reshape(-1).astype("<f4").tobytes())
    except OSError as exc:
        raise OSError(f"cannot write dataset to {out_path}: {exc}") from exc
    return header


def load_dataset(path) -> Dataset:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError:
        raise
    if len(blob) < len(MAGIC) + 4 or blob[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{path} is not a dataset file (bad magic)")
    hlen = int(np.frombuffer(blob, dtype="<u4", count=1, offset=len(MAGIC))[0])
    start = len(MAGIC) + 4
    if len(blob) < start + hlen:
        raise FormatError(f"{path} is truncated inside the header")
    header = json.loads(blob[start:start + hlen].decode())
    payload_bytes = len(blob) - start - hlen
    if payload_bytes % 4:
        raise FormatError(f"{path} is truncated mid-value")
    payload = np.frombuffer(blob, dtype="<f4", offset=start + hlen)

    n_tx = header["n_tx"]
    n_pat = header["n_patterns"]
    if payload.size % RECORD_FLOATS:
        raise FormatError(f"{path} payload is not a whole number of records")
    n_records = payload.size // RECORD_FLOATS
    if n_records % (n_tx * n_pat):
        raise FormatError(f"{path} record count {n_records} inconsistent with header")
    n_rx = n_records // (n_tx * n_pat)
    recs = payload.reshape(n_tx, n_pat, n_rx, RECORD_FLOATS).astype(np.float64)
    tx = recs[:, 0, 0, 0:3]
    rx = recs[0, 0, :, 4:7]
    pattern_ids = recs[0, :, 0, 3].astype(int)
    return Dataset(
        header=header,
        tx_positions=tx,
        pattern_ids=pattern_ids,
        rx_positions=rx,
        p_norm=recs[..., 7],
    )


def receiver_grid(scene: PointCloudScene, nx: int, ny: int, heights) -> tuple[np.ndarray, list]:
    """Cell-centered receiver grid over the scene footprint at given heights.
    Row-major over (height, y-row, x-column)."""
    if nx < 1 or ny < 1 or len(heights) < 1:
        raise ValidationError("receiver grid dimensions must be positive")
    lo, hi = scene.bounds_min, scene.bounds_max
    xs = lo[0] + (np.arange(nx) + 0.5) * (hi[0] - lo[0]) / nx
    ys = lo[1] + (np.arange(ny) + 0.5) * (hi[1] - lo[1]) / ny
    pts = []
    for h in heights:
        for y in ys:
            for x in xs:
                pts.append((x, y, h))
    return np.array(pts, dtype=np.float64), [nx, ny, len(heights)]


def sample_transmitters(scene: PointCloudScene, count: int, seed: int,
                        z_min: float, z_max: float) -> np.ndarray:
    """Seeded uniform transmitter placement in free space (outside solid boxes)."""
    if count < 1:
        raise ValidationError("transmitter count must be positive")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 7])))
    lo, hi = scene.bounds_min, scene.bounds_max
    out = []
    attempts = 0
    from .geometry import Box
    boxes = [p for p in scene.primitives if isinstance(p, Box)]
    while len(out) < count:
        attempts += 1
        if attempts > 10000 * count:
            raise ValidationError("could not place transmitters in free space")
        p = np.array([
            rng.uniform(lo[0], hi[0]),
            rng.uniform(lo[1], hi[1]),
            rng.uniform(z_min, z_max),
        ])
        if any(b.contains(p)[0] for b in boxes):
            continue
        out.append(p)
    return np.array(out)
