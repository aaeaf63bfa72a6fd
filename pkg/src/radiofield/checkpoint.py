"""Model checkpoint format.

Magic "RPNC0001", u32 little-endian header length, JSON header
{model_config, train_config_digest, sh_convention, P_min_db, P_max_db,
scene_hash, tensors: [{name, shape, dtype, offset}]}, then a contiguous
little-endian float32 payload.  The header also embeds the scene JSON and
prep settings so a checkpoint alone can serve predictions.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .errors import FormatError
from .model import ModelConfig, param_shapes
from .sh import SH_CONVENTION

MAGIC = b"RPNC0001"


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def config_digest(cfg_dict: dict) -> str:
    return hashlib.sha256(_canonical_json(cfg_dict)).hexdigest()


def save_checkpoint(path, params: dict, model_cfg: ModelConfig, *,
                    train_config: dict, p_min_db: float, p_max_db: float,
                    scene_hash: str, scene: dict, prep: dict,
                    extra: dict | None = None) -> None:
    """Write parameters as float32; `params` maps name -> ndarray or Tensor."""
    arrays = {}
    for name in sorted(params):
        p = params[name]
        data = p.data if hasattr(p, "data") else p
        arrays[name] = np.asarray(data, dtype=np.float64).astype("<f4")

    tensors = []
    offset = 0
    for name, arr in arrays.items():
        tensors.append({"name": name, "shape": list(arr.shape), "dtype": "f32",
                        "offset": offset})
        offset += arr.nbytes

    header = {
        "model_config": model_cfg.to_dict(),
        "train_config_digest": config_digest(train_config),
        "sh_convention": SH_CONVENTION,
        "P_min_db": p_min_db,
        "P_max_db": p_max_db,
        "scene_hash": scene_hash,
        "scene": scene,
        "prep": prep,
        "tensors": tensors,
    }
    if extra:
        header.update(extra)
    blob = _canonical_json(header)
    try:
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(np.uint32(len(blob)).tobytes())
            fh.write(blob)
            for arr in arrays.values():
                fh.write(arr.tobytes())
    except OSError as exc:
        raise OSError(f"cannot write checkpoint to {path}: {exc}") from exc


def load_checkpoint(path):
    """Returns (arrays name->float64 ndarray, header).  Validates the magic,
    payload extent, and tensor shapes against the stored model config."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError:
        raise
    if len(blob) < len(MAGIC) + 4 or blob[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{path} is not a checkpoint file (bad magic)")
    hlen = int(np.frombuffer(blob, dtype="<u4", count=1, offset=len(MAGIC))[0])
    start = len(MAGIC) + 4
    if len(blob) < start + hlen:
        raise FormatError(f"{path} is truncated inside the header")
    header = json.loads(blob[start:start + hlen].decode())
    payload = blob[start + hlen:]

    cfg = ModelConfig.from_dict(header["model_config"])
    expected = param_shapes(cfg)
    arrays = {}
    for t in header["tensors"]:
        name, shape, offset = t["name"], tuple(t["shape"]), t["offset"]
        if t.get("dtype") != "f32":
            raise FormatError(f"{path}: tensor {name} has unsupported dtype {t.get('dtype')}")
        if name not in expected:
            raise FormatError(f"{path}: unexpected tensor {name} for the stored model config")
        if shape != expected[name]:
            raise FormatError(
                f"{path}: tensor {name} shape {shape} does not match model config {expected[name]}"
            )
        count = int(np.prod(shape)) if shape else 1
        end = offset + 4 * count
        if end > len(payload):
            raise FormatError(f"{path} is truncated inside tensor {name}")
        arrays[name] = np.frombuffer(payload, dtype="<f4", count=count,
                                     offset=offset).astype(np.float64).reshape(shape)
    missing = set(expected) - set(arrays)
    if missing:
        raise FormatError(f"{path} is missing tensors: {sorted(missing)}")
    return arrays, header


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
