"""Binary on-disk formats: feature cache blobs and the versioned checkpoint
container.

Feature blob: magic 'IDRF', u32 version, u8 kind, u32 rows, u32 cols, then
row-major little-endian float32 data.

Checkpoint container: magic 'IDRC', u32 version, u32 header length, UTF-8
JSON header {config, tensors: [{name, shape}]}, then the tensors in header
order as little-endian float64.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

FEATURE_MAGIC = b"IDRF"
CHECKPOINT_MAGIC = b"IDRC"
FORMAT_VERSION = 1

KIND_PROSODY = 0
KIND_LOGMEL = 1


class ContainerError(ValueError):
    pass


def write_feature_blob(path: str | Path, kind: int, data: np.ndarray) -> None:
    arr = np.ascontiguousarray(data, dtype="<f4")
    if arr.ndim != 2:
        raise ContainerError(f"expected 2-D feature data, got shape {arr.shape}")
    header = FEATURE_MAGIC + struct.pack("<IBII", FORMAT_VERSION, kind,
                                         arr.shape[0], arr.shape[1])
    Path(path).write_bytes(header + arr.tobytes())


def read_feature_blob(path: str | Path) -> tuple[int, np.ndarray]:
    raw = Path(path).read_bytes()
    if raw[:4] != FEATURE_MAGIC:
        raise ContainerError(f"{path}: bad magic {raw[:4]!r}")
    version, kind, rows, cols = struct.unpack("<IBII", raw[4:17])
    if version != FORMAT_VERSION:
        raise ContainerError(f"{path}: unsupported version {version}")
    expected = rows * cols * 4
    payload = raw[17:]
    if len(payload) != expected:
        raise ContainerError(f"{path}: payload {len(payload)} bytes, expected {expected}")
    data = np.frombuffer(payload, dtype="<f4").reshape(rows, cols)
    return kind, data.astype(np.float64)


def feature_cache_key(instance_id: str, feature_kind: str, version: str) -> str:
    safe = instance_id.replace("/", "_").replace(":", "_")
    return f"{safe}.{feature_kind}.{version}.idrf"


def write_checkpoint(path: str | Path, config: dict,
                     tensors: dict[str, np.ndarray]) -> None:
    names = list(tensors)
    header = {
        "config": config,
        "tensors": [{"name": n, "shape": list(np.asarray(tensors[n]).shape)}
                    for n in names],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    out = bytearray()
    out += CHECKPOINT_MAGIC
    out += struct.pack("<II", FORMAT_VERSION, len(header_bytes))
    out += header_bytes
    for n in names:
        out += np.ascontiguousarray(tensors[n], dtype="<f8").tobytes()
    Path(path).write_bytes(bytes(out))


def read_checkpoint(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise ContainerError(f"{path}: bad magic {raw[:4]!r}")
    version, header_len = struct.unpack("<II", raw[4:12])
    if version != FORMAT_VERSION:
        raise ContainerError(f"{path}: unsupported version {version}")
    header = json.loads(raw[12 : 12 + header_len].decode("utf-8"))
    offset = 12 + header_len
    tensors: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
        offset += count * 8
        tensors[entry["name"]] = data.reshape(shape).astype(np.float64)
    if offset != len(raw):
        raise ContainerError(f"{path}: trailing bytes after tensors")
    return header["config"], tensors
