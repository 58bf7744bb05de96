"""Deterministic checkpoint container.

Layout: one JSON header line (sorted keys, fixed separators) describing the
format version, provenance hash, metadata and every array's name/shape,
followed by the raw little-endian float64 bytes of the arrays in header
order. Identical contents always produce identical bytes, unlike zip-based
containers that embed timestamps.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

FORMAT_VERSION = 1
_MAGIC = "myodyn-checkpoint"


@dataclass
class Checkpoint:
    params: dict          # name -> float64 array
    norm_mean: np.ndarray
    norm_std: np.ndarray
    config_hash: str
    meta: dict            # json-safe run metadata (arch sizes, muscle names, ...)


def atomic_write_bytes(path, payload: bytes):
    """Whole-file atomic write: temp file in the target dir, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str):
    atomic_write_bytes(path, text.encode())


def save_checkpoint(path, ckpt: Checkpoint):
    names = sorted(ckpt.params)
    header = {
        "magic": _MAGIC,
        "version": FORMAT_VERSION,
        "config_hash": ckpt.config_hash,
        "meta": ckpt.meta,
        "norm_mean": [float(v) for v in ckpt.norm_mean],
        "norm_std": [float(v) for v in ckpt.norm_std],
        "arrays": [{"name": n, "shape": list(ckpt.params[n].shape)} for n in names],
    }
    blob = [json.dumps(header, sort_keys=True, separators=(",", ":")).encode(), b"\n"]
    for n in names:
        arr = np.ascontiguousarray(ckpt.params[n], dtype="<f8")
        blob.append(arr.tobytes())
    atomic_write_bytes(path, b"".join(blob))


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError:
            raise ConfigError(f"{path}: not a checkpoint file") from None
        if header.get("magic") != _MAGIC:
            raise ConfigError(f"{path}: not a checkpoint file")
        if header.get("version") != FORMAT_VERSION:
            raise ConfigError(f"{path}: unsupported checkpoint version "
                              f"{header.get('version')}")
        params = {}
        for spec in header["arrays"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(count * 8)
            if len(raw) != count * 8:
                raise ConfigError(f"{path}: truncated array '{spec['name']}'")
            params[spec["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    return Checkpoint(params=params,
                      norm_mean=np.array(header["norm_mean"]),
                      norm_std=np.array(header["norm_std"]),
                      config_hash=header["config_hash"],
                      meta=header["meta"])
