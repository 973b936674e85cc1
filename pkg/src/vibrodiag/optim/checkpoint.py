"""Checkpoint container: magic, version, JSON manifest, contiguous f32 blobs."""

from __future__ import annotations

import json
import struct

import numpy as np

from vibrodiag.errors import BadMagic, TruncatedFile, VersionMismatch
from vibrodiag.net.config import ModelConfig
from vibrodiag.net.model import ModelParams
from vibrodiag.textcodec import vocab_table

MAGIC = b"VDCK"
FORMAT_VERSION = 1


def save_checkpoint(params: ModelParams, path, extra: dict | None = None) -> None:
    """Layout: magic, u32 version, u64 manifest length, manifest JSON, blob."""
    tensors = []
    blobs = []
    offset = 0
    for kind, table in (("base", params.base), ("adapter", params.adapters)):
        for name in sorted(table):
            arr = np.ascontiguousarray(table[name], dtype="<f4")
            tensors.append(
                {
                    "name": name,
                    "kind": kind,
                    "shape": list(arr.shape),
                    "offset": offset,
                    "dtype": "f32le",
                }
            )
            blobs.append(arr.tobytes())
            offset += arr.nbytes
    manifest = {
        "format_version": FORMAT_VERSION,
        "config": params.config.to_dict(),
        "vocab": vocab_table(),
        "tensors": tensors,
    }
    if extra:
        manifest["extra"] = extra
    mbytes = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(mbytes)))
        fh.write(mbytes)
        for b in blobs:
            fh.write(b)


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    """Returns (params, manifest); every tensor round-trips bit-exactly."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 16 or raw[:4] != MAGIC:
        raise BadMagic("not a checkpoint file")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"format version {version}, expected {FORMAT_VERSION}")
    (mlen,) = struct.unpack_from("<Q", raw, 8)
    if 16 + mlen > len(raw):
        raise TruncatedFile("manifest extends past end of file")
    manifest = json.loads(raw[16 : 16 + mlen].decode("utf-8"))
    blob = raw[16 + mlen :]
    params = ModelParams(config=ModelConfig.from_dict(manifest["config"]))
    for entry in manifest["tensors"]:
        if entry["dtype"] != "f32le":
            raise VersionMismatch(f"unsupported tensor dtype {entry['dtype']}")
        shape = tuple(entry["shape"])
        nbytes = int(np.prod(shape)) * 4 if shape else 4
        start = entry["offset"]
        if start + nbytes > len(blob):
            raise TruncatedFile(f"tensor {entry['name']} extends past end of blob")
        arr = np.frombuffer(blob[start : start + nbytes], dtype="<f4").reshape(shape).copy()
        if entry["kind"] == "base":
            params.base[entry["name"]] = arr
        else:
            params.adapters[entry["name"]] = arr
    return params, manifest
