"""Checkpoint files: a JSON manifest of (name, shape, offset) plus raw float32 data.

Layout: 8-byte magic, little-endian uint32 header length, UTF-8 JSON header,
then the concatenated little-endian float32 buffers in manifest order.
Loading validates every shape and errors on unknown or missing names.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import CheckpointError

MAGIC = b"EAckpt1\n"


def save_checkpoint(path, module):
    entries = []
    buffers = []
    offset = 0
    for name, p in module.named_parameters():
        raw = np.ascontiguousarray(p.data, dtype="<f4").tobytes()
        entries.append({"name": name, "shape": list(p.data.shape), "offset": offset})
        buffers.append(raw)
        offset += len(raw)
    header = json.dumps({"params": entries}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for raw in buffers:
            fh.write(raw)


def load_checkpoint(path, module):
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not blob.startswith(MAGIC):
        raise CheckpointError(f"{path} is not a checkpoint file (bad magic)")
    (hlen,) = struct.unpack_from("<I", blob, len(MAGIC))
    hstart = len(MAGIC) + 4
    try:
        header = json.loads(blob[hstart:hstart + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: malformed header: {exc}") from exc
    payload = blob[hstart + hlen:]

    stored = {e["name"]: e for e in header.get("params", [])}
    target = dict(module.named_parameters())
    unknown = sorted(set(stored) - set(target))
    missing = sorted(set(target) - set(stored))
    if unknown:
        raise CheckpointError(f"{path}: unknown parameter names {unknown}")
    if missing:
        raise CheckpointError(f"{path}: missing parameter names {missing}")

    for name, p in target.items():
        entry = stored[name]
        shape = tuple(entry["shape"])
        if shape != p.data.shape:
            raise CheckpointError(f"{path}: {name} has shape {shape}, expected {p.data.shape}")
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + 4 * count
        if end > len(payload):
            raise CheckpointError(f"{path}: {name} data truncated")
        arr = np.frombuffer(payload[start:end], dtype="<f4").reshape(shape)
        p.data = arr.astype(np.float32).copy()
        p.grad = None
