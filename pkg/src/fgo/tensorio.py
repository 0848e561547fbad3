"""Self-describing tensor container used for checkpoints, datasets and sample dumps.

Layout::

    8 bytes   magic  b"FGOTNSR\\0"
    4 bytes   uint32 little-endian format version
    4 bytes   uint32 little-endian header length H
    H bytes   UTF-8 JSON header: {"version", "layer_count", "meta",
              "tensors": [{"name", "shape", "dtype"}, ...]}
    payloads  each tensor row-major, little-endian float64, in header order
"""
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"FGOTNSR\x00"
FORMAT_VERSION = 1
_DTYPE = "<f8"


class ContainerError(ValueError):
    pass


def save_tensors(path, tensors, meta=None, layer_count=0):
    """Write ``tensors`` (an ordered mapping name -> array) to ``path``."""
    entries = []
    payloads = []
    for name, value in tensors.items():
        arr = np.array(value, dtype=_DTYPE, order="C")
        entries.append({"name": name, "shape": list(arr.shape), "dtype": _DTYPE})
        payloads.append(arr.tobytes(order="C"))
    header = {
        "version": FORMAT_VERSION,
        "layer_count": int(layer_count),
        "meta": meta or {},
        "tensors": entries,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(blob)))
        fh.write(blob)
        for payload in payloads:
            fh.write(payload)
    return path


def load_tensors(path):
    """Return ``(tensors, header)``; ``tensors`` preserves the stored order."""
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ContainerError(f"{path}: not a tensor container")
    if len(data) < 16:
        raise ContainerError(f"{path}: truncated header")
    version, hlen = struct.unpack("<II", data[8:16])
    if version != FORMAT_VERSION:
        raise ContainerError(f"{path}: unsupported container version {version}")
    try:
        header = json.loads(data[16:16 + hlen].decode("utf-8"))
        header["tensors"]
    except (UnicodeDecodeError, ValueError, KeyError, TypeError) as exc:
        raise ContainerError(f"{path}: unreadable header ({exc})") from None
    offset = 16 + hlen
    tensors = {}
    for entry in header["tensors"]:
        if entry["dtype"] != _DTYPE:
            raise ContainerError(f"{path}: unsupported dtype {entry['dtype']}")
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        nbytes = 8 * count
        if offset + nbytes > len(data):
            raise ContainerError(f"{path}: truncated payload for {entry['name']}")
        tensors[entry["name"]] = np.frombuffer(data, dtype=_DTYPE, count=count, offset=offset).reshape(shape).copy()
        offset += nbytes
    if offset != len(data):
        raise ContainerError(f"{path}: {len(data) - offset} trailing bytes")
    return tensors, header
