"""Checkpoint I/O: a JSON manifest plus one little-endian float32 blob.

``save_checkpoint(base, tensors, metadata)`` writes ``<base>.manifest.json``
and ``<base>.blob``.  Values are stored as float32, so a round trip is
bit-exact for float32-representable values.
"""

from __future__ import annotations

import json
import os

import numpy as np

MANIFEST_SUFFIX = ".manifest.json"
BLOB_SUFFIX = ".blob"


def save_checkpoint(base_path, tensors: dict[str, np.ndarray], metadata: dict | None = None) -> None:
    base_path = os.fspath(base_path)
    entries = []
    offset = 0
    chunks = []
    for name in sorted(tensors):
        array = np.ascontiguousarray(tensors[name], dtype="<f4")
        entries.append(
            {"name": name, "shape": list(array.shape), "offset": offset, "size": array.size}
        )
        chunks.append(array.tobytes())
        offset += array.size
    manifest = {
        "format": 1,
        "metadata": metadata or {},
        "tensors": entries,
        "total_size": offset,
    }
    with open(base_path + MANIFEST_SUFFIX, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    with open(base_path + BLOB_SUFFIX, "wb") as fh:
        fh.write(b"".join(chunks))


def load_checkpoint(base_path) -> tuple[dict[str, np.ndarray], dict]:
    """Load tensors (float64 arrays holding float32 values) and metadata.

    Raises ValueError when manifest and blob disagree.
    """
    base_path = os.fspath(base_path)
    manifest_path = base_path + MANIFEST_SUFFIX
    blob_path = base_path + BLOB_SUFFIX
    if not os.path.exists(manifest_path) or not os.path.exists(blob_path):
        raise FileNotFoundError(f"missing checkpoint pair at {base_path}")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    raw = np.fromfile(blob_path, dtype="<f4")
    expected = int(manifest.get("total_size", -1))
    if raw.size != expected:
        raise ValueError(
            f"blob holds {raw.size} floats but manifest expects {expected}"
        )
    tensors: dict[str, np.ndarray] = {}
    for entry in manifest["tensors"]:
        start = int(entry["offset"])
        stop = start + int(entry["size"])
        if stop > raw.size:
            raise ValueError(f"tensor {entry['name']!r} overruns the blob")
        tensors[entry["name"]] = (
            raw[start:stop].astype(np.float64).reshape(entry["shape"])
        )
    return tensors, manifest.get("metadata", {})


def delete_checkpoint(base_path) -> None:
    base_path = os.fspath(base_path)
    for suffix in (MANIFEST_SUFFIX, BLOB_SUFFIX):
        path = base_path + suffix
        if os.path.exists(path):
            os.remove(path)
