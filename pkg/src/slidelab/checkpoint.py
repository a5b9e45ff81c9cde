"""Named-array checkpoints: a JSON manifest plus a float32 binary payload.

The manifest lists each array as {name, shape, offset} (byte offsets into
the payload, arrays packed in sorted-name order, C layout, little-endian
float32) together with free-form metadata.  The payload sits next to the
manifest with the same stem and a ``.bin`` suffix.  Loading and re-saving
a checkpoint reproduces both files byte for byte.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import CheckpointError

FORMAT = "slidelab-arrays-v1"
DTYPE = np.dtype("<f4")


def payload_path(manifest_path) -> Path:
    return Path(manifest_path).with_suffix(".bin")


def save_arrays(path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    path = Path(path)
    entries = []
    chunks = []
    offset = 0
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype=DTYPE)
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(arr.tobytes())
        offset += arr.nbytes
    manifest = {
        "format": FORMAT,
        "dtype": "<f4",
        "payload": payload_path(path).name,
        "arrays": entries,
        "meta": meta or {},
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(payload_path(path), "wb") as fh:
        fh.write(b"".join(chunks))


def load_arrays(path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"no manifest at {path}")
    with open(path) as fh:
        manifest = json.load(fh)
    if manifest.get("format") != FORMAT:
        raise CheckpointError(f"unknown checkpoint format {manifest.get('format')!r}")
    payload = path.parent / manifest["payload"]
    if not payload.exists():
        raise CheckpointError(f"missing payload {payload}")
    raw = payload.read_bytes()
    arrays = {}
    for entry in manifest["arrays"]:
        shape = tuple(entry["shape"])
        nbytes = int(np.prod(shape, dtype=np.int64)) * DTYPE.itemsize
        start = entry["offset"]
        if start + nbytes > len(raw):
            raise CheckpointError(f"payload truncated at array {entry['name']!r}")
        arr = np.frombuffer(raw[start:start + nbytes], dtype=DTYPE).reshape(shape)
        arrays[entry["name"]] = arr.copy()
    return arrays, manifest.get("meta", {})


def load_into(params: dict[str, np.ndarray], arrays: dict[str, np.ndarray]) -> None:
    """Copy loaded arrays into existing parameter storage, in place."""
    missing = sorted(set(params) - set(arrays))
    if missing:
        raise CheckpointError(f"checkpoint lacks arrays: {missing[:4]}")
    for k, dst in params.items():
        src = arrays[k]
        if src.shape != dst.shape:
            raise CheckpointError(f"array {k!r}: checkpoint shape {src.shape} != expected {dst.shape}")
        dst[...] = src.astype(dst.dtype)


def content_hash(path) -> str:
    path = Path(path)
    h = hashlib.sha256()
    h.update(path.read_bytes())
    h.update(payload_path(path).read_bytes())
    return h.hexdigest()
