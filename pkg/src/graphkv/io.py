"""GKT1 tensor files and JSON workload manifests.

Layout (all little-endian)::

    offset  size        field
    0       4           magic  b"GKT1"
    4       4           version  u32 = 1
    8       4           ndim     u32
    12      8 * ndim    dims     u64 each
    ...     4 * prod    payload  f32, row-major
"""
from __future__ import annotations

import json
import os
import struct
from pathlib import Path
from typing import Optional

import numpy as np

from .kv_model import LayerCache

MAGIC = b"GKT1"
VERSION = 1
MAX_ELEMENTS = 1 << 40
_HEADER = struct.Struct("<4sII")


class TensorFormatError(IOError):
    pass


class BadMagicError(TensorFormatError):
    pass


class VersionMismatchError(TensorFormatError):
    pass


class TruncatedPayloadError(TensorFormatError):
    pass


def tensor_bytes(array) -> bytes:
    a = np.asarray(array, dtype=np.float32)
    header = _HEADER.pack(MAGIC, VERSION, a.ndim) + struct.pack(f"<{a.ndim}Q", *a.shape)
    return header + np.ascontiguousarray(a, dtype="<f4").tobytes()


def write_tensor(path, array) -> None:
    Path(path).write_bytes(tensor_bytes(array))


def parse_tensor(buf: bytes) -> np.ndarray:
    if len(buf) < _HEADER.size:
        raise TruncatedPayloadError(f"header needs {_HEADER.size} bytes, file has {len(buf)}")
    magic, version, ndim = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if version != VERSION:
        raise VersionMismatchError(f"unsupported version {version}")
    dims_end = _HEADER.size + 8 * ndim
    if len(buf) < dims_end:
        raise TruncatedPayloadError("file ends inside the dimension list")
    dims = struct.unpack_from(f"<{ndim}Q", buf, _HEADER.size)
    count = 1
    for dim in dims:
        count *= dim
        if count > MAX_ELEMENTS:
            raise TensorFormatError(f"declared shape {dims} exceeds {MAX_ELEMENTS} elements")
    expected = dims_end + 4 * count
    if len(buf) < expected:
        raise TruncatedPayloadError(f"payload needs {expected} bytes, file has {len(buf)}")
    if len(buf) > expected:
        raise TensorFormatError(f"{len(buf) - expected} trailing bytes after payload")
    payload = np.frombuffer(buf, dtype="<f4", count=count, offset=dims_end)
    return payload.astype(np.float32).reshape(dims)


def read_tensor(path) -> np.ndarray:
    return parse_tensor(Path(path).read_bytes())


def write_scores(path, scores) -> None:
    write_tensor(path, np.asarray(scores, dtype=np.float32).reshape(1, -1))


def read_scores(path) -> np.ndarray:
    return read_tensor(path).reshape(-1).astype(np.float64)


def dump_json(path, obj) -> None:
    # sorted keys and a trailing newline keep outputs byte-stable
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_manifest(
    directory,
    cache: LayerCache,
    labels=None,
    spec: Optional[dict] = None,
    name: str = "manifest.json",
) -> Path:
    """Write keys/values/queries tensors plus a manifest referencing them by relative path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_tensor(directory / "keys.gkt", cache.keys)
    write_tensor(directory / "values.gkt", cache.values)
    queries = None
    if cache.queries is not None:
        write_tensor(directory / "queries.gkt", cache.queries)
        queries = "queries.gkt"
    manifest = {
        "keys": "keys.gkt",
        "values": "values.gkt",
        "queries": queries,
        "labels": None if labels is None else [int(x) for x in labels],
        "spec": spec,
    }
    path = directory / name
    dump_json(path, manifest)
    return path


MANIFEST_KEYS = {"keys", "values", "queries", "labels", "spec"}


def read_manifest(path) -> tuple[LayerCache, Optional[np.ndarray], Optional[dict]]:
    """Load a manifest; tensor paths resolve relative to the manifest's directory."""
    path = Path(path)
    raw = json.loads(path.read_text())
    if not isinstance(raw, dict) or not {"keys", "values"} <= raw.keys():
        raise ValueError(f"{path}: manifest must be an object with 'keys' and 'values'")
    unknown = raw.keys() - MANIFEST_KEYS
    if unknown:
        raise ValueError(f"{path}: unknown manifest keys {sorted(unknown)}")
    base = path.parent

    def load(rel):
        return read_tensor(base / os.fspath(rel))

    queries = load(raw["queries"]) if raw.get("queries") else None
    cache = LayerCache(load(raw["keys"]), load(raw["values"]), queries)
    labels = raw.get("labels")
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape[0] != cache.n:
            raise ValueError(f"{path}: {labels.shape[0]} labels for {cache.n} tokens")
    return cache, labels, raw.get("spec")
