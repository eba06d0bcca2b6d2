"""Weight-file serialization: "SPWT" header+blob container for float32 tensors."""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Dict, Mapping

import numpy as np

from .errors import FormatError

MAGIC = b"SPWT"
_HEADER_LEN = struct.Struct("<Q")


def pack_weights(weights: Mapping[str, np.ndarray]) -> bytes:
    """Serialize tensors into the container format.

    Tensors are laid out in sorted-name order so identical inputs always
    produce identical bytes. Values are cast to little-endian float32.
    """
    header: Dict[str, dict] = {}
    chunks = []
    offset = 0
    for name in sorted(weights):
        # asarray keeps 0-d shapes; ascontiguousarray would promote them to (1,)
        arr = np.asarray(weights[name], dtype="<f4", order="C")
        raw = arr.tobytes()
        header[name] = {
            "dtype": "f32",
            "shape": list(arr.shape),
            "offset": offset,
            "nbytes": len(raw),
        }
        chunks.append(raw)
        offset += len(raw)
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + _HEADER_LEN.pack(len(header_bytes)) + header_bytes + b"".join(chunks)


def unpack_weights(payload: bytes) -> Dict[str, np.ndarray]:
    """Parse container bytes back into a name → float32 array mapping."""
    if payload[:4] != MAGIC:
        raise FormatError("bad magic: expected b'SPWT'")
    if len(payload) < 12:
        raise FormatError("truncated file: missing header length")
    (header_len,) = _HEADER_LEN.unpack(payload[4:12])
    blob_start = 12 + header_len
    if len(payload) < blob_start:
        raise FormatError("truncated file: header shorter than declared")
    try:
        header = json.loads(payload[12:blob_start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable header: {exc}") from exc
    if not isinstance(header, dict):
        raise FormatError("header must be a JSON object")

    blob = payload[blob_start:]
    out: Dict[str, np.ndarray] = {}
    spans = []
    for name in sorted(header):
        entry = header[name]
        if not isinstance(entry, dict):
            raise FormatError(f"tensor {name!r}: entry must be an object")
        missing = {"dtype", "shape", "offset", "nbytes"} - set(entry)
        if missing:
            raise FormatError(f"tensor {name!r}: missing fields {sorted(missing)}")
        if entry["dtype"] != "f32":
            raise FormatError(f"tensor {name!r}: unsupported dtype {entry['dtype']!r}")
        shape = entry["shape"]
        if not isinstance(shape, list) or any(not isinstance(d, int) or d < 0 for d in shape):
            raise FormatError(f"tensor {name!r}: bad shape {shape!r}")
        offset, nbytes = entry["offset"], entry["nbytes"]
        if not isinstance(offset, int) or not isinstance(nbytes, int) or offset < 0 or nbytes < 0:
            raise FormatError(f"tensor {name!r}: bad offset/nbytes")
        expected = int(np.prod(shape, dtype=np.int64)) * 4
        if nbytes != expected:
            raise FormatError(
                f"tensor {name!r}: nbytes {nbytes} inconsistent with shape {shape} (want {expected})"
            )
        if offset + nbytes > len(blob):
            raise FormatError(f"tensor {name!r}: truncated data")
        spans.append((offset, offset + nbytes, name))
        out[name] = np.frombuffer(blob, dtype="<f4", count=expected // 4, offset=offset).reshape(shape).copy()

    spans.sort()
    for (_, prev_end, prev_name), (start, _, name) in zip(spans, spans[1:]):
        if start < prev_end:
            raise FormatError(f"tensor {name!r}: data overlaps tensor {prev_name!r}")
    return out


def save_weights(weights: Mapping[str, np.ndarray], path) -> None:
    Path(path).write_bytes(pack_weights(weights))


def load_weights(path) -> Dict[str, np.ndarray]:
    return unpack_weights(Path(path).read_bytes())
