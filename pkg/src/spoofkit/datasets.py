"""IDX dataset ingestion (plain or gzipped) and the labeled-dataset container."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np

from .errors import FormatError

_IDX_UBYTE = 0x08


def load_idx(path) -> np.ndarray:
    """Read an IDX tensor of unsigned bytes; .gz payloads are transparent."""
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    if len(raw) < 4:
        raise FormatError(f"{path}: truncated IDX header")
    zero0, zero1, dtype, ndim = struct.unpack(">BBBB", raw[:4])
    if zero0 != 0 or zero1 != 0:
        raise FormatError(f"{path}: bad IDX magic {raw[:4]!r}")
    if dtype != _IDX_UBYTE:
        raise FormatError(f"{path}: unsupported IDX dtype 0x{dtype:02x}")
    header_end = 4 + 4 * ndim
    if len(raw) < header_end:
        raise FormatError(f"{path}: truncated IDX dimensions")
    dims = struct.unpack(f">{ndim}I", raw[4:header_end])
    count = int(np.prod(dims, dtype=np.int64))
    body = raw[header_end:]
    if len(body) != count:
        raise FormatError(f"{path}: expected {count} bytes of data, found {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).reshape(dims).copy()


def save_idx(path, array: np.ndarray) -> None:
    arr = np.ascontiguousarray(array, dtype=np.uint8)
    header = struct.pack(">BBBB", 0, 0, _IDX_UBYTE, arr.ndim)
    header += struct.pack(f">{arr.ndim}I", *arr.shape)
    payload = header + arr.tobytes()
    if str(path).endswith(".gz"):
        payload = gzip.compress(payload, mtime=0)
    Path(path).write_bytes(payload)


@dataclass
class LabeledDataset:
    images: np.ndarray  # (N, C, H, W) float32 in [0, 1]
    labels: np.ndarray  # (N,) integer class indices
    split: str = "train"

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4:
            raise ValueError(f"images must be (N,C,H,W), got shape {self.images.shape}")
        if self.labels.shape != (self.images.shape[0],):
            raise ValueError(
                f"labels shape {self.labels.shape} does not match {self.images.shape[0]} images"
            )

    def __len__(self) -> int:
        return self.images.shape[0]


def _to_float_images(pixels: np.ndarray) -> np.ndarray:
    # same double-rounding path as PNG decoding, so k/255 values match bit-exactly
    return (pixels.astype(np.float64) / 255.0).astype(np.float32)


def _find(directory: Path, stem: str) -> Path:
    for candidate in (directory / stem, directory / (stem + ".gz")):
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"{stem}[.gz] not found in {directory}")


def load_mnist_dir(directory) -> Tuple[LabeledDataset, LabeledDataset]:
    """Load the four standard IDX files; images come back as (N,1,28,28) in [0,1]."""
    directory = Path(directory)
    out = []
    for split, img_stem, lbl_stem in (
        ("train", "train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
        ("test", "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
    ):
        try:
            img_path = _find(directory, img_stem)
        except FileNotFoundError:
            if split != "test":
                raise
            img_path = _find(directory, "test-images-idx3-ubyte")
            lbl_stem = "test-labels-idx1-ubyte"
        images = load_idx(img_path)
        labels = load_idx(_find(directory, lbl_stem))
        if images.ndim != 3:
            raise FormatError(f"{img_path}: expected 3-d image tensor, got {images.ndim}-d")
        out.append(LabeledDataset(_to_float_images(images)[:, None, :, :], labels, split))
    return out[0], out[1]
