"""Image tensors for fooling attacks.

An image is a float32 numpy array of shape (channels, height, width) with
every value in [0, 1]. Arrays handed out by this module are marked
read-only; anything that "modifies" an image returns a fresh array.
"""

from __future__ import annotations

import enum
import io
from typing import NamedTuple

import numpy as np
from PIL import Image as PilImage, UnidentifiedImageError

from .errors import FormatError

DIFF_TOLERANCE = 1e-9


class InitMode(enum.Enum):
    """Canvas initialization for attacks that synthesize from scratch."""

    BLACK = "black"
    WHITE = "white"
    UNIFORM_RANDOM = "uniform"

    @classmethod
    def from_string(cls, name: str) -> "InitMode":
        for mode in cls:
            if mode.value == name:
                return mode
        raise ValueError(f"unknown init mode {name!r}; expected one of "
                         f"{[m.value for m in cls]}")


class PixelProposal(NamedTuple):
    """A single-element write: image[channel, row, col] = value."""

    row: int
    col: int
    channel: int
    value: float


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def as_image(data: np.ndarray) -> np.ndarray:
    """Validate and normalize an array into the image contract (float32, read-only)."""
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim != 3:
        raise ValueError(f"image must be (channels, height, width), got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("image values must lie in [0, 1]")
    if arr is data and arr.flags.writeable:
        arr = arr.copy()
    return _freeze(arr)


def new_canvas(channels: int, height: int, width: int, mode: InitMode,
               rng_seed=None) -> np.ndarray:
    """Create an initial canvas. UNIFORM_RANDOM draws i.i.d. from the seeded generator."""
    if channels < 1 or height < 1 or width < 1:
        raise ValueError(f"canvas dimensions must be >= 1, got "
                         f"({channels}, {height}, {width})")
    shape = (channels, height, width)
    if mode is InitMode.BLACK:
        arr = np.zeros(shape, dtype=np.float32)
    elif mode is InitMode.WHITE:
        arr = np.ones(shape, dtype=np.float32)
    elif mode is InitMode.UNIFORM_RANDOM:
        rng = np.random.default_rng(rng_seed)
        arr = rng.random(shape, dtype=np.float32)
    else:
        raise ValueError(f"unknown init mode {mode!r}")
    return _freeze(arr)


def apply_proposal(img: np.ndarray, p: PixelProposal) -> np.ndarray:
    """Return a copy of img with element (channel, row, col) set to value."""
    c, h, w = img.shape
    if not (0 <= p.row < h and 0 <= p.col < w and 0 <= p.channel < c):
        raise IndexError(f"proposal {p} out of bounds for image shape {img.shape}")
    if not 0.0 <= p.value <= 1.0:
        raise ValueError(f"proposal value {p.value} outside [0, 1]")
    out = img.copy()
    out[p.channel, p.row, p.col] = p.value
    return _freeze(out)


def changed_location_ratio(a: np.ndarray, b: np.ndarray,
                           tol: float = DIFF_TOLERANCE) -> float:
    """Fraction of spatial locations (h, w) where any channel differs by more than tol.

    For an attack started from a black canvas this is the fraction of
    locations carrying non-zero pixels in the final image.
    """
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    differs = np.abs(a.astype(np.float64) - b.astype(np.float64)) > tol
    changed = np.any(differs, axis=0)
    return float(changed.sum()) / changed.size


def quantize(img: np.ndarray) -> np.ndarray:
    """Project values onto the 8-bit grid: round(v * 255) / 255 (ties to even)."""
    return _freeze((np.rint(img.astype(np.float64) * 255.0) / 255.0).astype(np.float32))


def encode_png(img: np.ndarray) -> bytes:
    """Encode as an 8-bit grayscale (C=1) or RGB (C=3) PNG."""
    c = img.shape[0]
    if c not in (1, 3):
        raise ValueError(f"PNG export supports 1 or 3 channels, got {c}")
    byte = np.rint(img.astype(np.float64) * 255.0).astype(np.uint8)
    if c == 1:
        pil = PilImage.fromarray(byte[0], mode="L")
    else:
        pil = PilImage.fromarray(np.moveaxis(byte, 0, 2), mode="RGB")
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    """Decode an 8-bit grayscale or RGB PNG into an image array."""
    try:
        pil = PilImage.open(io.BytesIO(data))
        pil.load()
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise FormatError(f"malformed PNG: {exc}") from exc
    if pil.format != "PNG":
        raise FormatError(f"not a PNG file (format {pil.format!r})")
    if pil.mode == "L":
        arr = np.asarray(pil, dtype=np.float64)[None, :, :]
    elif pil.mode == "RGB":
        arr = np.moveaxis(np.asarray(pil, dtype=np.float64), 2, 0)
    else:
        raise FormatError(f"unsupported PNG mode {pil.mode!r}; "
                          "only 8-bit grayscale and RGB are accepted")
    # float64 division then float32 cast: the same arithmetic path as quantize(),
    # so decode(encode(x)) == quantize(x) holds bit-exactly.
    return _freeze((arr / 255.0).astype(np.float32))


def save_png(img: np.ndarray, path) -> None:
    with open(path, "wb") as f:
        f.write(encode_png(img))


def load_png(path) -> np.ndarray:
    with open(path, "rb") as f:
        return decode_png(f.read())
