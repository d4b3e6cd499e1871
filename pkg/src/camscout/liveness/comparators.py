"""The three image comparators: checksum, percent of pixels changed, and
mean-luminance delta.

A raster is a ``uint8`` numpy array of shape ``(height, width, 3)`` holding
RGB pixels in row-major order.
"""

from __future__ import annotations

import hashlib
import io

import numpy as np
from PIL import Image

from .. import kernels


class DimensionMismatch(ValueError):
    pass


def as_raster(pixels, width: int | None = None, height: int | None = None) -> np.ndarray:
    """Coerce ``pixels`` into a C-contiguous ``(h, w, 3)`` uint8 raster.

    Accepts an existing array, or a flat sequence of ``(r, g, b)`` triples
    together with ``width`` and ``height``.
    """
    arr = np.asarray(pixels)
    if width is not None and height is not None:
        if arr.size != width * height * 3:
            raise ValueError(f"expected {width * height} pixels, got {arr.size // 3}")
        arr = arr.reshape(height, width, 3)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"raster must have shape (h, w, 3), got {arr.shape}")
    if arr.dtype != np.uint8:
        if arr.min() < 0 or arr.max() > 255:
            raise ValueError("channel values must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    return np.ascontiguousarray(arr)


def decode_raster(body: bytes) -> np.ndarray | None:
    """Decode image bytes to an RGB raster, or None if undecodable."""
    try:
        with Image.open(io.BytesIO(body)) as img:
            return np.ascontiguousarray(np.asarray(img.convert("RGB"), dtype=np.uint8))
    except Exception:  # noqa: BLE001 - any decoder failure means "no raster"
        return None


def digest(body: bytes) -> str:
    return hashlib.sha256(body).hexdigest()


def checksum_compare(a: bytes, b: bytes) -> bool:
    """True iff the two bodies have the same SHA-256 digest."""
    return hashlib.sha256(a).digest() == hashlib.sha256(b).digest()


def _pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a, b = as_raster(a), as_raster(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape[1]}x{a.shape[0]} vs {b.shape[1]}x{b.shape[0]}")
    return a, b


def percent_diff(a: np.ndarray, b: np.ndarray, channel_tolerance: int) -> float:
    """Fraction of pixels where some channel differs by more than the tolerance."""
    if not 0 <= channel_tolerance <= 255:
        raise ValueError("channel_tolerance must be in [0, 255]")
    a, b = _pair(a, b)
    changed = kernels.count_changed(a, b, int(channel_tolerance))
    return changed / (a.shape[0] * a.shape[1])


def mean_luminance(a: np.ndarray) -> float:
    """Mean of 0.299 R + 0.587 G + 0.114 B over all pixels."""
    a = as_raster(a)
    return kernels.luma_sum_milli(a) / (1000 * a.shape[0] * a.shape[1])


def luminance_diff(a: np.ndarray, b: np.ndarray) -> float:
    a, b = _pair(a, b)
    return abs(mean_luminance(a) - mean_luminance(b))
