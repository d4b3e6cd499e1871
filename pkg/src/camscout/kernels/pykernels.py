"""Numpy implementations of the pixel kernels, used when the compiled
extension is unavailable."""

import numpy as np

_LUMA_WEIGHTS = np.array([299, 587, 114], dtype=np.int64)


def count_changed(a: np.ndarray, b: np.ndarray, tolerance: int) -> int:
    diff = np.abs(a.astype(np.int16) - b.astype(np.int16))
    return int(np.count_nonzero((diff > tolerance).any(axis=2)))


def luma_sum_milli(a: np.ndarray) -> int:
    return int((a.astype(np.int64) @ _LUMA_WEIGHTS).sum())
