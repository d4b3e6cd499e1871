"""Pixel kernels with a compiled fast path.

Two primitives back every raster comparator:

``count_changed(a, b, tolerance)``
    Number of pixels where any channel differs by more than ``tolerance``.
``luma_sum_milli(a)``
    Sum over pixels of ``299*R + 587*G + 114*B`` as an exact integer, so the
    mean luminance is ``luma_sum_milli(a) / (1000 * npixels)``.

The Cython build (``_ckernels``) is used when importable; otherwise the numpy
versions in :mod:`camscout.kernels.pykernels` are. Set ``CAMSCOUT_KERNELS`` to
``python`` to force the fallback, or ``cython`` to fail loudly if the
extension is missing.
"""

import os

from . import pykernels

_choice = os.environ.get("CAMSCOUT_KERNELS", "auto").lower()

if _choice == "python":
    _impl = pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        if _choice == "cython":
            raise
        _impl = pykernels
        BACKEND = "python"

count_changed = _impl.count_changed
luma_sum_milli = _impl.luma_sum_milli


def available_backends():
    """Return ``{name: module}`` for every kernel implementation importable here."""
    found = {"python": pykernels}
    try:
        from . import _ckernels

        found["cython"] = _ckernels
    except ImportError:
        pass
    return found

__all__ = ["BACKEND", "available_backends", "count_changed", "luma_sum_milli"]
