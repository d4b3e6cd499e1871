"""Compiled per-pixel kernels for raster comparison.

Inputs are C-contiguous ``uint8`` arrays of shape ``(height, width, 3)``;
shape agreement is checked by the caller.
"""


def count_changed(const unsigned char[:, :, ::1] a,
                  const unsigned char[:, :, ::1] b,
                  int tolerance):
    cdef Py_ssize_t h = a.shape[0]
    cdef Py_ssize_t w = a.shape[1]
    cdef Py_ssize_t c = a.shape[2]
    cdef Py_ssize_t i, j, k
    cdef long long changed = 0
    cdef int d
    with nogil:
        for i in range(h):
            for j in range(w):
                for k in range(c):
                    d = <int>a[i, j, k] - <int>b[i, j, k]
                    if d > tolerance or -d > tolerance:
                        changed += 1
                        break
    return changed


def luma_sum_milli(const unsigned char[:, :, ::1] a):
    cdef Py_ssize_t h = a.shape[0]
    cdef Py_ssize_t w = a.shape[1]
    cdef Py_ssize_t i, j
    cdef long long total = 0
    with nogil:
        for i in range(h):
            for j in range(w):
                total += 299 * a[i, j, 0] + 587 * a[i, j, 1] + 114 * a[i, j, 2]
    return total
