"""
Dense matrix helpers shared by every module.

A matrix here is a 2-D float64 numpy array. The helpers validate shapes and
finiteness so that the layers above can report bad input clearly instead of
failing deep inside a numpy broadcast.
"""

import numpy as np


class ShapeError(ValueError):
    """Raised when matrix dimensions do not agree."""


def as_matrix(data, name="matrix"):
    """Convert data to a 2-D float64 array.

    Args:
        data: Nested sequence or array; a 1-D input becomes a single row
        name: Label used in error messages

    Returns:
        numpy.ndarray: 2-D float64 array
    """
    m = np.asarray(data, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {m.shape}")
    return m


def check_finite(m, name="matrix"):
    """Raise ValueError if any entry of m is NaN or infinite."""
    if not np.all(np.isfinite(m)):
        bad = np.argwhere(~np.isfinite(np.asarray(m)))[0]
        raise ValueError(f"{name} has a non-finite entry at index {tuple(int(i) for i in bad)}")
    return m


def mat_mul(a, b):
    """Matrix product of an r x s and an s x t matrix."""
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"Cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}")
    return a @ b


def row_argmax(m):
    """Index of the largest entry in each row; ties go to the lowest index.

    A matrix with zero rows yields an empty vector. A matrix without columns
    has no maximum and is rejected.
    """
    m = as_matrix(m)
    if m.shape[1] < 1:
        raise ShapeError("row_argmax needs at least one column")
    # np.argmax returns the first occurrence of the maximum
    return np.argmax(m, axis=1).astype(np.int64)


def map_elementwise(m, f):
    """Return a fresh matrix with f applied to every entry."""
    m = as_matrix(m)
    if isinstance(f, np.ufunc):
        return f(m)
    return np.vectorize(f, otypes=[np.float64])(m) if m.size else m.copy()


def relu(m):
    return np.maximum(m, 0.0)
