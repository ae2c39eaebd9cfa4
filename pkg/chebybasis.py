"""
Chebyshev polynomials of the first kind.

This module evaluates the basis T_0..T_k by the three-term recurrence,
differentiates it through the second-kind recurrence, and provides the
roots and range helpers the adaptive layers rely on. Every function accepts
scalars or numpy arrays and works in double precision.
"""

import numpy as np


def cheb_eval_all(k, x):
    """Evaluate [T_0(x), ..., T_k(x)].

    Args:
        k: Maximum order (>= 0)
        x: Scalar or array of evaluation points

    Returns:
        numpy.ndarray: Shape (k + 1,) + shape(x); row j holds T_j(x)
    """
    if k < 0:
        raise ValueError(f"Chebyshev order must be >= 0, got {k}")

    x = np.asarray(x, dtype=np.float64)
    values = np.empty((k + 1,) + x.shape, dtype=np.float64)
    values[0] = 1.0
    if k >= 1:
        values[1] = x
    for j in range(2, k + 1):
        values[j] = 2.0 * x * values[j - 1] - values[j - 2]
    return values


def _second_kind_all(k, x):
    # U_0..U_k, only used to build derivatives
    values = np.empty((k + 1,) + x.shape, dtype=np.float64)
    values[0] = 1.0
    if k >= 1:
        values[1] = 2.0 * x
    for j in range(2, k + 1):
        values[j] = 2.0 * x * values[j - 1] - values[j - 2]
    return values


def cheb_deriv_all(k, x):
    """Evaluate [T_0'(x), ..., T_k'(x)] using T_j' = j * U_{j-1}.

    Args:
        k: Maximum order (>= 0)
        x: Scalar or array of evaluation points

    Returns:
        numpy.ndarray: Shape (k + 1,) + shape(x)
    """
    if k < 0:
        raise ValueError(f"Chebyshev order must be >= 0, got {k}")

    x = np.asarray(x, dtype=np.float64)
    derivs = np.zeros((k + 1,) + x.shape, dtype=np.float64)
    if k >= 1:
        u = _second_kind_all(k - 1, x)
        for j in range(1, k + 1):
            derivs[j] = j * u[j - 1]
    return derivs


def cheb_expand(x, k):
    """Basis expansion with the order axis last: out[..., j] = T_j(x)."""
    return np.moveaxis(cheb_eval_all(k, x), 0, -1)


def cheb_deriv_expand(x, k):
    """Derivative expansion with the order axis last: out[..., j] = T_j'(x)."""
    return np.moveaxis(cheb_deriv_all(k, x), 0, -1)


def cheb_roots(j):
    """Return the j roots of T_j, cos((2m - 1) pi / (2j)) for m = 1..j."""
    if j < 1:
        raise ValueError(f"T_{j} has no roots; order must be >= 1")
    m = np.arange(1, j + 1, dtype=np.float64)
    return np.cos((2.0 * m - 1.0) * np.pi / (2.0 * j))


def affine_to_unit(x, lo, hi):
    """Map [lo, hi] onto [-1, 1] by 2(x - lo)/(hi - lo) - 1."""
    if not hi > lo:
        raise ValueError(f"Degenerate range: hi ({hi}) must exceed lo ({lo})")
    return 2.0 * (np.asarray(x, dtype=np.float64) - lo) / (hi - lo) - 1.0


def squash(x):
    """Smooth range control for hidden inputs: tanh, strictly inside (-1, 1)."""
    return np.tanh(x)


def squash_deriv(x):
    s = np.tanh(x)
    return 1.0 - s * s
