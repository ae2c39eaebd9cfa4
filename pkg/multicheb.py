"""
Multivariate Chebyshev series.

fit_tensor samples a function on the tensor grid of Chebyshev nodes and
obtains every coefficient of the tensor-product series by direct cosine
summation along each axis. The result is exact for polynomials whose degree
in each variable is within the fitted order.

fit_pairwise approximates a d-variate function by a sum of bivariate series,
one per variable pair, fitted by least squares on the node grid. The
constant term and each single-variable term T_m(x_v) belong to the first
pair (in the given order) containing v; every other pair leaves those
coefficients at zero, which keeps the system full rank.
"""

import itertools
import logging

import numpy as np

from chebybasis import cheb_eval_all

logger = logging.getLogger(__name__)

MAX_DIMS = 4
MAX_ORDER = 16


class SingularSystemError(ValueError):
    """Raised when the pairwise least-squares system is rank deficient."""


def cheb_nodes(M):
    """Nodes cos((2k+1)pi / (2(M+1))) for k = 0..M, the roots of T_{M+1}."""
    if M < 0:
        raise ValueError(f"Node order must be >= 0, got {M}")
    k = np.arange(M + 1)
    return np.cos((2 * k + 1) * np.pi / (2 * (M + 1)))


def cosine_sum_matrix(M):
    """A[m, k] = (lambda_m / (M+1)) cos(m (2k+1) pi / (2(M+1))), lambda_0 = 1, else 2.

    Applied to samples at cheb_nodes(M) it returns the series coefficients.
    """
    m = np.arange(M + 1)[:, None]
    k = np.arange(M + 1)[None, :]
    weights = np.where(m == 0, 1.0, 2.0) / (M + 1)
    return weights * np.cos(m * (2 * k + 1) * np.pi / (2 * (M + 1)))


class TensorCoeffs:
    """Coefficients c[m_1, ..., m_d] of a tensor-product Chebyshev series."""

    def __init__(self, coeffs):
        self.coeffs = np.asarray(coeffs, dtype=np.float64)
        if self.coeffs.ndim == 0:
            raise ValueError("Tensor coefficients need at least one dimension")

    @classmethod
    def zeros(cls, orders):
        return cls(np.zeros(tuple(int(M) + 1 for M in orders)))

    @property
    def dims(self):
        return self.coeffs.ndim

    @property
    def orders(self):
        return [n - 1 for n in self.coeffs.shape]

    def flat(self):
        """Coefficients in lexicographic (m_1, ..., m_d) order."""
        return self.coeffs.reshape(-1)

    def to_dict(self):
        return {"dims": self.dims, "orders": self.orders, "coeffs": self.flat().tolist()}

    @classmethod
    def from_dict(cls, doc):
        orders = [int(M) for M in doc["orders"]]
        values = np.asarray(doc["coeffs"], dtype=np.float64)
        expected = int(np.prod([M + 1 for M in orders]))
        if values.size != expected:
            raise ValueError(f"Orders {orders} need {expected} coefficients, got {values.size}")
        return cls(values.reshape([M + 1 for M in orders]))


def _check_orders(orders, max_order=MAX_ORDER):
    orders = [int(M) for M in orders]
    if not 1 <= len(orders) <= MAX_DIMS:
        raise ValueError(f"Between 1 and {MAX_DIMS} dimensions are supported, got {len(orders)}")
    for M in orders:
        if not 0 <= M <= max_order:
            raise ValueError(f"Orders must lie in [0, {max_order}], got {M}")
    return orders


def node_grid(orders):
    """All node-grid points as an (N, d) array in lexicographic order."""
    axes = [cheb_nodes(M) for M in orders]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in mesh], axis=1)


def _sample(f, points):
    values = np.asarray(f(points), dtype=np.float64)
    if values.shape != (points.shape[0],):
        raise ValueError(f"Sampler must return one value per point, got shape {values.shape} for {points.shape[0]} points")
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values))[0])
        raise ValueError(f"Sampler returned {values[bad]} at {points[bad].tolist()}")
    return values


def fit_tensor(f, orders):
    """Fit a tensor-product Chebyshev series by cosine summation on the node grid.

    Args:
        f: Callable taking an (N, d) array of points in [-1, 1]^d and
            returning N values
        orders: Per-dimension maximum order [M_1, ..., M_d]

    Returns:
        TensorCoeffs: Coefficient tensor of shape (M_1+1, ..., M_d+1)
    """
    orders = _check_orders(orders)
    points = node_grid(orders)
    coeffs = _sample(f, points).reshape([M + 1 for M in orders])
    for axis, M in enumerate(orders):
        coeffs = np.moveaxis(np.tensordot(cosine_sum_matrix(M), coeffs, axes=([1], [axis])), 0, axis)
    return TensorCoeffs(coeffs)


def eval_tensor(coeffs, point):
    """Evaluate sum c[m] prod_i T_{m_i}(x_i) at one point (d,) or a batch (N, d)."""
    pts = np.asarray(point, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.ndim != 2 or pts.shape[1] != coeffs.dims:
        raise ValueError(f"Series has {coeffs.dims} dimensions, point has shape {np.shape(point)}")

    # contract one axis at a time, keeping the point axis in front
    acc = np.broadcast_to(coeffs.coeffs, (pts.shape[0],) + coeffs.coeffs.shape)
    for axis, M in enumerate(coeffs.orders):
        basis = cheb_eval_all(M, pts[:, axis])  # (M+1, N)
        acc = np.einsum("nm...,mn->n...", acc, basis)
    return float(acc[0]) if single else acc


class PairwiseModel:
    """Sum of bivariate series, one per variable pair (a, b) with a < b."""

    def __init__(self, dims, terms):
        self.dims = int(dims)
        self.terms = [(int(a), int(b), tc) for a, b, tc in terms]
        seen = set()
        for a, b, tc in self.terms:
            if not 0 <= a < b < self.dims:
                raise ValueError(f"Pair ({a}, {b}) must satisfy 0 <= a < b < {self.dims}")
            if (a, b) in seen:
                raise ValueError(f"Duplicate pair ({a}, {b})")
            if tc.dims != 2:
                raise ValueError(f"Pair ({a}, {b}) needs bivariate coefficients")
            seen.add((a, b))

    @property
    def pairs(self):
        return [(a, b) for a, b, _ in self.terms]

    def to_dict(self):
        return {
            "dims": self.dims,
            "pairs": [{"a": a, "b": b, **tc.to_dict()} for a, b, tc in self.terms],
        }


def _normalise_pairs(d, pairs):
    if pairs is None:
        return list(itertools.combinations(range(d), 2))
    out = []
    for a, b in pairs:
        a, b = int(a), int(b)
        if a == b:
            raise ValueError(f"Pair ({a}, {b}) repeats a variable")
        a, b = min(a, b), max(a, b)
        if b >= d or a < 0:
            raise ValueError(f"Pair ({a}, {b}) out of range for {d} variables")
        if (a, b) in out:
            raise ValueError(f"Duplicate pair ({a}, {b})")
        out.append((a, b))
    if not out:
        raise ValueError("At least one variable pair is required")
    return out


def _pair_columns(pairs, order):
    """(pair position, m, n) for every free coefficient under the gauge rule."""
    columns = []
    owner = {}
    for p, (a, b) in enumerate(pairs):
        owner.setdefault(a, p)
        owner.setdefault(b, p)
    for p, (a, b) in enumerate(pairs):
        for m in range(order + 1):
            for n in range(order + 1):
                if m == 0 and n == 0 and p != 0:
                    continue
                if n == 0 and m > 0 and owner[a] != p:
                    continue
                if m == 0 and n > 0 and owner[b] != p:
                    continue
                columns.append((p, m, n))
    return columns


def fit_pairwise(f, d, order, pairs=None, sample_order=None):
    """Least-squares fit of a sum of bivariate Chebyshev series.

    Args:
        f: Callable taking an (N, d) array of points and returning N values
        d: Number of variables
        order: Maximum order per variable within each pair
        pairs: Variable pairs; all pairs if None
        sample_order: Node order of the sampling grid (default order + 1)

    Returns:
        PairwiseModel: The fitted model
    """
    if d < 2:
        raise ValueError(f"Pairwise models need d >= 2, got {d}")
    order = _check_orders([order])[0]
    pairs = _normalise_pairs(d, pairs)
    sample_order = order + 1 if sample_order is None else int(sample_order)
    # the default grid is one order finer than the fit, so it may exceed MAX_ORDER by one
    grid_orders = _check_orders([sample_order] * d, max_order=MAX_ORDER + 1)

    points = node_grid(grid_orders)
    values = _sample(f, points)
    basis = [cheb_eval_all(order, points[:, v]) for v in range(d)]

    columns = _pair_columns(pairs, order)
    A = np.column_stack([basis[pairs[p][0]][m] * basis[pairs[p][1]][n] for p, m, n in columns])
    solution, _, rank, _ = np.linalg.lstsq(A, values, rcond=None)
    if rank < A.shape[1]:
        raise SingularSystemError(
            f"Pairwise system has rank {rank} for {A.shape[1]} coefficients; sample on a finer grid"
        )

    tensors = [np.zeros((order + 1, order + 1)) for _ in pairs]
    for (p, m, n), value in zip(columns, solution):
        tensors[p][m, n] = value
    logger.debug(f"Pairwise fit over {len(pairs)} pairs, {A.shape[1]} coefficients, {A.shape[0]} samples")
    return PairwiseModel(d, [(a, b, TensorCoeffs(t)) for (a, b), t in zip(pairs, tensors)])


def eval_pairwise(model, point):
    """Sum of the bivariate series at the point's pair coordinates."""
    pts = np.asarray(point, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.ndim != 2 or pts.shape[1] != model.dims:
        raise ValueError(f"Model has {model.dims} variables, point has shape {np.shape(point)}")
    total = np.zeros(pts.shape[0])
    for a, b, tc in model.terms:
        total += eval_tensor(tc, pts[:, [a, b]])
    return float(total[0]) if single else total
