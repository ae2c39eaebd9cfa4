import numpy as np
import pytest

from chebybasis import squash
from numcore import ShapeError, as_matrix, check_finite, map_elementwise, mat_mul, relu, row_argmax


def test_mat_mul():
    assert mat_mul([[1, 2], [3, 4]], [[1], [1]]).tolist() == [[3.0], [7.0]]
    assert not mat_mul(np.zeros((2, 2)), [[1, 2], [3, 4]]).any()


def test_mat_mul_dimension_mismatch():
    with pytest.raises(ShapeError):
        mat_mul(np.ones((2, 3)), np.ones((2, 3)))


def test_row_argmax():
    assert row_argmax([[0.1, 0.9]]).tolist() == [1]
    assert row_argmax([[0.5, 0.5]]).tolist() == [0]
    assert row_argmax([[3, 1, 2], [-1, -2, -3]]).tolist() == [0, 0]


def test_row_argmax_edges():
    assert row_argmax(np.zeros((0, 3))).size == 0
    with pytest.raises(ShapeError):
        row_argmax(np.zeros((2, 0)))


def test_map_elementwise():
    assert map_elementwise([[-1, 2]], lambda v: max(v, 0.0)).tolist() == [[0.0, 2.0]]
    m = np.array([[1.5, -2.0]])
    assert np.array_equal(map_elementwise(m, lambda v: v), m)
    assert map_elementwise([[0.0]], squash).tolist() == [[0.0]]


def test_relu():
    assert relu(np.array([[-1.0, 2.0]])).tolist() == [[0.0, 2.0]]


def test_as_matrix_and_finite_checks():
    assert as_matrix([1, 2, 3]).shape == (1, 3)
    with pytest.raises(ShapeError):
        as_matrix(np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        check_finite(np.array([[1.0, np.nan]]))


def test_mat_mul_is_associative():
    rng = np.random.default_rng(0)
    for _ in range(20):
        A, B, C = (rng.normal(size=(4, 4)) for _ in range(3))
        left = mat_mul(mat_mul(A, B), C)
        right = mat_mul(A, mat_mul(B, C))
        assert np.max(np.abs(left - right)) <= 1e-10


def test_row_argmax_ignores_row_offsets():
    rng = np.random.default_rng(1)
    m = rng.normal(size=(25, 6))
    offsets = rng.uniform(-100.0, 100.0, size=(25, 1))
    assert row_argmax(m + offsets).tolist() == row_argmax(m).tolist()
