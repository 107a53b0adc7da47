import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tdsmor.errors import ArgumentError, CapacityError
from tdsmor.walsh import (build_basis, walsh_function, walsh_matrix, walsh_project,
                          walsh_reconstruct)

# shift and summation matrices for N = 4, computed by hand from the sequency-ordered
# Walsh vectors W(0..3) = columns of [[1,1,1,1],[1,1,-1,-1],[1,-1,-1,1],[1,-1,1,-1]]
R4 = np.array([[1, 0, 0, 0], [0, 0, -1, 0], [0, 1, 0, 0], [0, 0, 0, -1]], float)
S4 = np.array([[2.5, -1, 0, -0.5], [1, 0.5, -0.5, 0], [0, 0.5, 0.5, 0], [0.5, 0, 0, 0.5]])


def test_order_four_matrices():
    b = build_basis(2)
    np.testing.assert_array_equal(
        b.walsh_matrix, [[1, 1, 1, 1], [1, 1, -1, -1], [1, -1, -1, 1], [1, -1, 1, -1]])
    np.testing.assert_allclose(b.shift_matrix, R4, atol=1e-15)
    np.testing.assert_allclose(b.summation_matrix, S4, atol=1e-15)


def test_first_function_constant():
    assert all(walsh_function(0, k, 5) == 1 for k in range(32))


@pytest.mark.parametrize("l", range(1, 8))
def test_identities(l):
    b = build_basis(l)
    W = b.walsh_matrix.astype(float)
    N = b.N
    assert np.array_equal(W, W.T)
    assert np.array_equal(W @ W, N * np.eye(N))
    for k in range(N):
        prev = W[:, k - 1] if k else W[:, N - 1]
        assert np.abs(b.shift_matrix @ W[:, k] - prev).max() <= 1e-12
        assert np.abs(b.summation_matrix @ W[:, k] - W[:, :k + 1].sum(axis=1)).max() <= 1e-10


def test_shift_power_wraps():
    b = build_basis(3)
    np.testing.assert_allclose(b.shift_power(b.N), np.eye(b.N), atol=1e-12)
    np.testing.assert_allclose(b.shift_power(-1), b.shift_power(b.N - 1), atol=1e-12)


def test_matrix_matches_pointwise():
    l = 4
    W = walsh_matrix(l)
    assert all(W[i, k] == walsh_function(i, k, l) for i in range(16) for k in range(16))


@pytest.mark.parametrize("bad", [0, -1, 2.5])
def test_bad_order(bad):
    with pytest.raises(ArgumentError):
        build_basis(bad)


def test_order_cap():
    with pytest.raises(CapacityError):
        build_basis(15)


def test_index_out_of_range():
    with pytest.raises(ArgumentError):
        walsh_function(4, 0, 2)
    with pytest.raises(ArgumentError):
        build_basis(2).vector(4)


@settings(max_examples=40, deadline=None)
@given(l=st.integers(1, 6), q=st.integers(1, 3), seed=st.integers(0, 2**32 - 1))
def test_project_reconstruct_roundtrip(l, q, seed):
    b = build_basis(l)
    z = np.random.default_rng(seed).standard_normal((b.N, q))
    Z = walsh_project(z, b)
    back = np.stack([walsh_reconstruct(Z, k, b) for k in range(b.N)])
    np.testing.assert_allclose(back, z, atol=1e-12)


def test_constant_sequence_projects_to_first_coefficient():
    b = build_basis(3)
    Z = walsh_project(np.full((8, 1), 2.0), b)
    np.testing.assert_allclose(Z, [[2.0] + [0.0] * 7], atol=1e-15)
