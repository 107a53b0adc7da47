import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tdsmor.errors import ArgumentError
from tdsmor.laguerre import (LaguerreBasis, build_shift_matrix, inverse_shift_powers,
                             laguerre_closed, laguerre_eval, laguerre_recurrence,
                             laguerre_table, laguerre_vector)

# L_i(k) at s = 0.81 from the binomial sum evaluated in exact rational arithmetic
EXACT = {(0, 0): 0.4358898943540673, (1, 0): -0.3923009049186606,
         (1, 3): -0.08473699546243069, (3, 5): 0.1870583297665735,
         (5, 7): -0.042152933593718564, (10, 50): 0.07356774941578398}


@pytest.mark.parametrize("ik", sorted(EXACT))
def test_frozen_values(ik):
    i, k = ik
    assert laguerre_eval(i, k, 0.81) == pytest.approx(EXACT[ik], abs=1e-13)
    assert laguerre_closed(i, k, 0.81) == pytest.approx(EXACT[ik], abs=1e-13)


@pytest.mark.parametrize("s", [0.5, 0.81])
def test_recurrence_matches_closed_form(s):
    R = laguerre_recurrence(11, s, np.arange(51))
    ref = np.array([[laguerre_closed(i, k, s) for k in range(51)] for i in range(11)])
    assert np.abs(R - ref).max() <= 1e-9


@pytest.mark.parametrize("s", [0.0625, 0.3, 0.81, 0.99])
def test_table_matches_closed_form(s):
    L = laguerre_table(21, s, np.arange(0, 61, 6))
    ref = np.array([[laguerre_closed(i, k, s) for k in range(0, 61, 6)] for i in range(21)])
    assert np.abs(L - ref).max() <= 1e-10


def test_recurrence_loses_accuracy_for_small_discount():
    # the reason tables are built from the shift relation instead
    s = 0.3
    gap = np.abs(laguerre_recurrence(80, s, np.arange(300)) - laguerre_table(80, s, np.arange(300)))
    assert gap.max() > 1.0


def test_table_unsorted_times():
    t = [7, 0, 3, 3]
    L = laguerre_table(5, 0.6, t)
    for col, k in enumerate(t):
        np.testing.assert_allclose(L[:, col], [laguerre_closed(i, k, 0.6) for i in range(5)],
                                   atol=1e-14)


def test_small_vector_example():
    v = laguerre_vector(0, LaguerreBasis(2, 0.25))
    np.testing.assert_allclose(v, [np.sqrt(0.75), laguerre_closed(1, 0, 0.25)], atol=1e-15)


@pytest.mark.parametrize("s", [0.3, 0.81, 0.95])
def test_orthonormal(s):
    L = laguerre_table(12, s, np.arange(2000))
    np.testing.assert_allclose(L @ L.T, np.eye(12), atol=1e-10)


def test_shift_matrix_structure():
    T = build_shift_matrix(5, 0.81)
    assert np.allclose(np.triu(T, 1), 0)
    assert np.allclose(np.diag(T), 0.9)
    assert T[1, 0] == pytest.approx(0.19)
    assert T[2, 0] == pytest.approx(0.19 * -0.9)


@settings(max_examples=30, deadline=None)
@given(K=st.integers(2, 25), s=st.floats(0.05, 0.95), k=st.integers(0, 60),
       d=st.integers(1, 5))
def test_shift_property(K, s, k, d):
    basis = LaguerreBasis(K, s)
    T = basis.shift_matrix_T
    lhs = laguerre_vector(k + d, basis)
    rhs = np.linalg.matrix_power(T, d) @ laguerre_vector(k, basis)
    assert np.abs(lhs - rhs).max() <= 1e-8
    Tinv = inverse_shift_powers(T, d)
    back = Tinv @ lhs
    # T**-d grows like o**-d, so compare relative to its norm
    assert np.abs(back - laguerre_vector(k, basis)).max() <= 1e-8 * np.linalg.norm(Tinv, 2)


@pytest.mark.parametrize("s", [0.0, 1.0, -0.2, 1.5])
def test_bad_discount(s):
    with pytest.raises(ArgumentError):
        LaguerreBasis(4, s)


def test_non_integer_time():
    with pytest.raises(ArgumentError):
        laguerre_table(3, 0.5, [1.5])


def test_negative_index():
    with pytest.raises(ArgumentError):
        laguerre_eval(-1, 0, 0.5)
    with pytest.raises(ArgumentError):
        laguerre_vector(-1, LaguerreBasis(3, 0.5))
