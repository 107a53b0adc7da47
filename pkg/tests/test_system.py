import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tdsmor import DelaySystem, InitialData, gen_random_stable
from tdsmor.errors import ArgumentError
from tdsmor.system import (InputSignal, error_metrics, fundamental_matrix, lift_to_linear,
                           parse_input, propagate_impulse, simulate, simulate_lifted,
                           spectral_radius)


def test_scalar_recursion_by_hand(scalar_delay):
    # x(0)=1, x(-1)=2, no input: 0.7, 0.45, 0.295 by hand
    init = InitialData.from_history([[1.0], [2.0]])
    y = simulate(scalar_delay, init, np.zeros((3, 1)), 3).outputs[:, 0]
    np.testing.assert_allclose(y, [1.0, 0.7, 0.45, 0.295], rtol=0, atol=1e-15)


def test_scalar_input_response(scalar_delay):
    init = InitialData.zeros(1, 1)
    y = simulate(scalar_delay, init, np.ones((3, 1)), 3).outputs[:, 0]
    # 0, 1, 1.5, 1.85
    np.testing.assert_allclose(y, [0.0, 1.0, 1.5, 1.85], atol=1e-15)


def test_fundamental_matrix_scalar(scalar_delay):
    psi = fundamental_matrix(scalar_delay, 4)[:, 0, 0]
    # Psi(t) = 0.5 Psi(t-1) + 0.1 Psi(t-2), Psi(0)=1, Psi(-1)=0
    np.testing.assert_allclose(psi, [1.0, 0.5, 0.35, 0.225, 0.1475], atol=1e-15)


def test_propagate_impulse_columns(small_system):
    system, _ = small_system
    M = np.random.default_rng(0).standard_normal((system.n, 3))
    full = fundamental_matrix(system, 20)
    np.testing.assert_allclose(propagate_impulse(system, M, 20), full @ M, atol=1e-13)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 12),
       delays=st.sets(st.integers(1, 4), min_size=0, max_size=3))
def test_lifted_equivalence(seed, n, delays):
    system, init = gen_random_stable(n, tuple(sorted(delays)), seed=seed, margin=0.1)
    u = np.random.default_rng(seed).standard_normal((60, 1))
    y = simulate(system, init, u, 60).outputs
    yl = simulate_lifted(lift_to_linear(system, init), u, 60).outputs
    assert np.abs(y - yl).max() <= 1e-12 * max(1.0, np.abs(y).max())


def test_lift_structure():
    system = DelaySystem(A0=np.eye(2), delayed=[(2 * np.eye(2), 2)], B=np.ones((2, 1)),
                         C=np.ones((1, 2)))
    A = lift_to_linear(system).A.toarray()
    assert A.shape == (6, 6)
    np.testing.assert_array_equal(A[:2, 4:], 2 * np.eye(2))
    np.testing.assert_array_equal(A[2:4, :2], np.eye(2))
    np.testing.assert_array_equal(A[4:, 2:4], np.eye(2))


def test_spectral_radius_scalar(scalar_delay):
    # roots of z^2 - 0.5 z - 0.1
    expected = (0.5 + math.sqrt(0.25 + 0.4)) / 2
    assert spectral_radius(scalar_delay) == pytest.approx(expected, rel=1e-12)


def test_system_validation():
    with pytest.raises(ArgumentError):
        DelaySystem(A0=np.eye(2), delayed=[(np.eye(2), 0)], B=np.ones((2, 1)), C=np.ones((1, 2)))
    with pytest.raises(ArgumentError):
        DelaySystem(A0=np.eye(2), delayed=[(np.eye(2), 1), (np.eye(2), 1)],
                    B=np.ones((2, 1)), C=np.ones((1, 2)))
    with pytest.raises(ArgumentError):
        DelaySystem(A0=np.ones((2, 3)), delayed=[], B=np.ones((2, 1)), C=np.ones((1, 2)))
    with pytest.raises(ArgumentError):
        DelaySystem(A0=np.eye(2), delayed=[], B=np.ones((3, 1)), C=np.ones((1, 2)))


def test_delays_sorted():
    system = DelaySystem(A0=np.eye(1), delayed=[([[1.0]], 3), ([[2.0]], 1)], B=[[1.0]], C=[[1.0]])
    assert system.delays == (1, 3)
    assert system.d_max == 3


def test_initial_data_bases():
    vals = np.array([[1.0, 0.0], [0.0, 0.0], [3.0, 4.0]])
    init = InitialData.from_history(vals)
    assert init.d_max == 2
    assert init.basis(-1).shape == (2, 0)
    np.testing.assert_allclose(init.basis(-2)[:, 0], [0.6, 0.8])
    np.testing.assert_allclose(init.phi(-2), [3.0, 4.0])
    with pytest.raises(ArgumentError):
        init.phi(-3)
    with pytest.raises(ArgumentError):
        InitialData(vals, (np.eye(2),) * 3, (np.zeros(2),) * 3)


def test_initial_data_too_short(small_system):
    system, _ = small_system
    with pytest.raises(ArgumentError):
        simulate(system, InitialData.zeros(system.n, 1), np.zeros((5, 2)), 5)


def test_parse_input():
    u = parse_input("ramp-sine 5 0.2")
    t = np.arange(6)
    np.testing.assert_allclose(u.samples(6)[:, 0], 5 * t * np.sin(0.2 * t))
    v = parse_input("exp 0.5; const 2", 2)
    np.testing.assert_allclose(v.samples(3), [[1, 2], [math.exp(-0.5), 2], [math.exp(-1), 2]])
    assert parse_input("zero", 3).samples(4).shape == (4, 3)
    for bad in ["sine 1", "ramp-sine 1", "exp x", ""]:
        with pytest.raises(ArgumentError):
            parse_input(bad)
    with pytest.raises(ArgumentError):
        parse_input("exp 1; exp 2", 3)


def test_parse_input_file(tmp_path):
    path = tmp_path / "u.csv"
    np.savetxt(path, np.arange(10.0).reshape(5, 2), delimiter=",")
    u = parse_input(f"file:{path}", 2)
    assert u.horizon == 5
    with pytest.raises(ArgumentError):
        u.samples(6)
    with pytest.raises(ArgumentError):
        parse_input(f"file:{path}", 1)


def test_samples_input():
    u = InputSignal(samples=[1.0, 2.0, 3.0])
    assert u.m == 1
    np.testing.assert_array_equal(u.samples(2), [[1.0], [2.0]])


def test_error_metrics():
    a = np.array([[3.0], [4.0]])
    b = np.array([[3.0], [0.0]])
    e = error_metrics(a, b)
    assert e.rel_l2 == pytest.approx(4 / 5)
    np.testing.assert_array_equal(e.abs_err, [0.0, 4.0])
    assert e.max_abs == 4.0
    assert error_metrics(np.zeros((2, 1)), np.zeros((2, 1))).rel_l2 == 0.0
    assert error_metrics(np.zeros((2, 1)), np.ones((2, 1))).rel_l2 == math.inf
    with pytest.raises(ArgumentError):
        error_metrics(np.zeros((2, 1)), np.zeros((3, 1)))


def test_identity_projection(small_system):
    system, init = small_system
    I = np.eye(system.n)
    red = system.project(I)
    u = np.random.default_rng(2).standard_normal((30, 2))
    np.testing.assert_allclose(simulate(red, init.project(I), u, 30).outputs,
                               simulate(system, init, u, 30).outputs, atol=1e-13)
