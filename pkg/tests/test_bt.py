import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tdsmor import DelaySystem, InitialData, gen_random_stable
from tdsmor.bt import (decompose, gramian_oracle, laguerre_apply, laguerre_coefficients,
                       lowrank_factors, reduce_combbt, reduce_dominant, reduce_grambt)
from tdsmor.errors import ArgumentError, DomainError
from tdsmor.laguerre import laguerre_table
from tdsmor.system import fundamental_matrix, simulate

# sum_t Psi(t)^2 for x(t+1) = 0.5 x(t) + 0.1 x(t-1): AR(2) variance 225/154
P_SCALAR_DELAY = 1.4610389610389611


@pytest.fixture
def euler_system():
    return gen_random_stable(10, (1, 3), seed=2, margin=0.05, style="euler")


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), delays=st.sets(st.integers(1, 4), min_size=1, max_size=3))
def test_superposition(seed, delays):
    system, init = gen_random_stable(8, tuple(sorted(delays)), seed=seed, m=2)
    u = np.random.default_rng(seed).standard_normal((80, 2))
    y = simulate(system, init, u, 80).outputs
    parts = decompose(system, init)
    assert len(parts.parts()) == 2 + system.d_max
    total = parts.outputs(u, 80).sum(axis=0)
    assert np.linalg.norm(total - y) <= 1e-11 * np.linalg.norm(y)


def test_gramian_scalar_no_delay():
    system = DelaySystem(A0=[[0.5]], delayed=[], B=[[1.0]], C=[[1.0]])
    assert gramian_oracle(system, "P_zero")[0, 0] == pytest.approx(4 / 3, rel=1e-12)


def test_gramian_scalar_delay(scalar_delay):
    assert gramian_oracle(scalar_delay, "P_zero")[0, 0] == pytest.approx(P_SCALAR_DELAY, rel=1e-12)
    assert gramian_oracle(scalar_delay, "Q")[0, 0] == pytest.approx(P_SCALAR_DELAY, rel=1e-12)


def test_gramian_zero_output_matrix():
    system, _ = gen_random_stable(5, (1,), seed=1)
    system = system.replace(C=np.zeros((1, 5)))
    assert not np.any(gramian_oracle(system, "Q"))


def test_gramian_properties(small_system):
    system, init = small_system
    Pz = gramian_oracle(system, "P_zero")
    Px = gramian_oracle(system, "P_x0", init)
    Pn = gramian_oracle(system, "P_neg", init)
    Pc = gramian_oracle(system, "P_combined", init)
    np.testing.assert_allclose(Pz + Px + Pn, Pc, atol=1e-10 * np.abs(Pc).max())
    for P in (Pz, Px, Pn, Pc):
        np.testing.assert_allclose(P, P.T, atol=1e-12 * np.abs(P).max())
        assert np.linalg.eigvalsh(P).min() >= -1e-10 * np.abs(P).max()
    Pd = sum(gramian_oracle(system, "P_neg", init, j=j, delay=d)
             for d in system.delays for j in range(-d, 0))
    np.testing.assert_allclose(Pd, Pn, atol=1e-10 * np.abs(Pn).max())


def test_gramian_short_horizon_warns(small_system):
    system, _ = small_system
    with pytest.warns(RuntimeWarning):
        gramian_oracle(system, "P_zero", horizon=2)


def test_gramian_unstable():
    system = DelaySystem(A0=[[1.1]], delayed=[], B=[[1.0]], C=[[1.0]])
    with pytest.raises(DomainError):
        gramian_oracle(system, "P_zero")


def test_gramian_bad_kind(small_system):
    with pytest.raises(ArgumentError):
        gramian_oracle(small_system[0], "R")


def test_causal_coefficients_are_projections(scalar_delay):
    # F_i = sum_t Psi(t) L_i(t), checked against a long direct sum
    K, s = 10, 0.81
    lag = laguerre_coefficients(scalar_delay, K, s)
    t = np.arange(600)
    psi = fundamental_matrix(scalar_delay, 599)[:, 0, 0]
    direct = laguerre_table(K, s, t) @ psi
    np.testing.assert_allclose(lag.F[:, 0, 0], direct, atol=1e-13)


def test_causal_reconstruction_converges(euler_system):
    system, _ = euler_system
    psi = fundamental_matrix(system, 50)

    def err(K):
        rec = laguerre_coefficients(system, K, 0.81).reconstruct(np.arange(51))
        return np.abs(rec - psi).max()

    assert err(40) <= err(20)


def test_apply_matches_full_coefficients(small_system):
    system, _ = small_system
    M = np.random.default_rng(0).standard_normal((system.n, 2))
    lag = laguerre_coefficients(system, 12, 0.81)
    FM, _ = laguerre_apply(system, M, 12, 0.81)
    np.testing.assert_allclose(FM, lag.F @ M, atol=1e-12)


def test_normalized_scheme_identity(small_system):
    system, _ = small_system
    K, s = 15, 0.81
    lag = laguerre_coefficients(system, K, s, scheme="normalized")
    L0 = laguerre_table(K, s, [0])[:, 0]
    S = np.einsum("ikl,i->kl", lag.F, L0)
    np.testing.assert_allclose(S, np.eye(system.n), atol=1e-10)
    assert lag.residual <= 1e-10


def test_unknown_scheme(small_system):
    with pytest.raises(ArgumentError):
        laguerre_coefficients(small_system[0], 5, 0.81, scheme="other")


def test_factor_columns(small_system):
    system, init = small_system
    K = 7
    f = lowrank_factors(system, init, K)
    n_neg = sum(init.basis(j).shape[1] for d in system.delays for j in range(-d, 0))
    expected = K * (system.m + init.basis(0).shape[1] + n_neg)
    assert f.X_in.shape == (system.n, expected)
    assert f.Y_out.shape == (system.n, K * system.p)
    assert f.blocks["zero"] == slice(0, K * system.m)
    g = lowrank_factors(system, None, K, include_initial=False)
    np.testing.assert_allclose(g.X_in, f.X_in[:, f.blocks["zero"]])
    with pytest.raises(ArgumentError):
        lowrank_factors(system, None, K)


def test_factors_match_oracle(euler_system):
    system, init = euler_system
    f = lowrank_factors(system, init, 40, 0.81)
    P = gramian_oracle(system, "P_combined", init)
    Q = gramian_oracle(system, "Q")
    assert np.linalg.norm(f.X_in @ f.X_in.T - P) <= 1e-3 * np.linalg.norm(P)
    assert np.linalg.norm(f.Y_out @ f.Y_out.T - Q) <= 1e-3 * np.linalg.norm(Q)


def test_combbt_algebra(small_system):
    system, init = small_system
    a = reduce_combbt(system, init, 5)
    b = reduce_combbt(system, init, 5)
    np.testing.assert_allclose(a.W.T @ a.V, np.eye(5), atol=1e-8)
    sv = np.asarray(a.params["singular_values"])
    assert np.all(np.diff(sv) <= 0)
    np.testing.assert_array_equal(a.V, b.V)
    np.testing.assert_array_equal(a.W, b.W)
    assert a.method == "combbt"
    assert a.projection_error(system) <= 1e-12
    for j in range(-system.d_max, 1):
        np.testing.assert_allclose(a.init.phi(j), a.W.T @ init.phi(j))


def test_zero_history_combbt_equals_grambt(small_system):
    system, _ = small_system
    zero = InitialData.zeros(system.n, system.d_max)
    a = reduce_combbt(system, zero, 4)
    b = reduce_grambt(system, 4)
    np.testing.assert_allclose(a.V, b.V, atol=1e-12)
    np.testing.assert_allclose(a.W, b.W, atol=1e-12)


def test_grambt_carries_history(small_system):
    system, init = small_system
    red = reduce_grambt(system, 4, init=init)
    assert red.init.d_max == system.d_max
    np.testing.assert_allclose(red.init.phi(0), red.W.T @ init.phi(0))


def test_order_above_rank():
    system, init = gen_random_stable(4, (1,), seed=0)
    with pytest.raises(ArgumentError, match="numerical rank"):
        reduce_combbt(system, init, 5)
    with pytest.raises(ArgumentError):
        reduce_grambt(system, 0)


def test_dominant(small_system):
    system, init = small_system
    red = reduce_dominant(system, init, 6)
    np.testing.assert_allclose(red.V.T @ red.V, np.eye(6), atol=1e-12)
    np.testing.assert_array_equal(red.V, red.W)
    assert red.projection_error(system) <= 1e-12


def test_full_order_is_exact(small_system):
    # at full rank the oblique projector is the identity on the state space
    system, init = small_system
    red = reduce_combbt(system, init, system.n)
    P = red.V @ red.W.T
    np.testing.assert_allclose(P, np.eye(system.n), atol=1e-8)
    u = np.random.default_rng(1).standard_normal((40, 2))
    y = simulate(system, init, u, 40).outputs
    yr = simulate(red.system, red.init, u, 40).outputs
    assert np.linalg.norm(y - yr) <= 1e-8 * np.linalg.norm(y)


def test_oblique_projector(small_system):
    system, init = small_system
    red = reduce_combbt(system, init, 4)
    P = red.V @ red.W.T
    np.testing.assert_allclose(P @ P, P, atol=1e-8 * np.abs(P).max())


def test_warning_free_defaults(small_system):
    system, init = small_system
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        reduce_combbt(system, init, 3)
