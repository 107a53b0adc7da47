"""Model reduction of delay systems from a Walsh expansion of the state.

The Walsh coefficient matrix ``X`` (``x(i+1) ~ X W(i)``) solves

    X S - A0 X (R S - I) - sum_l A_l X G_l = A0 Q_0 + sum_l A_l sum_{j=-d_l}^0 Q_j + B U S

with ``G_l = R^(d_l+1) S - sum_{i=0}^{d_l} R^(N+d_l-i)`` and ``Q_j`` the
matrix holding ``phi(j)`` in its first column.  The projection basis spans
the columns of ``X`` together with the initial history.
"""

from dataclasses import dataclass, field
import logging
import time

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ArgumentError, CapacityError, NumericalError
from .system import (DelaySystem, InitialData, InputSignal, ReducedSystem,
                     as_operator, lift_to_linear, simulate)
from .walsh import build_basis, walsh_project

log = logging.getLogger(__name__)

DENSE_SOLVE_LIMIT = 20_000
LIFTED_MEMORY_CAP = 4000


@dataclass(frozen=True, eq=False)
class WalshMorProblem:
    """Data of the Walsh coefficient equation.

    ``Q[k]`` is the ``n x N`` matrix with ``phi(-k)`` in column 0.
    """

    system: DelaySystem
    init: InitialData
    basis: object
    U: np.ndarray
    Q: tuple = field(repr=False)

    @classmethod
    def build(cls, system, init, u, N=None, basis=None):
        if basis is None:
            if N is None or N < 2 or N & (N - 1):
                raise ArgumentError(f"N must be a power of two >= 2, got {N!r}")
            basis = build_basis(N.bit_length() - 1)
        init.check(system)
        if basis.N <= system.d_max:
            raise ArgumentError(f"N={basis.N} must exceed the largest delay {system.d_max}")
        U = input_walsh_coefficients(u, basis, system.m)
        Q = []
        for k in range(init.d_max + 1):
            q = np.zeros((system.n, basis.N))
            q[:, 0] = init.phi(-k)
            Q.append(q)
        return cls(system, init, basis, U, tuple(Q))

    def history_sum(self, d):
        """``sum_{j=-d}^{0} phi(j)``."""
        return self.init.values[:d + 1].sum(axis=0)


def input_walsh_coefficients(u, basis, m=None):
    """Walsh coefficients ``U`` (``m x N``) of ``u(0..N-1)``."""
    samples = u.samples(basis.N) if isinstance(u, InputSignal) else np.asarray(u, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    samples = samples[:basis.N]
    if m is not None and samples.shape[1] != m:
        raise ArgumentError(f"input has {samples.shape[1]} channels, expected {m}")
    return walsh_project(samples, basis)


def _coefficient_matrices(basis, delays, reduce_powers=True):
    """Right factors ``RS - I`` and ``G_l`` of the matrix equation."""
    R, S, N = basis.shift_matrix, basis.summation_matrix, basis.N
    power = basis.shift_power if reduce_powers else (
        lambda p: np.linalg.matrix_power(R, p))
    M0 = R @ S - np.eye(N)
    G = []
    for d in delays:
        g = power(d + 1) @ S
        for i in range(d + 1):
            g = g - power(N + d - i)
        G.append(g)
    return M0, G


def _rhs(problem):
    sysm, basis = problem.system, problem.basis
    rhs = sysm.B @ problem.U @ basis.summation_matrix
    col = sysm.A0 @ problem.init.phi(0)
    for A, d in sysm.delayed:
        col = col + A @ problem.history_sum(d)
    rhs[:, 0] += col
    return rhs


def _apply(problem, X, M0, G):
    """Left-hand side of the matrix equation for a given ``X``."""
    sysm = problem.system
    out = X @ problem.basis.summation_matrix - sysm.A0 @ (X @ M0)
    for (A, _), g in zip(sysm.delayed, G):
        out = out - A @ (X @ g)
    return out


def _vec_operator(problem, M0, G, sparse):
    sysm, N = problem.system, problem.basis.N
    S = problem.basis.summation_matrix
    if sparse:
        ops = [as_operator(sysm.A0, density=1.0)] + [as_operator(A, density=1.0) for A, _ in sysm.delayed]
        ops = [sp.csr_matrix(o) for o in ops]
        K = sp.kron(sp.csr_matrix(S.T), sp.identity(sysm.n), format="csc")
        K = K - sp.kron(sp.csr_matrix(M0.T), ops[0], format="csc")
        for op, g in zip(ops[1:], G):
            K = K - sp.kron(sp.csr_matrix(g.T), op, format="csc")
        return K.tocsc()
    K = np.kron(S.T, np.eye(sysm.n)) - np.kron(M0.T, sysm.A0)
    for (A, _), g in zip(sysm.delayed, G):
        K -= np.kron(g.T, A)
    return K


def _is_sparse_system(system, density=0.05):
    mats = [system.A0] + [A for A, _ in system.delayed]
    total = sum(a.size for a in mats)
    return system.n >= 50 and sum(np.count_nonzero(a) for a in mats) < density * total


@dataclass(frozen=True, eq=False)
class WalshSolution:
    X: np.ndarray
    residual: float
    bound: float
    solver: str
    condition: float = None


def solve_walsh_coefficients(problem, solver="auto", reduce_powers=True, rtol=1e-8):
    """Solve the Walsh coefficient equation for ``X`` (``n x N``).

    Parameters
    ----------
    problem : WalshMorProblem
    solver : {"auto", "dense", "sparse", "gmres"}
        ``auto`` picks a sparse LU when the coefficient matrices are sparse,
        a dense LU when ``n N <= 20000`` and GMRES otherwise.
    reduce_powers : bool
        Use ``R^(N+k) = R^k``; False forms the literal powers.
    rtol : float
        Residual contract: ``|res|_F <= rtol (|X|_F |S|_F + |rhs|_F)``.

    Returns
    -------
    WalshSolution
    """
    sysm, basis = problem.system, problem.basis
    n, N = sysm.n, basis.N
    M0, G = _coefficient_matrices(basis, sysm.delays, reduce_powers)
    rhs = _rhs(problem)
    b = rhs.ravel(order="F")
    if solver == "auto":
        if _is_sparse_system(sysm):
            solver = "sparse"
        elif n * N <= DENSE_SOLVE_LIMIT:
            solver = "dense"
        else:
            solver = "gmres"
    cond = None
    if solver == "dense":
        K = _vec_operator(problem, M0, G, sparse=False)
        anorm = np.linalg.norm(K, 1)
        lu, piv, info = sla.lapack.dgetrf(K)
        if info > 0:
            raise NumericalError("Walsh operator is singular", condition=np.inf)
        rcond, _ = sla.lapack.dgecon(lu, anorm, norm="1")
        cond = 1.0 / rcond if rcond > 0 else np.inf
        if rcond < np.finfo(float).eps:
            raise NumericalError(
                f"Walsh operator is numerically singular (condition ~ {cond:.3e})",
                condition=cond)
        x, info = sla.lapack.dgetrs(lu, piv, b)
    elif solver == "sparse":
        K = _vec_operator(problem, M0, G, sparse=True)
        try:
            x = spla.splu(K).solve(b)
        except RuntimeError as exc:
            raise NumericalError(f"sparse factorization failed: {exc}", condition=np.inf)
    elif solver == "gmres":
        def mv(v):
            return _apply(problem, v.reshape((n, N), order="F"), M0, G).ravel(order="F")
        op = spla.LinearOperator((n * N, n * N), matvec=mv)
        x, info = spla.gmres(op, b, rtol=rtol * 1e-2, atol=0.0, restart=200, maxiter=50)
        if info != 0:
            raise NumericalError("GMRES did not converge on the Walsh equation", info=info)
    else:
        raise ArgumentError(f"unknown solver {solver!r}")
    X = np.asarray(x).reshape((n, N), order="F")
    res = np.linalg.norm(_apply(problem, X, M0, G) - rhs)
    bound = rtol * (np.linalg.norm(X) * np.linalg.norm(basis.summation_matrix) + np.linalg.norm(rhs))
    if not res <= bound:
        raise NumericalError(
            f"Walsh equation residual {res:.3e} exceeds the contract {bound:.3e}",
            residual=res, bound=bound, condition=cond)
    return WalshSolution(X=X, residual=float(res), bound=float(bound), solver=solver,
                         condition=cond)


def _fix_signs_first_nonzero(V):
    for j in range(V.shape[1]):
        col = V[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12 * np.abs(col).max())
        if nz.size and col[nz[0]] < 0:
            V[:, j] = -col
    return V


def build_projection(X, init, tol=1e-10):
    """Orthonormal basis of ``span{X, phi(0), ..., phi(-d)}``.

    The rank is the number of singular values above ``tol`` times the
    largest one.
    """
    M = np.hstack([np.asarray(X, dtype=float), init.values.T])
    if not np.any(M):
        return np.zeros((M.shape[0], 0))
    U, sv, _ = np.linalg.svd(M, full_matrices=False)
    r = int(np.sum(sv > tol * sv[0]))
    return _fix_signs_first_nonzero(U[:, :r].copy())


def reduce_walsh(system, init, u, N, tol=1e-10, solver="auto"):
    """Walsh-expansion reduction (one-sided, ``W = V``).

    Returns
    -------
    ReducedSystem
        Method tag ``walsh``; ``params`` records ``N``, ``tol``, the
        residual, solver and timings.
    """
    t0 = time.perf_counter()
    problem = WalshMorProblem.build(system, init, u, N)
    sol = solve_walsh_coefficients(problem, solver=solver)
    t1 = time.perf_counter()
    V = build_projection(sol.X, init, tol)
    t2 = time.perf_counter()
    red_sys = system.project(V)
    red_init = init.project(V)
    t3 = time.perf_counter()
    params = {
        "N": int(N), "tol": tol, "r": int(V.shape[1]),
        "residual": sol.residual, "residual_bound": sol.bound,
        "solver": sol.solver, "condition": sol.condition,
        "input": getattr(u, "description", "samples"),
        "timings": {"solve": t1 - t0, "orthonormalize": t2 - t1, "project": t3 - t2},
    }
    return ReducedSystem(system=red_sys, init=red_init, V=V, W=V, method="walsh", params=params)


def output_walsh_coefficients(system, init, X, basis):
    """Output coefficients ``Y`` from ``Y S = C Q_0 + C X R S - C X``."""
    S, R = basis.summation_matrix, basis.shift_matrix
    rhs = system.C @ X @ (R @ S - np.eye(basis.N))
    rhs[:, 0] += system.C @ init.phi(0)
    return np.linalg.solve(S.T, rhs.T).T


def verify_coefficient_matching(system, init, reduced, u, N, solver="auto"):
    """Largest deviation between the first ``N`` output Walsh coefficients
    of the full and reduced models, ``max_i |Y[:, i] - Yhat[:, i]|_inf``.
    """
    basis = build_basis(N.bit_length() - 1)
    full = solve_walsh_coefficients(WalshMorProblem.build(system, init, u, basis=basis), solver)
    red = solve_walsh_coefficients(
        WalshMorProblem.build(reduced.system, reduced.init, u, basis=basis), "dense")
    Y = output_walsh_coefficients(system, init, full.X, basis)
    Yh = output_walsh_coefficients(reduced.system, reduced.init, red.X, basis)
    return float(np.max(np.abs(Y - Yh))) if Y.size else 0.0


def simulated_coefficient_deviation(system, init, reduced, u, N):
    """Deviation of Walsh coefficients of the *simulated* outputs over
    ``t = 0..N-1`` (diagnostic; not matched by construction)."""
    basis = build_basis(N.bit_length() - 1)
    y = simulate(system, init, u, N).outputs[:N]
    yh = simulate(reduced.system, reduced.init, u, N).outputs[:N]
    return float(np.max(np.abs(walsh_project(y, basis) - walsh_project(yh, basis))))


def reduce_lifted_walsh(system, init, u, N, tol=1e-10, memory_cap=LIFTED_MEMORY_CAP,
                        solver="auto"):
    """Walsh reduction of the lifted delay-free system, mapped back.

    The lifted basis ``Vhat`` is split into blocks ``V_0..V_D`` and

        A0r = V_0' A0 V_0,  A_lr = V_0' A_l V_{d_l},  Br = V_0' B,
        Cr = C V_0,         xr(j) = V_{-j}' phi(j).

    Raises
    ------
    CapacityError
        When the lifted dimension ``n (d_max + 1)`` exceeds ``memory_cap``.
    """
    D, n = system.d_max, system.n
    big = n * (D + 1)
    if big > memory_cap:
        raise CapacityError(
            f"lifted system has dimension {big} = {n} x {D + 1}, above the memory cap "
            f"{memory_cap}; the lifted comparator cannot be built")
    t0 = time.perf_counter()
    lifted = lift_to_linear(system, init)
    lsys = lifted.as_delay_system(dense=True)
    linit = lifted.initial_data()
    problem = WalshMorProblem.build(lsys, linit, u, N)
    sol = solve_walsh_coefficients(problem, solver=solver)
    Vh = build_projection(sol.X, linit, tol)
    t1 = time.perf_counter()
    blocks = [Vh[k * n:(k + 1) * n] for k in range(D + 1)]
    V0 = blocks[0]
    red = DelaySystem(
        A0=V0.T @ system.A0 @ V0,
        delayed=[(V0.T @ A @ blocks[d], d) for A, d in system.delayed],
        B=V0.T @ system.B,
        C=system.C @ V0,
    )
    hist = np.stack([blocks[k].T @ init.phi(-k) for k in range(D + 1)])
    params = {
        "N": int(N), "tol": tol, "r": int(Vh.shape[1]), "lifted_dimension": big,
        "residual": sol.residual, "solver": sol.solver,
        "input": getattr(u, "description", "samples"),
        "timings": {"reduce": t1 - t0},
    }
    return ReducedSystem(system=red, init=InitialData.from_history(hist), V=Vh, W=Vh,
                         method="lifted-walsh", params=params)
