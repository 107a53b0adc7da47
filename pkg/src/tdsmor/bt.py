"""Balanced truncation for delay systems with non-zero initial history.

The response splits into a forced part with zero history, a part driven by
``x(0)`` and one part per past value ``x(j)``, ``j < 0``.  Their
controllability Gramians add up to a combined Gramian whose low-rank factor
is built from the Laguerre coefficients ``F_i`` of the fundamental matrix.

Laguerre coefficients
---------------------
Two schemes are available:

``causal`` (default)
    Uses ``Psi(t) = delta(t) I + A0 Psi(t-1) + sum_l A_l Psi(t-1-d_l)`` with
    zero prehistory.  Delaying a sequence by ``q`` steps multiplies its
    Laguerre coefficient vector by the lower-triangular ``T**q``, so the
    coefficients satisfy the block lower-triangular system

        (I - o A0 - sum_l o**(d_l+1) A_l) F_j
            = L_j(0) I + sum_{i<j} (T[j,i] A0 + sum_l (T**(d_l+1))[j,i] A_l) F_i

    and are the exact Laguerre spectrum of ``Psi``.
``normalized``
    The block system with first block row ``L_j(0) I`` and blocks
    ``T[j,i] I - A0 [i==j] - sum_l (T**-d_l)[j,i] A_l``.  It represents
    ``Psi(t-d)`` for ``t < d`` by the extension of ``L_i`` to negative
    times, so it does not converge to ``Psi`` when delays are present.
"""

from dataclasses import dataclass, field
import logging
import time
import warnings

import numpy as np
import scipy.linalg as sla

from .errors import ArgumentError, CapacityError, DomainError, NumericalError
from .laguerre import DEFAULT_DISCOUNT, LaguerreBasis, inverse_shift_powers, laguerre_table
from .system import (DelaySystem, InitialData, ReducedSystem, as_operator,
                     propagate_impulse, simulate, spectral_radius)

log = logging.getLogger(__name__)

DEFAULT_K = 40
NORMALIZED_SCHEME_LIMIT = 20_000


@dataclass(frozen=True, eq=False)
class Subsystem:
    name: str
    system: DelaySystem
    init: InitialData
    driven: bool

    def simulate(self, u, T, keep_states=False):
        if not self.driven:
            u = np.zeros((T, self.system.m))
        return simulate(self.system, self.init, u, T, keep_states)


@dataclass(frozen=True, eq=False)
class SubsystemSet:
    """Zero-history forced part, ``x(0)`` part and one part per ``x(j<0)``."""

    omega_zero: Subsystem
    omega_x0: Subsystem
    omega_neg: dict

    def parts(self):
        return [self.omega_zero, self.omega_x0] + [self.omega_neg[j] for j in sorted(self.omega_neg)]

    def outputs(self, u, T):
        """Outputs of every part, shape ``(parts, T+1, p)``."""
        return np.stack([part.simulate(u, T).outputs for part in self.parts()])


def decompose(system, init):
    """Split the response into subsystems whose outputs add up to the full one."""
    init.check(system)
    n, D = system.n, init.d_max

    def single(k):
        vals = np.zeros((D + 1, n))
        vals[k] = init.values[k]
        bases = [np.zeros((n, 0))] * (D + 1)
        weights = [np.zeros(0)] * (D + 1)
        bases[k], weights[k] = init.bases[k], init.weights[k]
        return InitialData(vals, tuple(bases), tuple(weights))

    zero = Subsystem("zero", system, InitialData.zeros(n, D), True)
    x0 = Subsystem("x0", system, single(0), False)
    neg = {-k: Subsystem(f"neg{-k}", system, single(k), False) for k in range(1, D + 1)}
    return SubsystemSet(zero, x0, neg)


def _initial_blocks(system, init):
    """Input matrices of the initial-value parts: ``X_0`` and ``A_l X_j``.

    Returns a list of ``(label, matrix)``; a delay ``d_l`` contributes one
    block for every ``j`` in ``[-d_l, -1]``.
    """
    blocks = [("x0", init.basis(0))]
    for A, d in system.delayed:
        for j in range(-1, -d - 1, -1):
            X = init.basis(j)
            if X.shape[1]:
                blocks.append((f"neg[d={d},j={j}]", A @ X))
    return blocks


def _dual(system):
    return DelaySystem(A0=system.A0.T, delayed=[(A.T, d) for A, d in system.delayed],
                       B=system.C.T, C=system.B.T)


def gramian_oracle(system, kind, init=None, j=None, delay=None, horizon=None,
                   tol=1e-10, max_horizon=1 << 20, check_stability=True):
    """Gramian by a truncated time-domain sum.

    Parameters
    ----------
    system : DelaySystem
    kind : {"P_zero", "P_x0", "P_neg", "P_combined", "Q"}
        ``P_*`` sum ``Psi(t) M M' Psi(t)'`` with ``M = B``, ``X_0``,
        ``A_l X_j`` or all of them; ``Q`` sums ``Psi(t)' C' C Psi(t)``.
    init : InitialData
        Supplies the bases ``X_j`` for the initial-value kinds.
    j, delay : int, optional
        Select one ``P_neg`` block; all ``A_l X_j`` blocks when omitted.
    horizon : int, optional
        Sum over ``t = 0..horizon``.  When omitted the horizon is doubled
        until the last term is below ``tol`` times the partial sum.

    Returns
    -------
    ndarray (n, n)
    """
    if check_stability:
        rho = spectral_radius(system)
        if rho >= 1.0:
            raise DomainError(f"Gramians need a stable system, spectral radius {rho:.6g}",
                              spectral_radius=rho)
    if kind == "Q":
        sysm, M = _dual(system), system.C.T
    else:
        sysm = system
        if kind == "P_zero":
            M = system.B
        else:
            if init is None:
                raise ArgumentError(f"{kind} needs the initial-data bases")
            blocks = _initial_blocks(system, init)
            if kind == "P_x0":
                M = blocks[0][1]
            elif kind == "P_neg":
                sel = []
                for A, d in system.delayed:
                    if delay is not None and d != delay:
                        continue
                    for jj in range(-1, -d - 1, -1):
                        if j is None or jj == j:
                            sel.append(A @ init.basis(jj))
                M = np.hstack(sel) if sel else np.zeros((system.n, 0))
            elif kind == "P_combined":
                M = np.hstack([system.B] + [b for _, b in blocks])
            else:
                raise ArgumentError(f"unknown Gramian kind {kind!r}")
    if M.shape[1] == 0:
        return np.zeros((system.n, system.n))

    def partial(H):
        Z = propagate_impulse(sysm, M, H)
        G = np.einsum("tic,tjc->ij", Z, Z)
        last = Z[-1] @ Z[-1].T
        return 0.5 * (G + G.T), np.linalg.norm(last)

    if horizon is not None:
        G, last = partial(int(horizon))
        scale = np.linalg.norm(G)
        if last > tol * max(scale, 1e-300):
            warnings.warn(f"Gramian horizon {horizon} too short: last term {last:.3e} "
                          f"vs partial sum {scale:.3e}", RuntimeWarning)
        return G
    H = 64
    while True:
        G, last = partial(H)
        if last <= tol * max(np.linalg.norm(G), 1e-300):
            return G
        if H >= max_horizon:
            warnings.warn(f"Gramian sum not converged at horizon {H}", RuntimeWarning)
            return G
        H *= 2


@dataclass(frozen=True, eq=False)
class LaguerreFundamental:
    """Laguerre coefficients ``F_i`` with ``Psi(t) ~ sum_i F_i L_i(t)``."""

    K: int
    s: float
    F: np.ndarray = field(repr=False)
    residual: float
    scheme: str

    def reconstruct(self, t):
        L = laguerre_table(self.K, self.s, np.atleast_1d(t))
        out = np.einsum("ikl,it->tkl", self.F, L)
        return out[0] if np.ndim(t) == 0 else out


def _delay_powers(basis, delays, scheme):
    T = basis.shift_matrix_T
    if scheme == "causal":
        return {d: np.linalg.matrix_power(T, d + 1) for d in delays}
    return {d: inverse_shift_powers(T, d) for d in delays}


def _causal_apply(system, M, basis):
    """Laguerre coefficients of ``Psi(t) M`` (causal scheme), shape (K, n, c)."""
    K, o = basis.K, basis.o
    T = basis.shift_matrix_T
    powers = _delay_powers(basis, system.delays, "causal")
    lhs = np.eye(system.n) - o * system.A0
    for A, d in system.delayed:
        lhs = lhs - o ** (d + 1) * A
    try:
        lu = sla.lu_factor(lhs, check_finite=False)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise NumericalError(f"Laguerre recursion matrix is singular: {exc}")
    rcond = 1.0 / np.linalg.cond(lhs, 1) if system.n <= 2000 else None
    if rcond is not None and rcond < np.finfo(float).eps:
        raise NumericalError("Laguerre recursion matrix is singular",
                             condition=1.0 / max(rcond, 1e-300))
    L0 = laguerre_table(K, basis.s, [0])[:, 0]
    A0 = as_operator(system.A0)
    terms = [(as_operator(A), d) for A, d in system.delayed]
    F = np.empty((K,) + M.shape)
    AF0 = np.empty_like(F)
    AFl = [np.empty_like(F) for _ in terms]
    for jj in range(K):
        rhs = L0[jj] * M
        if jj:
            rhs = rhs + np.tensordot(T[jj, :jj], AF0[:jj], axes=1)
            for (_, d), AF in zip(terms, AFl):
                rhs = rhs + np.tensordot(powers[d][jj, :jj], AF[:jj], axes=1)
        F[jj] = sla.lu_solve(lu, rhs, check_finite=False)
        AF0[jj] = A0 @ F[jj]
        for (A, _), AF in zip(terms, AFl):
            AF[jj] = A @ F[jj]
    # residual of the block lower-triangular system
    res = 0.0
    for jj in range(K):
        r = F[jj] - o * AF0[jj] - L0[jj] * M
        r = r - np.tensordot(T[jj, :jj], AF0[:jj], axes=1)
        for (_, d), AF in zip(terms, AFl):
            r = r - np.tensordot(powers[d][jj, :jj + 1], AF[:jj + 1], axes=1)
        res = max(res, np.linalg.norm(r))
    scale = max(np.linalg.norm(M), 1e-300)
    return F, res / scale


def _normalized_operator(system, basis):
    K, n = basis.K, system.n
    if K * n > NORMALIZED_SCHEME_LIMIT:
        raise CapacityError(f"normalized scheme block system of size {K * n} exceeds {NORMALIZED_SCHEME_LIMIT}")
    T = basis.shift_matrix_T
    powers = _delay_powers(basis, system.delays, "normalized")
    L0 = laguerre_table(K, basis.s, [0])[:, 0]
    I = np.eye(n)
    Aop = np.zeros((K * n, K * n))
    for jj in range(K):
        Aop[:n, jj * n:(jj + 1) * n] = L0[jj] * I
    for i in range(K - 1):
        for jj in range(i, K):
            blk = T[jj, i] * I
            if jj == i:
                blk = blk - system.A0
            for A, d in system.delayed:
                blk = blk - powers[d][jj, i] * A
            Aop[(i + 1) * n:(i + 2) * n, jj * n:(jj + 1) * n] = blk
    return Aop


def _normalized_apply(system, M, basis):
    K, n = basis.K, system.n
    Aop = _normalized_operator(system, basis)
    rhs = np.zeros((K * n, M.shape[1]))
    rhs[:n] = M
    lu, piv, info = sla.lapack.dgetrf(Aop)
    rcond, _ = sla.lapack.dgecon(lu, np.linalg.norm(Aop, 1), norm="1")
    if info > 0 or rcond < np.finfo(float).eps:
        raise NumericalError("Laguerre block operator is singular",
                             condition=1.0 / max(rcond, 1e-300))
    Fs, _ = sla.lapack.dgetrs(lu, piv, rhs)
    res = np.linalg.norm(Aop @ Fs - rhs) / max(np.linalg.norm(rhs), 1e-300)
    return Fs.reshape(K, n, M.shape[1]), res


def laguerre_apply(system, M, K=DEFAULT_K, s=DEFAULT_DISCOUNT, scheme="causal"):
    """Laguerre coefficients of ``Psi(t) M``: returns ``(F_i M for i < K, residual)``."""
    if K < 2:
        raise ArgumentError("K must be at least 2")
    basis = LaguerreBasis(K, s)
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    if scheme == "causal":
        return _causal_apply(system, M, basis)
    if scheme == "normalized":
        return _normalized_apply(system, M, basis)
    raise ArgumentError(f"unknown Laguerre scheme {scheme!r}")


def laguerre_coefficients(system, K=DEFAULT_K, s=DEFAULT_DISCOUNT, scheme="causal"):
    """Laguerre coefficients of the fundamental matrix.

    Returns
    -------
    LaguerreFundamental
    """
    F, res = laguerre_apply(system, np.eye(system.n), K, s, scheme)
    return LaguerreFundamental(K=K, s=float(s), F=F, residual=float(res), scheme=scheme)


@dataclass(frozen=True, eq=False)
class LowRankGramians:
    """``P ~ X_in X_in'`` and ``Q ~ Y_out Y_out'``.

    ``blocks`` maps a label (``zero``, ``x0``, ``neg[d=..,j=..]``) to the
    column slice of ``X_in`` that it occupies.
    """

    X_in: np.ndarray
    Y_out: np.ndarray
    blocks: dict
    K: int
    s: float
    residual: float


def lowrank_factors(system, init=None, K=DEFAULT_K, s=DEFAULT_DISCOUNT, include_initial=True,
                    lag=None, scheme="causal"):
    """Low-rank Gramian factors from Laguerre coefficients.

    ``X_in = [X_zero X_x0 X_neg...]`` with ``X_zero = [F_0 B ... F_{K-1} B]``
    and the initial-value blocks built the same way from ``X_0`` and
    ``A_l X_j``; ``Y_out = [(C F_0)' ... (C F_{K-1})']``.  With
    ``include_initial=False`` only ``X_zero`` is kept.

    When ``lag`` (a :class:`LaguerreFundamental`) is given its ``F_i`` are
    used, otherwise only the needed products ``F_i M`` are computed.
    """
    labelled = [("zero", system.B)]
    if include_initial:
        if init is None:
            raise ArgumentError("initial data required when include_initial is set")
        init.check(system)
        labelled += [(lab, M) for lab, M in _initial_blocks(system, init) if M.shape[1]]
    Mall = np.hstack([M for _, M in labelled])
    if lag is not None:
        K, s = lag.K, lag.s
        FM = np.einsum("kij,jc->kic", lag.F, Mall)
        FC = np.einsum("kij,jc->kic", np.transpose(lag.F, (0, 2, 1)), system.C.T)
        res = lag.residual
    else:
        FM, res1 = laguerre_apply(system, Mall, K, s, scheme)
        FC, res2 = laguerre_apply(_dual(system), system.C.T, K, s, scheme)
        res = max(res1, res2)
    cols, blocks, start = [], {}, 0
    off = 0
    for lab, M in labelled:
        c = M.shape[1]
        blk = FM[:, :, off:off + c]  # (K, n, c)
        cols.append(np.concatenate(list(blk), axis=1))
        blocks[lab] = slice(start, start + K * c)
        start += K * c
        off += c
    X_in = np.hstack(cols)
    Y_out = np.concatenate(list(FC), axis=1)
    return LowRankGramians(X_in=X_in, Y_out=Y_out, blocks=blocks, K=K, s=float(s),
                           residual=float(res))


def _sign_fix(U, Vt=None):
    """Make the largest-magnitude entry of each column of ``U`` positive."""
    idx = np.argmax(np.abs(U), axis=0)
    sg = np.sign(U[idx, np.arange(U.shape[1])])
    sg[sg == 0] = 1.0
    U = U * sg
    if Vt is not None:
        Vt = Vt * sg[:, None]
    return U, Vt


def _numerical_rank(sv, shape):
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv > max(shape) * np.finfo(float).eps * sv[0]))


def _check_order(r, sv, shape):
    rank = _numerical_rank(sv, shape)
    if int(r) != r or r < 1 or r > rank:
        raise ArgumentError(
            f"order r={r} exceeds the numerical rank {rank}; singular values: "
            + ", ".join(f"{v:.3e}" for v in sv[:max(rank + 1, 1)]))


def _balanced(system, init, factors, r, method, params, t0):
    t1 = time.perf_counter()
    H = factors.Y_out.T @ factors.X_in
    U, sv, Vt = np.linalg.svd(H, full_matrices=False)
    U, Vt = _sign_fix(U, Vt)
    _check_order(r, sv, H.shape)
    scale = 1.0 / np.sqrt(sv[:r])
    W = (factors.Y_out @ U[:, :r]) * scale
    V = (factors.X_in @ Vt[:r].T) * scale
    t2 = time.perf_counter()
    red = system.project(V, W)
    red_init = init.project(W) if init is not None else InitialData.zeros(r, system.d_max)
    t3 = time.perf_counter()
    params = dict(params)
    params.update({
        "r": int(r), "K": factors.K, "s": factors.s,
        "singular_values": [float(v) for v in sv],
        "laguerre_residual": factors.residual,
        "x_in_columns": int(factors.X_in.shape[1]),
        "timings": {"factors": t1 - t0, "svd": t2 - t1, "project": t3 - t2},
    })
    try:
        params["reduced_spectral_radius"] = spectral_radius(red)
    except NumericalError:
        params["reduced_spectral_radius"] = None
    return ReducedSystem(system=red, init=red_init, V=V, W=W, method=method, params=params)


def reduce_combbt(system, init, r, K=DEFAULT_K, s=DEFAULT_DISCOUNT, scheme="causal"):
    """Balanced truncation with the combined (initial-value aware) Gramian.

    ``W' = S_r^{-1/2} U_r' Y_out'`` and ``V = X_in V_r S_r^{-1/2}`` from
    the SVD ``Y_out' X_in = U S V'``; reduced history ``W' phi(j)``.
    """
    t0 = time.perf_counter()
    f = lowrank_factors(system, init, K, s, include_initial=True, scheme=scheme)
    return _balanced(system, init, f, r, "combbt", {"scheme": scheme}, t0)


def reduce_grambt(system, r, K=DEFAULT_K, s=DEFAULT_DISCOUNT, init=None, scheme="causal"):
    """Zero-history balanced truncation baseline.

    The Gramian ignores the initial history; when ``init`` is given its
    reduced version ``W' phi(j)`` is still attached so the model can be
    simulated from the same history.
    """
    t0 = time.perf_counter()
    f = lowrank_factors(system, None, K, s, include_initial=False, scheme=scheme)
    return _balanced(system, init, f, r, "grambt", {"scheme": scheme}, t0)


def reduce_dominant(system, init, r, K=DEFAULT_K, s=DEFAULT_DISCOUNT, scheme="causal"):
    """One-sided reduction onto the leading left singular vectors of
    ``[X_in Y_out]``."""
    t0 = time.perf_counter()
    f = lowrank_factors(system, init, K, s, include_initial=True, scheme=scheme)
    t1 = time.perf_counter()
    Z = np.hstack([f.X_in, f.Y_out])
    U, sv, _ = np.linalg.svd(Z, full_matrices=False)
    U, _ = _sign_fix(U)
    _check_order(r, sv, Z.shape)
    S = U[:, :r].copy()
    red = system.project(S)
    params = {
        "scheme": scheme, "r": int(r), "K": f.K, "s": f.s,
        "singular_values": [float(v) for v in sv],
        "laguerre_residual": f.residual,
        "timings": {"factors": t1 - t0, "svd_project": time.perf_counter() - t1},
    }
    try:
        params["reduced_spectral_radius"] = spectral_radius(red)
    except NumericalError:
        params["reduced_spectral_radius"] = None
    return ReducedSystem(system=red, init=init.project(S), V=S, W=S, method="dominant",
                         params=params)
