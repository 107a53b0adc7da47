"""Discrete time-delay systems with non-zero initial history.

The state equation is

    x(t+1) = A0 x(t) + sum_l A_l x(t - d_l) + B u(t),   y(t) = C x(t),

with ``x(j) = phi(j)`` prescribed for ``j = -d_max, ..., 0``.
"""

from dataclasses import dataclass, field
import logging
import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ArgumentError, NumericalError

log = logging.getLogger(__name__)

# Dense eigenvalue route below this lifted dimension, ARPACK above.
DENSE_EIG_LIMIT = 2500


def _as_matrix(a, name, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ArgumentError(f"{name} must be a 2-D matrix")
    arr.setflags(write=False)
    return arr


def as_operator(A, density=0.1):
    """Return ``A`` as CSR when it is sparse enough to pay off, else dense."""
    if sp.issparse(A):
        return A.tocsr()
    n = A.shape[0] * A.shape[1]
    if n > 10_000 and np.count_nonzero(A) < density * n:
        return sp.csr_matrix(A)
    return A


@dataclass(frozen=True, eq=False)
class DelaySystem:
    """Coefficient matrices and delays of a discrete time-delay system.

    ``delayed`` holds ``(A_l, d_l)`` pairs; it is stored sorted by delay.
    An empty list describes an ordinary (delay-free) linear system.
    """

    A0: np.ndarray
    delayed: tuple
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A0 = _as_matrix(self.A0, "A0")
        n = A0.shape[0]
        if A0.shape != (n, n):
            raise ArgumentError(f"A0 must be square, got {A0.shape}")
        terms = []
        for pair in self.delayed:
            try:
                A, d = pair
            except (TypeError, ValueError):
                raise ArgumentError("delayed terms must be (matrix, delay) pairs")
            if int(d) != d or d < 1:
                raise ArgumentError(f"delays must be positive integers, got {d!r}")
            A = _as_matrix(A, f"A(d={d})")
            if A.shape != (n, n):
                raise ArgumentError(f"delayed matrix for d={d} has shape {A.shape}, expected {(n, n)}")
            terms.append((A, int(d)))
        terms.sort(key=lambda p: p[1])
        ds = [d for _, d in terms]
        if len(set(ds)) != len(ds):
            raise ArgumentError(f"delays must be distinct, got {ds}")
        B = _as_matrix(self.B, "B")
        C = _as_matrix(self.C, "C")
        if B.shape[0] != n:
            raise ArgumentError(f"B has {B.shape[0]} rows, expected {n}")
        if C.ndim != 2 or C.shape[1] != n:
            # a 1-D C is a single output row
            if np.ndim(self.C) == 1 and np.size(self.C) == n:
                C = _as_matrix(np.reshape(self.C, (1, n)), "C")
            else:
                raise ArgumentError(f"C has {C.shape[1]} columns, expected {n}")
        object.__setattr__(self, "A0", A0)
        object.__setattr__(self, "delayed", tuple(terms))
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def n(self):
        return self.A0.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[0]

    @property
    def delays(self):
        return tuple(d for _, d in self.delayed)

    @property
    def d_max(self):
        return max(self.delays, default=0)

    def replace(self, **changes):
        kw = dict(A0=self.A0, delayed=self.delayed, B=self.B, C=self.C)
        kw.update(changes)
        return DelaySystem(**kw)

    def project(self, V, W=None):
        """Petrov-Galerkin projection ``W^T A V``; ``W`` defaults to ``V``."""
        W = V if W is None else W
        return DelaySystem(
            A0=W.T @ (self.A0 @ V),
            delayed=[(W.T @ (A @ V), d) for A, d in self.delayed],
            B=W.T @ self.B,
            C=self.C @ V,
        )


@dataclass(frozen=True, eq=False)
class InitialData:
    """Initial history ``phi(j)``, ``j = -d_max..0``, with basis factors.

    ``values[k]`` holds ``phi(-k)``.  Each ``phi(j)`` is written as
    ``X_j w_j`` with ``bases[k] = X_{-k}`` and ``weights[k] = w_{-k}``.
    """

    values: np.ndarray
    bases: tuple = field(repr=False)
    weights: tuple = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.ndim != 2:
            raise ArgumentError("values must have shape (d_max+1, n)")
        if len(self.bases) != vals.shape[0] or len(self.weights) != vals.shape[0]:
            raise ArgumentError("one basis and weight vector per history index required")
        n = vals.shape[1]
        bases, weights = [], []
        for k, (X, w) in enumerate(zip(self.bases, self.weights)):
            X = np.array(X, dtype=float).reshape(n, -1)
            w = np.array(w, dtype=float).ravel()
            if X.shape[1] != w.size:
                raise ArgumentError(f"basis/weight size mismatch at j={-k}")
            scale = max(np.linalg.norm(vals[k]), 1e-300)
            if np.linalg.norm(X @ w - vals[k]) > 1e-12 * scale and np.any(vals[k]):
                raise ArgumentError(f"phi({-k}) is not X_j w_j")
            X.setflags(write=False)
            w.setflags(write=False)
            bases.append(X)
            weights.append(w)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "bases", tuple(bases))
        object.__setattr__(self, "weights", tuple(weights))

    @classmethod
    def from_history(cls, values, bases=None):
        """Build from ``values[k] = phi(-k)``.

        Without ``bases`` every nonzero ``phi(j)`` gets the single unit
        column ``phi(j)/|phi(j)|`` and a zero vector gets an empty basis.
        With ``bases`` the weights are the least-squares coefficients, which
        must reproduce ``phi(j)``.
        """
        vals = np.atleast_2d(np.asarray(values, dtype=float))
        n = vals.shape[1]
        Xs, ws = [], []
        for k, v in enumerate(vals):
            if bases is not None and bases[k] is not None:
                X = np.asarray(bases[k], dtype=float).reshape(n, -1)
                w = np.linalg.lstsq(X, v, rcond=None)[0] if X.shape[1] else np.zeros(0)
            else:
                nv = np.linalg.norm(v)
                if nv > 0:
                    X, w = (v / nv)[:, None], np.array([nv])
                else:
                    X, w = np.zeros((n, 0)), np.zeros(0)
            Xs.append(X)
            ws.append(w)
        return cls(vals, tuple(Xs), tuple(ws))

    @classmethod
    def zeros(cls, n, d_max):
        return cls.from_history(np.zeros((d_max + 1, n)))

    @property
    def n(self):
        return self.values.shape[1]

    @property
    def d_max(self):
        return self.values.shape[0] - 1

    def phi(self, j):
        if not -self.d_max <= j <= 0:
            raise ArgumentError(f"history index {j} outside [{-self.d_max}, 0]")
        return self.values[-j]

    def basis(self, j):
        return self.bases[-j]

    def is_zero(self):
        return not np.any(self.values)

    def project(self, W):
        """Reduced history ``W^T phi(j)`` (bases follow the default rule)."""
        return InitialData.from_history(self.values @ W)

    def check(self, system):
        if self.n != system.n:
            raise ArgumentError(f"initial data has n={self.n}, system has n={system.n}")
        if self.d_max < system.d_max:
            raise ArgumentError(
                f"initial history covers {self.d_max} past steps, system needs {system.d_max}")


class InputSignal:
    """Input ``u(t)`` given by a generator or by samples.

    Parameters
    ----------
    generator : callable or None
        Maps an integer array of times to an array of shape ``(len(t), m)``.
    m : int
        Number of inputs.
    samples : array_like, optional
        Sampled sequence of shape ``(T, m)``; used when ``generator`` is None.
    description : str
        Descriptor recorded in reports.
    """

    def __init__(self, generator=None, m=1, samples=None, description="custom"):
        if generator is None and samples is None:
            raise ArgumentError("either a generator or samples are required")
        self._gen = generator
        self._samples = None
        if samples is not None:
            arr = np.asarray(samples, dtype=float)
            if arr.ndim == 1:
                arr = arr[:, None]
            self._samples = arr
            m = arr.shape[1]
        self.m = int(m)
        self.description = description

    @property
    def horizon(self):
        return None if self._samples is None else self._samples.shape[0]

    def samples(self, T):
        """``u(0..T-1)`` as a ``(T, m)`` array."""
        if self._samples is not None:
            if T > self._samples.shape[0]:
                raise ArgumentError(
                    f"input has {self._samples.shape[0]} samples, {T} requested")
            return self._samples[:T]
        t = np.arange(T)
        out = np.asarray(self._gen(t), dtype=float).reshape(T, self.m)
        return out

    def __repr__(self):
        return f"InputSignal({self.description!r}, m={self.m})"

    @classmethod
    def zero(cls, m=1):
        return cls(lambda t: np.zeros((len(t), m)), m, description="zero")

    @classmethod
    def stack(cls, components):
        """One scalar component per input channel."""
        comps = list(components)
        desc = "; ".join(c.description for c in comps)
        return cls(lambda t: np.hstack([c.samples(len(t)) for c in comps]),
                   len(comps), description=desc)


def ramp_sine(a, b):
    """``u(t) = a t sin(b t)``."""
    return InputSignal(lambda t: (a * t * np.sin(b * t))[:, None], 1,
                       description=f"ramp-sine {a!r} {b!r}")


def exp_decay(c):
    """``u(t) = exp(-c t)``."""
    return InputSignal(lambda t: np.exp(-c * t)[:, None], 1,
                       description=f"exp {c!r}")


def parse_input(desc, m=None):
    """Parse an input descriptor.

    Grammar: components separated by ``;``, one per input channel, each
    being ``ramp-sine a b``, ``exp c``, ``const c`` or ``zero``.  A single
    component is repeated over all ``m`` channels.  ``file:PATH`` loads a
    whitespace/comma separated sample table with one row per time step.
    """
    desc = desc.strip()
    if desc.startswith("file:"):
        path = desc[5:]
        try:
            arr = np.loadtxt(path, delimiter="," if path.endswith(".csv") else None, ndmin=2)
        except OSError:
            raise
        except ValueError as exc:
            raise ArgumentError(f"cannot parse input samples in {path}: {exc}")
        if m is not None and arr.shape[1] != m:
            raise ArgumentError(f"input file has {arr.shape[1]} columns, system has m={m}")
        return InputSignal(samples=arr, description=desc)
    comps = []
    for part in desc.split(";"):
        tok = part.split()
        if not tok:
            raise ArgumentError(f"empty component in input descriptor {desc!r}")
        kind, args = tok[0].lower(), tok[1:]
        try:
            vals = [float(a) for a in args]
        except ValueError:
            raise ArgumentError(f"non-numeric argument in {part!r}")
        if kind == "ramp-sine" and len(vals) == 2:
            comps.append(ramp_sine(*vals))
        elif kind == "exp" and len(vals) == 1:
            comps.append(exp_decay(vals[0]))
        elif kind == "const" and len(vals) == 1:
            c = vals[0]
            comps.append(InputSignal(lambda t, c=c: np.full((len(t), 1), c), 1,
                                     description=f"const {c!r}"))
        elif kind == "zero" and not vals:
            comps.append(InputSignal.zero(1))
        else:
            raise ArgumentError(f"unknown input component {part.strip()!r}")
    if m is not None and len(comps) == 1 and m > 1:
        comps = comps * m
    if m is not None and len(comps) != m:
        raise ArgumentError(f"input descriptor has {len(comps)} components, system has m={m}")
    if len(comps) == 1:
        return comps[0]
    return InputSignal.stack(comps)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Outputs ``y(0..T)`` and optionally states ``x(0..T)``."""

    outputs: np.ndarray
    states: np.ndarray = None
    inputs: np.ndarray = field(default=None, repr=False)

    @property
    def horizon(self):
        return self.outputs.shape[0] - 1


def simulate(system, init, u, T, keep_states=False):
    """Run the delay recursion for ``T`` steps.

    Parameters
    ----------
    system : DelaySystem
    init : InitialData
    u : InputSignal or array_like of shape (T, m)
    T : int
        Number of steps; outputs are returned for ``t = 0..T``.
    keep_states : bool
        Retain the state sequence (memory ``(T+1) n``).

    Returns
    -------
    Trajectory
    """
    if T < 1:
        raise ArgumentError("horizon must be at least 1")
    init.check(system)
    U = u.samples(T) if isinstance(u, InputSignal) else np.asarray(u, dtype=float).reshape(T, -1)
    if U.shape != (T, system.m):
        raise ArgumentError(f"input samples have shape {U.shape}, expected {(T, system.m)}")
    A0 = as_operator(system.A0)
    terms = [(as_operator(A), d) for A, d in system.delayed]
    D = system.d_max
    BU = U @ system.B.T  # (T, n)
    # ring buffer: hist[(t) mod (D+1)] = x(t)
    hist = np.zeros((D + 1, system.n))
    for j in range(-D, 1):
        hist[j % (D + 1)] = init.phi(j)
    Y = np.empty((T + 1, system.p))
    X = np.empty((T + 1, system.n)) if keep_states else None
    x = hist[0].copy()
    Y[0] = system.C @ x
    if keep_states:
        X[0] = x
    for t in range(T):
        nxt = A0 @ x + BU[t]
        for A, d in terms:
            nxt += A @ hist[(t - d) % (D + 1)]
        x = nxt
        hist[(t + 1) % (D + 1)] = x
        Y[t + 1] = system.C @ x
        if keep_states:
            X[t + 1] = x
    return Trajectory(outputs=Y, states=X, inputs=U)


def propagate_impulse(system, M, t_max):
    """``Psi(t) M`` for ``t = 0..t_max`` by the fundamental-matrix recursion.

    Returns an array of shape ``(t_max+1, n, c)``.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    A0 = as_operator(system.A0)
    terms = [(as_operator(A), d) for A, d in system.delayed]
    out = np.empty((t_max + 1,) + M.shape)
    out[0] = M
    for t in range(t_max):
        nxt = A0 @ out[t]
        for A, d in terms:
            if t - d >= 0:
                nxt = nxt + A @ out[t - d]
        out[t + 1] = nxt
    return out


def fundamental_matrix(system, t_max):
    """Fundamental matrix ``Psi(0..t_max)``, shape ``(t_max+1, n, n)``.

    ``Psi(0) = I``, ``Psi(tau) = 0`` for negative ``tau`` and
    ``Psi(t+1) = A0 Psi(t) + sum_l A_l Psi(t - d_l)``.
    """
    if t_max < 0:
        raise ArgumentError("t_max must be non-negative")
    return propagate_impulse(system, np.eye(system.n), t_max)


@dataclass(frozen=True, eq=False)
class LiftedSystem:
    """Delay-free system on the stacked state ``z = [x(t); ...; x(t-D)]``."""

    A: sp.csr_matrix
    B: np.ndarray
    C: np.ndarray
    z0: np.ndarray
    n: int
    d_max: int

    def as_delay_system(self, dense=True):
        A = self.A.toarray() if dense else self.A
        return DelaySystem(A0=A, delayed=(), B=self.B, C=self.C)

    def initial_data(self):
        return InitialData.from_history(self.z0[None, :])


def lift_to_linear(system, init=None):
    """Companion lifting of a delay system.

    Each ``A_l`` is placed in the first block row at block column ``d_l``
    (0-based); identity blocks fill the first sub-diagonal.
    """
    n, D = system.n, system.d_max
    N = n * (D + 1)
    blocks = [[None] * (D + 1) for _ in range(D + 1)]
    blocks[0][0] = sp.csr_matrix(system.A0)
    for A, d in system.delayed:
        blocks[0][d] = sp.csr_matrix(A)
    for i in range(1, D + 1):
        blocks[i][i - 1] = sp.identity(n, format="csr")
    if D and blocks[D][D] is None:
        blocks[D][D] = sp.csr_matrix((n, n))
    Abar = sp.bmat(blocks, format="csr") if D else sp.csr_matrix(system.A0)
    Bbar = np.zeros((N, system.m))
    Bbar[:n] = system.B
    Cbar = np.zeros((system.p, N))
    Cbar[:, :n] = system.C
    if init is None:
        z0 = np.zeros(N)
    else:
        init.check(system)
        z0 = np.concatenate([init.phi(-k) for k in range(D + 1)])
    return LiftedSystem(A=Abar, B=Bbar, C=Cbar, z0=z0, n=n, d_max=D)


def simulate_lifted(lifted, u, T):
    """Simulate ``z(t+1) = A z(t) + B u(t)``; returns outputs ``(T+1, p)``."""
    U = u.samples(T) if isinstance(u, InputSignal) else np.asarray(u, dtype=float).reshape(T, -1)
    z = lifted.z0.copy()
    Y = np.empty((T + 1, lifted.C.shape[0]))
    Y[0] = lifted.C @ z
    BU = U @ lifted.B.T
    for t in range(T):
        z = lifted.A @ z + BU[t]
        Y[t + 1] = lifted.C @ z
    return Trajectory(outputs=Y, inputs=U)


def spectral_radius(system, tol=1e-12, maxiter=50_000):
    """Spectral radius of the lifted matrix.

    Dense eigenvalues up to ``DENSE_EIG_LIMIT``; ARPACK (largest magnitude)
    above.  A value below one certifies exponential stability.
    """
    lifted = lift_to_linear(system)
    N = lifted.A.shape[0]
    if N <= DENSE_EIG_LIMIT:
        ev = np.linalg.eigvals(lifted.A.toarray())
        return float(np.max(np.abs(ev))) if ev.size else 0.0
    if lifted.A.nnz == 0:
        return 0.0
    try:
        ev = spla.eigs(lifted.A, k=min(6, N - 2), which="LM", tol=tol,
                       maxiter=maxiter, return_eigenvectors=False)
    except spla.ArpackNoConvergence as exc:
        partial = np.abs(exc.eigenvalues) if exc.eigenvalues is not None else []
        raise NumericalError(
            "ARPACK did not converge while estimating the spectral radius",
            lifted_dimension=N, converged=len(partial),
            partial_radius=float(np.max(partial)) if len(partial) else None)
    return float(np.max(np.abs(ev)))


@dataclass(frozen=True)
class ErrorMetrics:
    abs_err: np.ndarray
    rel_l2: float
    max_abs: float


def error_metrics(y_full, y_red):
    """Per-step infinity-norm error and relative l2 error of two outputs."""
    a = y_full.outputs if isinstance(y_full, Trajectory) else np.asarray(y_full, dtype=float)
    b = y_red.outputs if isinstance(y_red, Trajectory) else np.asarray(y_red, dtype=float)
    a = a.reshape(a.shape[0], -1)
    b = b.reshape(b.shape[0], -1)
    if a.shape != b.shape:
        raise ArgumentError(f"output shapes differ: {a.shape} vs {b.shape}")
    diff = a - b
    abs_err = np.max(np.abs(diff), axis=1) if diff.shape[1] else np.zeros(diff.shape[0])
    num = math.sqrt(float(np.sum(diff ** 2)))
    den = math.sqrt(float(np.sum(a ** 2)))
    if den == 0.0:
        rel = 0.0 if num == 0.0 else math.inf
    else:
        rel = num / den
    return ErrorMetrics(abs_err=abs_err, rel_l2=rel,
                        max_abs=float(abs_err.max()) if abs_err.size else 0.0)


@dataclass(frozen=True, eq=False)
class ReducedSystem:
    """Reduced model with its projection matrices and provenance."""

    system: DelaySystem
    init: InitialData
    V: np.ndarray
    W: np.ndarray
    method: str
    params: dict = field(default_factory=dict)

    @property
    def r(self):
        return self.system.n

    def projection_error(self, full):
        """Largest relative deviation of the stored reduced matrices from
        ``W^T A V``, ``W^T B``, ``C V`` recomputed from ``full``."""
        if self.method == "lifted-walsh":
            n = full.n
            blk = [self.V[k * n:(k + 1) * n] for k in range(full.d_max + 1)]
            V0 = blk[0]
            ref = DelaySystem(A0=V0.T @ full.A0 @ V0,
                              delayed=[(V0.T @ A @ blk[d], d) for A, d in full.delayed],
                              B=V0.T @ full.B, C=full.C @ V0)
        else:
            ref = full.project(self.V, self.W)
        pairs = [(self.system.A0, ref.A0), (self.system.B, ref.B),
                 (self.system.C, ref.C)]
        pairs += [(a, b) for (a, _), (b, _) in zip(self.system.delayed, ref.delayed)]
        worst = 0.0
        for got, want in pairs:
            scale = max(np.linalg.norm(want), 1e-300)
            worst = max(worst, np.linalg.norm(got - want) / scale if np.any(want) else np.linalg.norm(got))
        return worst
