"""Discrete Laguerre polynomials and the shift-transformation matrix.

``L_i(k) = (-1)**i beta_i o**k alpha_i(k)`` with discount factor ``s`` in
``(0, 1)`` and ``o = sqrt(s)``.

Tables are produced by the shift relation ``L(k+1) = T L(k)`` from the exact
``L_i(0) = sqrt(1-s) (-o)**i``.  ``T`` is a contraction, so this route is
stable for every ``s``.  The three-term recurrence in ``i``
(:func:`laguerre_recurrence`) divides by ``o`` and amplifies rounding errors
for small ``s`` (at ``K = 80`` the error exceeds ``1e-6`` once ``s < 0.5``);
:func:`laguerre_closed` is the binomial-sum definition, kept as a reference.
"""

from dataclasses import dataclass, field
from math import comb, sqrt

import numpy as np
from scipy.linalg import solve_triangular, toeplitz

from .errors import ArgumentError

DEFAULT_DISCOUNT = 0.81


def _check_discount(s):
    if not 0.0 < s < 1.0:
        raise ArgumentError(f"discount factor must lie in (0, 1), got {s!r}")
    return float(s)


def laguerre_closed(i, k, s):
    """``L_i(k)`` from the binomial-sum definition (reference route)."""
    s = _check_discount(s)
    if i < 0 or k < 0:
        raise ArgumentError("i and k must be non-negative")
    ratio = (s - 1.0) / s
    alpha = s ** i * sum(ratio ** j * comb(i, j) * comb(k, j)
                         for j in range(i + 1))
    beta = sqrt((1.0 - s) / s ** i)
    return (-1) ** i * beta * sqrt(s) ** k * alpha


def _times(times):
    t = np.asarray(times)
    if t.ndim != 1:
        t = t.ravel()
    if t.size and (np.any(t < 0) or np.any(t != np.floor(t))):
        raise ArgumentError("times must be non-negative integers")
    return t.astype(np.int64)


def laguerre_recurrence(K, s, times):
    """``L_i(t)`` for ``i < K`` by the three-term recurrence in ``i``.

    Accurate for ``s`` close to one; see the module notes.
    """
    s = _check_discount(s)
    t = _times(times).astype(float)
    o = sqrt(s)
    L = np.empty((K, t.size))
    ok = o ** t
    L[0] = sqrt(1.0 - s) * ok
    if K > 1:
        L[1] = -sqrt((1.0 - s) / s) * ok * (s + (s - 1.0) * t)
    for i in range(1, K - 1):
        a = (i + (i + 1) * s + (s - 1.0) * t) / (i + 1)
        b = -i * s / (i + 1)
        L[i + 1] = -a / o * L[i] + b / s * L[i - 1]
    return L


def laguerre_table(K, s, times):
    """Values ``L_i(t)`` for ``i < K`` and every ``t`` in ``times``.

    Returns an array of shape ``(K, len(times))``.
    """
    s = _check_discount(s)
    t = _times(times)
    if K < 1:
        raise ArgumentError("K must be positive")
    out = np.empty((K, t.size))
    if t.size == 0:
        return out
    T = build_shift_matrix(K, s)
    vec = sqrt(1.0 - s) * (-sqrt(s)) ** np.arange(K)
    order = np.argsort(t, kind="stable")
    k = 0
    for idx in order:
        while k < t[idx]:
            vec = T @ vec
            k += 1
        out[:, idx] = vec
    return out


def laguerre_eval(i, k, s):
    """``L_i(k)``."""
    if i < 0 or k < 0:
        raise ArgumentError("i and k must be non-negative")
    return float(laguerre_table(int(i) + 1, s, [k])[int(i), 0])


def build_shift_matrix(K, s):
    """Lower-triangular Toeplitz ``T`` with ``L(k+1) = T L(k)``."""
    s = _check_discount(s)
    if K < 1:
        raise ArgumentError("K must be positive")
    o = sqrt(s)
    col = np.empty(K)
    col[0] = o
    col[1:] = (1.0 - s) * (-o) ** np.arange(K - 1)
    return np.tril(toeplitz(col))


def inverse_shift_powers(T, d):
    """``T**(-d)`` by ``d`` successive lower-triangular solves."""
    if d < 1:
        raise ArgumentError("d must be positive")
    X = np.eye(T.shape[0])
    for _ in range(int(d)):
        X = solve_triangular(T, X, lower=True)
    return X


@dataclass(frozen=True)
class LaguerreBasis:
    """First ``K`` discrete Laguerre polynomials for discount factor ``s``."""

    K: int
    s: float
    o: float = field(init=False)
    shift_matrix_T: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise ArgumentError(f"K must be a positive integer, got {self.K!r}")
        s = _check_discount(self.s)
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "o", sqrt(s))
        T = build_shift_matrix(self.K, s)
        T.setflags(write=False)
        object.__setattr__(self, "shift_matrix_T", T)

    def vector(self, k):
        return laguerre_vector(k, self)

    def table(self, t_max):
        """``L_i(t)`` for ``t = 0..t_max`` as a ``(K, t_max+1)`` array."""
        return laguerre_table(self.K, self.s, np.arange(t_max + 1))


def laguerre_vector(k, basis):
    """Stacked values ``[L_0(k), ..., L_{K-1}(k)]``."""
    if k < 0:
        raise ArgumentError("k must be non-negative")
    return laguerre_table(basis.K, basis.s, [k])[:, 0]
