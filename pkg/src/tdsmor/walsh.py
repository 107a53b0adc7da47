"""Discrete Walsh functions and their operational matrices.

The functions are ordered by the binary recoding ``g_j`` of the index (the
sequency order), so that ``W_1`` has one sign change, ``W_2`` two and so on.
The shift matrix ``R`` and summation matrix ``S`` depend on this ordering.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, CapacityError

MAX_ORDER_LOG2 = 14


def _check_log2(l):
    if int(l) != l or l < 1:
        raise ArgumentError(f"l must be a positive integer, got {l!r}")
    if l > MAX_ORDER_LOG2:
        raise CapacityError(
            f"Walsh order 2**{l} exceeds the cap 2**{MAX_ORDER_LOG2}")
    return int(l)


def _recoded_bits(i, l):
    """Return the exponents g_0(i), ..., g_{l-1}(i) (reduced mod 2)."""
    bits = [(i >> b) & 1 for b in range(l)]  # bits[b] = i_b
    g = [bits[l - 1]]
    for j in range(1, l):
        g.append((bits[l - j] + bits[l - 1 - j]) & 1)
    return g


def walsh_function(i, k, l):
    """Value of the ``i``-th discrete Walsh function at point ``k``.

    Parameters
    ----------
    i, k
        Function index and sample point, both in ``[0, 2**l)``.
    l
        Base-2 logarithm of the number of points.

    Returns
    -------
    int
        ``+1`` or ``-1``.
    """
    if int(l) != l or l < 1:
        raise ArgumentError(f"l must be a positive integer, got {l!r}")
    N = 1 << int(l)
    for name, v in (("i", i), ("k", k)):
        if int(v) != v or not 0 <= v < N:
            raise ArgumentError(f"{name}={v!r} outside [0, {N})")
    g = _recoded_bits(int(i), int(l))
    parity = sum(gj * ((int(k) >> j) & 1) for j, gj in enumerate(g)) & 1
    return -1 if parity else 1


def walsh_matrix(l):
    """The ``N x N`` Walsh matrix with entry ``(i, k) = W_i(k)`` (int8)."""
    l = _check_log2(l)
    N = 1 << l
    idx = np.arange(N)
    # g_j(i) for all i, shape (N, l)
    bits = (idx[:, None] >> np.arange(l)[None, :]) & 1
    g = np.empty((N, l), dtype=np.int64)
    g[:, 0] = bits[:, l - 1]
    for j in range(1, l):
        g[:, j] = bits[:, l - j] ^ bits[:, l - 1 - j]
    parity = (g @ bits.T) & 1
    return (1 - 2 * parity).astype(np.int8)


@dataclass(frozen=True)
class WalshBasis:
    """Walsh matrix with its shift and summation operational matrices.

    Attributes
    ----------
    l : int
        ``log2`` of the order.
    N : int
        Number of points and functions.
    walsh_matrix : ndarray of int8
        Symmetric, column ``k`` is the Walsh vector ``W(k)``.
    shift_matrix : ndarray
        ``R`` with ``R W(k+1) = W(k)`` and ``R W(0) = W(N-1)``.
    summation_matrix : ndarray
        ``S`` with ``sum_{i<=k} W(i) = S W(k)``.
    """

    l: int
    N: int
    walsh_matrix: np.ndarray = field(repr=False)
    shift_matrix: np.ndarray = field(repr=False)
    summation_matrix: np.ndarray = field(repr=False)

    def vector(self, k):
        """The Walsh vector ``W(k)`` as floats."""
        if int(k) != k or not 0 <= k < self.N:
            raise ArgumentError(f"k={k!r} outside [0, {self.N})")
        return self.walsh_matrix[:, int(k)].astype(float)

    def shift_power(self, p):
        """``R**p``; negative and large powers are reduced mod ``N``."""
        return np.linalg.matrix_power(self.shift_matrix, int(p) % self.N)


def build_basis(l):
    """Construct the Walsh basis of order ``2**l`` (``1 <= l <= 14``)."""
    l = _check_log2(l)
    N = 1 << l
    W = walsh_matrix(l).astype(np.int64)
    # R = (1/N) [W(N-1) W(0) ... W(N-2)] W, exact: integer sums over a power of 2
    rolled = np.roll(W, 1, axis=1)
    R = (rolled @ W) / N
    # s_ij = (1/N) sum_k sum_{l<=k} W_i(l) W_j(k)
    S = (np.cumsum(W, axis=1) @ W.T) / N
    for a in (R, S):
        a.setflags(write=False)
    Wi8 = W.astype(np.int8)
    Wi8.setflags(write=False)
    return WalshBasis(l=l, N=N, walsh_matrix=Wi8, shift_matrix=R,
                      summation_matrix=S)


def walsh_project(samples, basis=None):
    """Walsh coefficient matrix of a length-``N`` sequence.

    Parameters
    ----------
    samples : array_like, shape (N, q) or (N,)
        ``samples[k]`` is ``z(k)``.
    basis : WalshBasis, optional
        Built from ``len(samples)`` when omitted.

    Returns
    -------
    Z : ndarray, shape (q, N)
        Satisfies ``z(k) = Z @ W(k)`` exactly.
    """
    z = np.asarray(samples, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if z.ndim != 2:
        raise ArgumentError("samples must be a sequence of equal-length vectors")
    if basis is None:
        N = z.shape[0]
        if N < 2 or N & (N - 1):
            raise ArgumentError(f"sample count {N} is not a power of two >= 2")
        basis = build_basis(N.bit_length() - 1)
    if z.shape[0] != basis.N:
        raise ArgumentError(
            f"expected {basis.N} samples, got {z.shape[0]}")
    return z.T @ basis.walsh_matrix.T / basis.N


def walsh_reconstruct(Z, k, basis=None):
    """Evaluate the expansion ``Z @ W(k)``."""
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[None, :]
    if basis is None:
        N = Z.shape[1]
        if N < 2 or N & (N - 1):
            raise ArgumentError(f"coefficient count {N} is not a power of two")
        basis = build_basis(N.bit_length() - 1)
    return Z @ basis.vector(k)
