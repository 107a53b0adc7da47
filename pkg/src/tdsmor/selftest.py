"""Small-size invariant checks for every module, used by ``tdsmor selftest``."""

from dataclasses import dataclass, replace
import os
import tempfile
import time

import numpy as np

from . import bt, io, laguerre, walsh
from .benchmarks import gen_random_stable
from .system import (lift_to_linear, parse_input, simulate,
                     simulate_lifted)
from .walsh_mor import (WalshMorProblem, output_walsh_coefficients, reduce_walsh,
                        solve_walsh_coefficients)


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    limit: float
    seconds: float

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag}  {self.name:<38s} value={self.value:.3e}  limit={self.limit:.1e}  ({self.seconds:.2f}s)"


def perturbed_basis(basis, eps=1e-3):
    """Copy of ``basis`` with a perturbed summation matrix (fault injection)."""
    S = basis.summation_matrix.copy()
    S[0, -1] += eps
    S.setflags(write=False)
    return replace(basis, summation_matrix=S)


def _basis(l, fault):
    b = walsh.build_basis(l)
    return perturbed_basis(b) if fault else b


def check_walsh(fault=False):
    worst = 0.0
    for l in range(1, 7):
        b = _basis(l, fault)
        Wm = b.walsh_matrix.astype(float)
        N = b.N
        worst = max(worst, np.abs(Wm @ Wm - N * np.eye(N)).max())
        for k in range(N):
            prev = b.vector(k - 1) if k else b.vector(N - 1)
            worst = max(worst, np.abs(b.shift_matrix @ b.vector(k) - prev).max())
            run = Wm[:, :k + 1].sum(axis=1)
            worst = max(worst, np.abs(b.summation_matrix @ b.vector(k) - run).max())
    return worst, 1e-10


def check_laguerre(fault=False):
    worst = 0.0
    s = laguerre.DEFAULT_DISCOUNT
    for i in range(11):
        for k in range(0, 51, 5):
            ref = laguerre.laguerre_closed(i, k, s)
            worst = max(worst, abs(laguerre.laguerre_eval(i, k, s) - ref))
    basis = laguerre.LaguerreBasis(10, s)
    L = basis.table(400)
    worst = max(worst, np.abs(L @ L.T - np.eye(10)).max())
    T = basis.shift_matrix_T
    worst = max(worst, np.abs(T @ L[:, :-1] - L[:, 1:]).max())
    return worst, 1e-8


def check_lifted(fault=False):
    worst = 0.0
    for seed in range(5):
        system, init = gen_random_stable(8, (1, 3), seed=seed, margin=0.1)
        u = np.random.default_rng(seed).standard_normal((100, 1))
        y = simulate(system, init, u, 100).outputs
        yl = simulate_lifted(lift_to_linear(system, init), u, 100).outputs
        worst = max(worst, np.abs(y - yl).max() / max(np.abs(y).max(), 1.0))
    return worst, 1e-12


def check_superposition(fault=False):
    worst = 0.0
    for seed in range(5):
        system, init = gen_random_stable(8, (1, 3), seed=seed, margin=0.1, m=2)
        u = np.random.default_rng(seed).standard_normal((100, 2))
        y = simulate(system, init, u, 100).outputs
        parts = bt.decompose(system, init).outputs(u, 100)
        worst = max(worst, np.linalg.norm(parts.sum(axis=0) - y) / np.linalg.norm(y))
    return worst, 1e-11


def check_coefficient_matching(fault=False):
    worst = 0.0
    b = _basis(3, fault)
    u = parse_input("ramp-sine 1 0.3", 1)
    for seed in range(2):
        system, init = gen_random_stable(12, (2,), seed=seed, margin=0.2)
        red = reduce_walsh(system, init, u, 8)
        full = solve_walsh_coefficients(WalshMorProblem.build(system, init, u, basis=b))
        small = solve_walsh_coefficients(WalshMorProblem.build(red.system, red.init, u, basis=b))
        Y = output_walsh_coefficients(system, init, full.X, b)
        Yh = output_walsh_coefficients(red.system, red.init, small.X, b)
        worst = max(worst, np.abs(Y - Yh).max() / np.linalg.norm(Y))
        worst = max(worst, np.linalg.norm(full.X - red.V @ small.X) / np.linalg.norm(full.X))
    return worst, 1e-8


def check_gramians(fault=False):
    system, init = gen_random_stable(6, (2,), seed=3, margin=0.05, style="euler")
    f = bt.lowrank_factors(system, init, 40, laguerre.DEFAULT_DISCOUNT)
    P = bt.gramian_oracle(system, "P_combined", init)
    Q = bt.gramian_oracle(system, "Q")
    e1 = np.linalg.norm(f.X_in @ f.X_in.T - P) / np.linalg.norm(P)
    e2 = np.linalg.norm(f.Y_out @ f.Y_out.T - Q) / np.linalg.norm(Q)
    return max(e1, e2), 1e-3


def check_balanced(fault=False):
    system, init = gen_random_stable(10, (1,), seed=4, margin=0.3)
    a = bt.reduce_combbt(system, init, 4)
    b = bt.reduce_combbt(system, init, 4)
    sv = np.asarray(a.params["singular_values"])
    worst = np.abs(a.W.T @ a.V - np.eye(4)).max()
    worst = max(worst, float(np.any(np.diff(sv) > 0)))
    worst = max(worst, np.abs(a.V - b.V).max(), np.abs(a.W - b.W).max())
    return worst, 1e-8


def check_io(fault=False):
    system, init = gen_random_stable(5, (1, 2), seed=5)
    worst = 0.0
    with tempfile.TemporaryDirectory() as tmp:
        for name in ("s.tds", "s.json"):
            path = os.path.join(tmp, name)
            io.save(path, system, init)
            s2, i2, _, _ = io.load(path)
            worst = max(worst, np.abs(s2.A0 - system.A0).max(),
                        np.abs(i2.values - init.values).max())
    return worst, 0.0


CHECKS = [
    ("walsh identities", check_walsh),
    ("laguerre identities", check_laguerre),
    ("delay vs lifted simulation", check_lifted),
    ("superposition decomposition", check_superposition),
    ("walsh coefficient matching", check_coefficient_matching),
    ("low-rank gramians vs oracle", check_gramians),
    ("balanced truncation algebra", check_balanced),
    ("serialization round trip", check_io),
]


def run_selftest(fault=False):
    """Run every check; returns a list of :class:`CheckResult`."""
    results = []
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            value, limit = fn(fault)
            passed = bool(value <= limit)
        except Exception as exc:  # a crash is a failed check
            value, limit, passed = float("nan"), 0.0, False
            name = f"{name} ({type(exc).__name__}: {exc})"
        results.append(CheckResult(name, passed, float(value), float(limit),
                                   time.perf_counter() - t0))
    return results
