"""Benchmark delay systems: vehicle platoon surrogate, 2-D convection-diffusion,
heated rod, and random stable fixtures.

Every generator returns ``(DelaySystem, InitialData)`` and, unless
``check=False``, verifies that the spectral radius of the lifted matrix is
below one.
"""

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.sparse as sp

from .errors import ArgumentError, DomainError
from .system import DelaySystem, InitialData, spectral_radius

# platoon surrogate gains (continuous time); headway and gains are chosen so
# that disturbances decay along the chain (string stability)
PLATOON_TAU = 0.1        # nominal actuator lag
PLATOON_TAU_SPREAD = 0.2  # relative spread of the lags over the vehicles
PLATOON_HEADWAY = 2.0
PLATOON_KP = 0.5         # delayed spacing-error gain
PLATOON_KD = 1.5         # delayed spacing-error-rate gain
PLATOON_LEADER_KV = 1.0  # leader speed regulation
PLATOON_INPUT_GAIN = 10.0


def _assert_stable(system, name):
    rho = spectral_radius(system)
    if not rho < 1.0:
        raise DomainError(f"{name}: generated system is not stable (spectral radius {rho:.12g})",
                          spectral_radius=rho)
    return rho


def gen_platoon(n=512, dt=0.005, check=True):
    """Chain-of-vehicles surrogate with one-step delayed feedback.

    Vehicles ``1..v-1`` follow their predecessor and carry
    ``[spacing error, velocity, acceleration]``; the leader at the end
    carries ``[velocity, acceleration]`` and receives the input, so
    ``n = 3 v - 1``.  With a constant time headway ``h`` the followers obey

        e' = v_pred - v - h a,   v' = a,
        a' = (-a + kp e(t-tau) + kd e'(t-tau)) / T_i

    and the leader ``v' = a``, ``a' = (-a - kL v) / T_L + 10 u``.  The lags
    ``T_i`` vary slightly between vehicles.  The delayed gains form ``A1``;
    forward differences give ``A0 = I + dt A0bar``, ``A1 = dt A1bar`` and
    ``B = dt Bbar = 0.05 e_n`` at ``dt = 0.005``.  ``C`` sums the spacing
    errors.  Initial data ``x(0) = C'``, ``x(-1) = e_1``.
    """
    if n < 5 or (n + 1) % 3:
        raise ArgumentError(f"platoon size must be 3*vehicles - 1 (>= 5), got n={n}")
    if dt <= 0:
        raise ArgumentError("dt must be positive")
    v = (n + 1) // 3
    hw, kp, kd = PLATOON_HEADWAY, PLATOON_KP, PLATOON_KD
    lags = PLATOON_TAU * (1.0 + PLATOON_TAU_SPREAD * np.sin(np.arange(v)))
    A0 = np.zeros((n, n))
    A1 = np.zeros((n, n))
    lead = 3 * (v - 1)  # leader velocity index
    for i in range(v - 1):
        e, vel, acc = 3 * i, 3 * i + 1, 3 * i + 2
        pred = 3 * (i + 1) + 1 if i + 1 < v - 1 else lead
        ta = lags[i]
        A0[e, pred] += 1.0
        A0[e, vel] -= 1.0
        A0[e, acc] -= hw
        A0[vel, acc] = 1.0
        A0[acc, acc] = -1.0 / ta
        # kp e + kd (v_pred - v - h a), applied one step late
        A1[acc, e] += kp / ta
        A1[acc, pred] += kd / ta
        A1[acc, vel] -= kd / ta
        A1[acc, acc] -= kd * hw / ta
    A0[lead, lead + 1] = 1.0
    A0[lead + 1, lead + 1] = -1.0 / lags[-1]
    A0[lead + 1, lead] = -PLATOON_LEADER_KV / lags[-1]
    B = np.zeros((n, 1))
    B[-1, 0] = PLATOON_INPUT_GAIN * dt
    C = np.zeros((1, n))
    C[0, 0:3 * (v - 1):3] = 1.0
    system = DelaySystem(A0=np.eye(n) + dt * A0, delayed=[(dt * A1, 1)], B=B, C=C)
    hist = np.zeros((2, n))
    hist[0] = C[0]
    hist[1, 0] = 1.0
    if check:
        _assert_stable(system, "platoon")
    return system, InitialData.from_history(hist)


def _laplacian_1d(h, dh):
    return sp.diags([np.ones(h - 1), -2.0 * np.ones(h), np.ones(h - 1)], [-1, 0, 1]) / dh ** 2


def _forward_1d(h, dh):
    # (x_{i+1} - x_i) / dh with a zero Dirichlet value beyond the last point
    return sp.diags([-np.ones(h), np.ones(h - 1)], [0, 1]) / dh


def gen_convdiff(h=25, check=True):
    """Convection-diffusion on the unit square with two pointwise delays.

    ``x_t = Lap x + dx/ds1 + dx/ds2 + sin(pi s1) x(t-1) + cos(pi s2) x(t-2)``
    with zero Dirichlet data, on the interior grid ``s = (i, j) dh``,
    ``dh = 1/(h+1)``.  Explicit Euler with ``dt = 0.1 dh**2``; the state is
    ordered with ``s1`` running fastest.  ``B = dt e_1``, ``C = [1 ... 1]``,
    ``x(0) = ones``, ``x(-1) = e_1``, ``x(-2) = e_2``.
    """
    if h < 3:
        raise ArgumentError(f"h must be at least 3, got {h}")
    dh = 1.0 / (h + 1)
    dt = 0.1 * dh ** 2
    n = h * h
    I = sp.identity(h)
    lap = sp.kron(I, _laplacian_1d(h, dh)) + sp.kron(_laplacian_1d(h, dh), I)
    conv = sp.kron(I, _forward_1d(h, dh)) + sp.kron(_forward_1d(h, dh), I)
    grid = np.arange(1, h + 1) * dh
    s1 = np.tile(grid, h)
    s2 = np.repeat(grid, h)
    A0 = (sp.identity(n) + dt * (lap + conv)).toarray()
    A1 = np.diag(dt * np.sin(np.pi * s1))
    A2 = np.diag(dt * np.cos(np.pi * s2))
    B = np.zeros((n, 1))
    B[0, 0] = dt
    C = np.ones((1, n))
    system = DelaySystem(A0=A0, delayed=[(A1, 1), (A2, 2)], B=B, C=C)
    hist = np.zeros((3, n))
    hist[0] = 1.0
    hist[1, 0] = 1.0
    hist[2, 1] = 1.0
    if check:
        _assert_stable(system, "convdiff")
    return system, InitialData.from_history(hist)


def gen_rod(n=1500, check=True):
    """Heated rod on ``[0, pi]`` with delayed feedback at lags 2 and 4.

    ``v_t = v_xx + sin(x) v + 1e4 cos(x) v(t-2) + 1e4 sin(x) v(t-4) + h(t)``.
    The second difference uses ``dx = 0.01 pi/(n+1)`` and ``dt = 0.01 dx**2``;
    the coefficient functions are sampled at the physical grid points
    ``x_j = j pi/(n+1)``.  The two inputs load the left and right halves of
    the rod (scaled by ``dt``); the two outputs read the points nearest to
    ``pi/3`` and ``2 pi/3``.  ``x(0) = e_n``, ``x(-j) = e_j``.
    """
    if n < 10:
        raise ArgumentError(f"rod needs n >= 10, got {n}")
    dx = 0.01 * math.pi / (n + 1)
    dt = 0.01 * dx ** 2
    x = np.arange(1, n + 1) * (math.pi / (n + 1))
    lap = _laplacian_1d(n, dx)
    A0 = (sp.identity(n) + dt * (lap + sp.diags(np.sin(x)))).toarray()
    A1 = np.diag(dt * 1e4 * np.cos(x))
    A2 = np.diag(dt * 1e4 * np.sin(x))
    B = np.zeros((n, 2))
    B[x <= math.pi / 2, 0] = dt
    B[x > math.pi / 2, 1] = dt
    C = np.zeros((2, n))
    C[0, np.argmin(np.abs(x - math.pi / 3))] = 1.0
    C[1, np.argmin(np.abs(x - 2 * math.pi / 3))] = 1.0
    system = DelaySystem(A0=A0, delayed=[(A1, 2), (A2, 4)], B=B, C=C)
    hist = np.zeros((5, n))
    hist[0, n - 1] = 1.0
    for j in range(1, 5):
        hist[j, j - 1] = 1.0
    if check:
        _assert_stable(system, "rod")
    return system, InitialData.from_history(hist)


def gen_random_stable(n, delays=(1,), seed=0, margin=0.1, m=1, p=1, style="dense"):
    """Random delay system with spectral radius at most ``1 - margin``.

    Parameters
    ----------
    style : {"dense", "euler"}
        ``dense`` draws Gaussian ``A0``, ``A_l``; ``euler`` mimics a forward
        Euler discretization, ``A0 = I + 0.1 Abar`` with dissipative
        ``Abar`` and small delayed couplings, which puts the poles near one.

    Notes
    -----
    If the radius exceeds ``1 - margin`` the system is rescaled by
    ``A0 -> c A0``, ``A_l -> c**(d_l+1) A_l``, which multiplies every
    eigenvalue of the lifted matrix by exactly ``c``.  The history values
    ``phi(j)`` are random unit vectors.
    """
    if not 0.0 < margin < 1.0:
        raise ArgumentError(f"margin must lie in (0, 1), got {margin}")
    delays = sorted(set(int(d) for d in delays))
    if any(d < 1 for d in delays):
        raise ArgumentError("delays must be positive")
    rng = np.random.default_rng(seed)
    if style == "dense":
        A0 = rng.standard_normal((n, n)) / math.sqrt(n)
        Al = [rng.standard_normal((n, n)) / math.sqrt(n) * 0.5 for _ in delays]
    elif style == "euler":
        dt = 0.1
        M = rng.standard_normal((n, n))
        Abar = -(M @ M.T / n + 0.5 * np.eye(n)) + 0.5 * rng.standard_normal((n, n)) / math.sqrt(n)
        A0 = np.eye(n) + dt * Abar
        Al = [dt * 0.3 * rng.standard_normal((n, n)) / math.sqrt(n) for _ in delays]
    else:
        raise ArgumentError(f"unknown style {style!r}")
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((p, n))
    D = max(delays) if delays else 0
    hist = rng.standard_normal((D + 1, n))
    hist /= np.linalg.norm(hist, axis=1, keepdims=True)
    system = DelaySystem(A0=A0, delayed=list(zip(Al, delays)), B=B, C=C)
    target = 1.0 - margin
    rho = spectral_radius(system)
    if rho > target:
        c = target / rho * (1.0 - 1e-12)
        system = DelaySystem(A0=c * A0, delayed=[(c ** (d + 1) * A, d) for A, d in zip(Al, delays)],
                             B=B, C=C)
        rho = spectral_radius(system)
        if rho > target:
            raise DomainError("rescaling failed to reach the requested margin", spectral_radius=rho)
    return system, InitialData.from_history(hist)


@dataclass(frozen=True)
class BenchmarkSpec:
    """Parameters of one generated benchmark.

    ``size`` is ``n`` (platoon, rod, random) or ``h`` (convdiff).
    """

    which: str
    size: int
    delays: tuple = ()
    seed: int = 0
    dt: float = 0.005
    margin: float = 0.1
    extra: dict = field(default_factory=dict)

    DEFAULT_SIZE = {"platoon": 512, "convdiff": 25, "rod": 1500, "random": 30}

    def generate(self, check=True):
        if self.which == "platoon":
            return gen_platoon(self.size, self.dt, check=check)
        if self.which == "convdiff":
            return gen_convdiff(self.size, check=check)
        if self.which == "rod":
            return gen_rod(self.size, check=check)
        if self.which == "random":
            return gen_random_stable(self.size, self.delays or (1,), self.seed, self.margin,
                                     **self.extra)
        raise ArgumentError(f"unknown benchmark {self.which!r}")

    def as_dict(self):
        d = {"which": self.which, "size": self.size}
        if self.which == "platoon":
            d["dt"] = self.dt
        if self.which == "random":
            d.update(delays=list(self.delays or (1,)), seed=self.seed, margin=self.margin, **self.extra)
        return d


def parse_benchmark(text, seed=None):
    """Parse ``name[:key=value,...]``, e.g. ``convdiff:h=25`` or
    ``random:n=30,delays=1+2,seed=7,m=2``."""
    name, _, rest = text.partition(":")
    name = name.strip()
    if name not in BenchmarkSpec.DEFAULT_SIZE:
        raise ArgumentError(f"unknown benchmark {name!r}; choose from "
                            + ", ".join(sorted(BenchmarkSpec.DEFAULT_SIZE)))
    kw = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise ArgumentError(f"malformed benchmark option {item!r}")
        kw[key.strip()] = val.strip()
    try:
        size = int(kw.pop("n", kw.pop("h", BenchmarkSpec.DEFAULT_SIZE[name])))
        delays = tuple(int(d) for d in kw.pop("delays").split("+")) if "delays" in kw else ()
        seed_val = int(kw.pop("seed", 0 if seed is None else seed))
        dt = float(kw.pop("dt", 0.005))
        margin = float(kw.pop("margin", 0.1))
        extra = {}
        for key in ("m", "p"):
            if key in kw:
                extra[key] = int(kw.pop(key))
        if "style" in kw:
            extra["style"] = kw.pop("style")
    except ValueError as exc:
        raise ArgumentError(f"bad benchmark option in {text!r}: {exc}")
    if kw:
        raise ArgumentError(f"unknown benchmark options {sorted(kw)}")
    return BenchmarkSpec(which=name, size=size, delays=delays, seed=seed_val, dt=dt,
                         margin=margin, extra=extra)
