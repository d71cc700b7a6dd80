"""Ergodic cocycles of nonexpansive maps.

Drivers emit seeded sequences of maps (or matrices); the engine evaluates
orbits u(n)x0 in a declared composition order, the subadditive distance
cocycle a(n) = d(x0, u(n)x0), the top exponent lim a(n)/n, and a
convergence diagnostic comparing -h(u(n)x0)/n against a(n)/n for the
metric functional anchored at the final orbit point.
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import math

import numpy as np

from .core import DegenerateInputError, WeakMetricSpace
from .seeding import trial_rng

GOLDEN_ROTATION = (math.sqrt(5.0) - 1.0) / 2.0

RIGHT = "right_increment"
LEFT = "left_increment"


class IntegrabilityError(RuntimeError):
    """A sampled step distance was non-finite."""


class EstimationError(RuntimeError):
    """Too many trials were truncated for a trustworthy estimate."""


@dataclass(frozen=True)
class ErgodicDriver:
    """A seeded generator of map sequences.

    kind:
      - ``iid_finite``: i.i.d. choice among ``maps`` with ``weights``;
      - ``iid_parametric``: ``sampler(rng)`` draws a fresh map each step;
      - ``rotation``: an irrational circle rotation by ``angle`` with the
        unit interval partitioned at ``breakpoints`` (ascending, last 1.0),
        interval i labeled by maps[i].

    ``order`` declares the composition convention: ``right_increment``
    appends new maps innermost (u(n) = g1 g2 ... gn), ``left_increment``
    outermost (v(n) = gn ... g2 g1).
    """

    kind: str
    seed: int
    order: str = RIGHT
    maps: tuple = ()
    weights: tuple = ()
    sampler: Optional[Callable[[np.random.Generator], Any]] = None
    angle: float = GOLDEN_ROTATION
    breakpoints: tuple = ()

    def __post_init__(self):
        if self.kind not in ("iid_finite", "iid_parametric", "rotation"):
            raise ValueError(f"unknown driver kind {self.kind!r}")
        if self.order not in (RIGHT, LEFT):
            raise ValueError(f"unknown composition order {self.order!r}")
        if self.kind == "iid_finite":
            if not self.maps:
                raise ValueError("iid_finite driver needs maps")
            w = self.weights or tuple(1.0 / len(self.maps) for _ in self.maps)
            if abs(sum(w) - 1.0) > 1e-12:
                raise ValueError("probability weights must sum to 1")
            object.__setattr__(self, "weights", tuple(w))
        if self.kind == "iid_parametric" and self.sampler is None:
            raise ValueError("iid_parametric driver needs a sampler")
        if self.kind == "rotation":
            if not self.maps:
                raise ValueError("rotation driver needs maps")
            bp = self.breakpoints or tuple((i + 1) / len(self.maps)
                                           for i in range(len(self.maps)))
            if len(bp) != len(self.maps) or abs(bp[-1] - 1.0) > 1e-12 \
                    or any(b2 <= b1 for b1, b2 in zip(bp, bp[1:])):
                raise ValueError("breakpoints must ascend to 1.0, one per map")
            object.__setattr__(self, "breakpoints", tuple(bp))

    def rng(self, trial: int) -> np.random.Generator:
        return trial_rng(self.seed, trial)

    def elements(self, trial: int, n: int) -> list:
        """The first n emitted maps g(omega), g(T omega), ..., deterministically."""
        rng = self.rng(trial)
        if self.kind == "iid_finite":
            idx = rng.choice(len(self.maps), size=n, p=np.asarray(self.weights))
            return [self.maps[i] for i in idx]
        if self.kind == "iid_parametric":
            return [self.sampler(rng) for _ in range(n)]
        theta0 = rng.random()
        pos = (theta0 + self.angle * np.arange(n)) % 1.0
        idx = np.searchsorted(np.asarray(self.breakpoints), pos, side="right")
        idx = np.minimum(idx, len(self.maps) - 1)
        return [self.maps[i] for i in idx]


def constant_driver(element, seed: int = 0, order: str = RIGHT) -> ErgodicDriver:
    return ErgodicDriver(kind="iid_finite", seed=seed, order=order,
                         maps=(element,), weights=(1.0,))


def apply_element(g, x):
    """Apply a driver element to a point: callables act by call, arrays by matvec."""
    if callable(g):
        return g(x)
    return np.asarray(g) @ x


# ---------------------------------------------------------------------------
# Orbits

@dataclass(frozen=True)
class OrbitResult:
    points: list          # u(1)x0 ... u(m)x0, m = completed
    completed: int
    truncated: bool


def _in_domain(space: Optional[WeakMetricSpace], p) -> bool:
    if space is None or space.in_domain is None:
        return True
    return space.in_domain(p)


def generate_orbit(driver: ErgodicDriver, space: Optional[WeakMetricSpace],
                   x0, n: int, trial: int = 0) -> OrbitResult:
    """Orbit (u(1)x0, ..., u(n)x0) in the driver's declared order.

    Right-increment orbits recompute each prefix fold (cost O(n^2) map
    applications); use :func:`orbit_at` with checkpoints for long runs.
    Leaving the space's domain truncates the orbit with a marker.
    """
    if n < 1:
        raise DegenerateInputError("n must be >= 1")
    gs = driver.elements(trial, n)
    pts = []
    if driver.order == LEFT:
        y = x0
        for k, g in enumerate(gs, start=1):
            y = apply_element(g, y)
            if not _in_domain(space, y):
                return OrbitResult(points=pts, completed=k - 1, truncated=True)
            pts.append(y)
        return OrbitResult(points=pts, completed=n, truncated=False)
    for k in range(1, n + 1):
        y = x0
        for i in range(k - 1, -1, -1):
            y = apply_element(gs[i], y)
        if not _in_domain(space, y):
            return OrbitResult(points=pts, completed=k - 1, truncated=True)
        pts.append(y)
    return OrbitResult(points=pts, completed=n, truncated=False)


def orbit_at(driver: ErgodicDriver, space: Optional[WeakMetricSpace],
             x0, ks: Sequence[int], trial: int = 0):
    """Orbit points u(k)x0 at the requested indices only.

    Returns (dict k -> point, truncated_at or None).  For right-increment
    drivers each checkpoint costs one fold of length k, so geometric
    checkpoint ladders stay O(sum k).
    """
    ks = sorted(set(int(k) for k in ks))
    if not ks or ks[0] < 1:
        raise DegenerateInputError("checkpoints must be >= 1")
    n = ks[-1]
    gs = driver.elements(trial, n)
    out = {}
    if driver.order == LEFT:
        y = x0
        want = set(ks)
        for k, g in enumerate(gs, start=1):
            y = apply_element(g, y)
            if not _in_domain(space, y):
                return out, k
            if k in want:
                out[k] = y
        return out, None
    for k in ks:
        y = x0
        for i in range(k - 1, -1, -1):
            y = apply_element(gs[i], y)
        if not _in_domain(space, y):
            return out, k
        out[k] = y
    return out, None


def geometric_checkpoints(n: int, count: int = 16, start: int = 1) -> list:
    """count roughly geometrically spaced integers from start to n, inclusive."""
    if n < start:
        raise DegenerateInputError("n must be >= start")
    ks = np.unique(np.geomspace(start, n, num=count).round().astype(int))
    ks = ks[(ks >= start) & (ks <= n)]
    if ks[-1] != n:
        ks = np.append(ks, n)
    return [int(k) for k in ks]


# ---------------------------------------------------------------------------
# Subadditive cocycle and the top exponent

@dataclass(frozen=True)
class SubadditiveTrace:
    a: np.ndarray          # a[0] = 0, a[k] = d(x0, u(k)x0)
    basepoint: Any
    truncated: bool


@dataclass(frozen=True)
class LyapunovEstimate:
    lambda_hat: float
    n: int
    trials: int
    per_trial: np.ndarray
    std_error: float
    tail_slope: float
    truncated_trials: int = 0


def subadditive_trace(driver: ErgodicDriver, space: WeakMetricSpace,
                      x0, n: int, trial: int = 0) -> SubadditiveTrace:
    orbit = generate_orbit(driver, space, x0, n, trial)
    a = np.zeros(orbit.completed + 1)
    for k, p in enumerate(orbit.points, start=1):
        a[k] = space.distance(x0, p)
    return SubadditiveTrace(a=a, basepoint=x0, truncated=orbit.truncated)


def _tail_slope(ks: np.ndarray, ratios: np.ndarray) -> float:
    """Least-squares slope of a(k)/k against log k over the last decade."""
    if len(ks) < 2:
        return 0.0
    x = np.log(ks.astype(float))
    A = np.vstack([x, np.ones_like(x)]).T
    coef = np.linalg.lstsq(A, ratios, rcond=None)[0]
    return float(coef[0])


def estimate_top_exponent(driver: ErgodicDriver, space: WeakMetricSpace,
                          x0, n: int, trials: int) -> LyapunovEstimate:
    """Monte-Carlo estimate of lim a(n)/n across independent seeded trials.

    Truncated trials are excluded and counted; more than 10% truncation is
    an estimation error.  tail_slope is the drift of the mean ratio a(k)/k
    over checkpoints in [n/10, n], a convergence diagnostic.
    """
    if trials < 1 or n < 10:
        raise DegenerateInputError("need trials >= 1 and n >= 10")
    tail_ks = geometric_checkpoints(n, count=8, start=max(1, n // 10))
    per_trial = []
    tail_sum = np.zeros(len(tail_ks))
    tail_cnt = 0
    truncated = 0
    for t in range(trials):
        pts, cut = orbit_at(driver, space, x0, tail_ks, trial=t)
        if cut is not None:
            truncated += 1
            continue
        ratios = np.array([space.distance(x0, pts[k]) / k for k in tail_ks])
        per_trial.append(ratios[-1])
        tail_sum += ratios
        tail_cnt += 1
    if truncated > 0.1 * trials:
        raise EstimationError(f"{truncated}/{trials} trials truncated")
    per_trial = np.asarray(per_trial)
    lam = float(np.mean(per_trial))
    se = float(np.std(per_trial, ddof=1) / math.sqrt(len(per_trial))) \
        if len(per_trial) > 1 else 0.0
    slope = _tail_slope(np.asarray(tail_ks, dtype=float), tail_sum / max(tail_cnt, 1))
    return LyapunovEstimate(lambda_hat=lam, n=n, trials=trials,
                            per_trial=per_trial, std_error=se,
                            tail_slope=slope, truncated_trials=truncated)


# ---------------------------------------------------------------------------
# Integrability

@dataclass(frozen=True)
class IntegrabilityReport:
    mean_step: float
    heavy_tail_flag: bool
    samples_used: int


def check_integrability(driver: ErgodicDriver, space: WeakMetricSpace,
                        x0, samples: int = 1000) -> IntegrabilityReport:
    """Mean of |d(x0, g x0)| over the driver's one-step distribution.

    Finite-support and rotation drivers are integrated exactly over their
    weights / interval lengths.  Parametric drivers are sampled, with a
    heaviness flag raised when running means over doubling windows fail to
    stabilize.
    """
    def step(g) -> float:
        v = abs(space.distance(x0, apply_element(g, x0)))
        if not math.isfinite(v):
            raise IntegrabilityError("non-finite one-step distance")
        return v

    if driver.kind == "iid_finite":
        mean = sum(w * step(g) for g, w in zip(driver.maps, driver.weights))
        return IntegrabilityReport(mean_step=mean, heavy_tail_flag=False,
                                   samples_used=len(driver.maps))
    if driver.kind == "rotation":
        edges = (0.0,) + driver.breakpoints
        mean = sum((edges[i + 1] - edges[i]) * step(g)
                   for i, g in enumerate(driver.maps))
        return IntegrabilityReport(mean_step=mean, heavy_tail_flag=False,
                                   samples_used=len(driver.maps))
    if samples < 100:
        raise DegenerateInputError("samples must be >= 100")
    rng = driver.rng(0)
    vals = np.empty(samples)
    for i in range(samples):
        vals[i] = step(driver.sampler(rng))
    cum = np.cumsum(vals)
    windows = [w for w in (100, 1000, 10000, 100000) if w <= samples]
    if windows[-1] != samples:
        windows.append(samples)
    means = [cum[w - 1] / w for w in windows]
    heavy = False
    for m1, m2 in zip(means, means[1:]):
        if abs(m2 - m1) > 0.2 * max(abs(m1), 1e-12):
            heavy = True
    return IntegrabilityReport(mean_step=float(means[-1]),
                               heavy_tail_flag=heavy, samples_used=samples)


# ---------------------------------------------------------------------------
# Metric-functional convergence diagnostic

@dataclass(frozen=True)
class GapTrace:
    ks: list
    gaps: list
    truncated: bool


def functional_gap(driver: ErgodicDriver, space: WeakMetricSpace, x0,
                   n: int, probe_budget: int = 16, trial: int = 0,
                   functional: Optional[Callable[[Any], float]] = None) -> GapTrace:
    """gap(k) = |(-1/k) h(u(k)x0) - (1/k) d(x0, u(k)x0)| at geometric checkpoints.

    By default h is the anchor-backed functional at the final orbit point
    u(n)x0; a closed-form functional (e.g. a disk boundary functional) may
    be supplied instead.  The gap is reported, not asserted to vanish.
    """
    if n < 100:
        raise DegenerateInputError("n must be >= 100")
    ks = geometric_checkpoints(n, count=probe_budget)
    pts, cut = orbit_at(driver, space, x0, ks, trial=trial)
    truncated = cut is not None
    if functional is None:
        if n not in pts:
            raise EstimationError("orbit truncated before the anchor point")
        anchor = pts[n]
        dx0a = space.distance(x0, anchor)
        functional = lambda y: space.distance(y, anchor) - dx0a
    out_ks, out_gaps = [], []
    for k in ks:
        if k not in pts:
            continue
        p = pts[k]
        gap = abs(-functional(p) / k - space.distance(x0, p) / k)
        out_ks.append(k)
        out_gaps.append(gap)
    return GapTrace(ks=out_ks, gaps=out_gaps, truncated=truncated)


# ---------------------------------------------------------------------------
# Boundary-safe hyperbolic walks
#
# Orbits of disk Mobius maps reach the floating-point boundary of the disk
# after ~38 units of hyperbolic distance, so long walks are evaluated
# through scaled 2x2 matrix products instead of disk coordinates:
# for a unit-determinant disk isometry g = [[alpha, beta], [conj beta,
# conj alpha]], d(0, g.0) = 2 arccosh |alpha|.

def mobius_matrix(a: complex) -> np.ndarray:
    """Unit-determinant matrix of the disk automorphism z -> (z+a)/(1+conj(a)z)."""
    a = complex(a)
    if abs(a) >= 1.0:
        raise DegenerateInputError("Mobius parameter must lie inside the disk")
    s = 1.0 / math.sqrt(1.0 - abs(a) ** 2)
    return np.array([[s, s * a], [s * a.conjugate(), s]], dtype=complex)


def _scaled_prefix_products(mats):
    """Normalized right-increment prefix products with log scales."""
    out = {}
    P = np.eye(2, dtype=complex)
    ls = 0.0
    prods = []
    for m in mats:
        P = P @ m
        s = float(np.max(np.abs(P)))
        P = P / s
        ls += math.log(s)
        prods.append((P.copy(), ls))
    return prods


def _dist_origin(alpha_mag_log: float) -> float:
    """2 arccosh |alpha| from log|alpha|, stable for large |alpha|."""
    if alpha_mag_log > 20.0:
        return 2.0 * (alpha_mag_log + math.log(2.0))
    x = math.exp(alpha_mag_log)
    if x < 1.0:
        x = 1.0
    return 2.0 * math.acosh(x)


def hyperbolic_walk_gap(driver: ErgodicDriver, n: int,
                        probe_budget: int = 16, trial: int = 0,
                        checkpoints=None) -> GapTrace:
    """Boundary-safe version of :func:`functional_gap` for disk Mobius drivers.

    Driver elements must be unit-determinant 2x2 complex matrices (see
    :func:`mobius_matrix`).  Distances between orbit points are computed
    from suffix products, so no disk coordinate ever reaches |z| = 1.
    Note gap(n) vanishes by construction (the functional is anchored at
    u(n)x0); pass explicit interior ``checkpoints`` for a nondegenerate
    diagnostic.
    """
    if n < 10:
        raise DegenerateInputError("n must be >= 10")
    mats = driver.elements(trial, n)
    if checkpoints is None:
        ks = geometric_checkpoints(n, count=probe_budget)
    else:
        ks = sorted(set(int(k) for k in checkpoints))
        if not ks or ks[0] < 1 or ks[-1] > n:
            raise DegenerateInputError("checkpoints must lie in [1, n]")
    prefix = _scaled_prefix_products(mats)

    def a_of(k):
        P, ls = prefix[k - 1]
        return _dist_origin(ls + math.log(abs(P[0, 0])))

    a_n = a_of(n)
    # suffix products S_k = M_{k+1} ... M_n give d(u(k)0, u(n)0)
    suffix = {}
    S = np.eye(2, dtype=complex)
    ls = 0.0
    want = set(ks)
    for j in range(n, 0, -1):
        if j in want:
            suffix[j] = _dist_origin(ls + math.log(abs(S[0, 0])))
        S = mats[j - 1] @ S
        s = float(np.max(np.abs(S)))
        S = S / s
        ls += math.log(s)
    gaps = []
    for k in ks:
        a_k = a_of(k)
        d_k_n = suffix[k] if k in suffix else 0.0
        h_uk = d_k_n - a_n
        gaps.append(abs(-h_uk / k - a_k / k))
    return GapTrace(ks=ks, gaps=gaps, truncated=False)
