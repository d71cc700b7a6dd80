"""Concrete weak metric spaces.

Euclidean space, the Poincare disk (with its closed-form boundary
functionals), the positive-definite cone with the symmetric Thompson
metric and its asymmetric Funk-type half, the stretch metric on sampled
distance functions, and the sup-log-Jacobian metric on circle
diffeomorphisms.  The Funk and stretch metrics genuinely take negative
values and are asymmetric.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import cmath
import math

import numpy as np
import scipy.linalg

from .core import MetricDomainError, DegenerateInputError, WeakMetricSpace


class NotSpdError(ValueError):
    """Matrix is not symmetric positive definite."""


class NotDiffeomorphismError(ValueError):
    """Circle map has a nonpositive derivative on the evaluation grid."""


# ---------------------------------------------------------------------------
# Euclidean

def euclidean_dist(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise MetricDomainError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return float(np.linalg.norm(x - y))


def euclidean_space(dim: int = 3) -> WeakMetricSpace:
    def sample(rng):
        return rng.normal(size=dim)

    return WeakMetricSpace(name=f"euclidean{dim}", dist=euclidean_dist,
                           sample_point=sample)


# ---------------------------------------------------------------------------
# Poincare disk

def _check_disk(z: complex) -> complex:
    z = complex(z)
    if abs(z) >= 1.0:
        raise MetricDomainError(f"point {z!r} not strictly inside the unit disk")
    return z


def poincare_dist(z, w) -> float:
    """2 artanh |(z-w)/(1 - conj(z) w)|."""
    z = _check_disk(z)
    w = _check_disk(w)
    num = abs(z - w)
    den = abs(1.0 - z.conjugate() * w)
    return 2.0 * math.atanh(num / den)


def busemann_disk(xi, z) -> float:
    """Boundary functional of the disk: log(|xi - z|^2 / (1 - |z|^2)).

    Pointwise limit of h_x(z) for anchors x -> xi radially, normalized so
    that the value at the origin is 0.
    """
    xi = complex(xi)
    if abs(abs(xi) - 1.0) > 1e-12:
        raise MetricDomainError(f"xi must be on the unit circle, got |xi|={abs(xi)}")
    z = _check_disk(z)
    return math.log(abs(xi - z) ** 2 / (1.0 - abs(z) ** 2))


def mobius_disk(a: complex) -> Callable[[complex], complex]:
    """Disk automorphism z -> (z + a) / (1 + conj(a) z)."""
    a = complex(a)
    if abs(a) >= 1.0:
        raise MetricDomainError("Mobius parameter must lie inside the disk")

    def f(z: complex) -> complex:
        z = complex(z)
        return (z + a) / (1.0 + a.conjugate() * z)

    return f


def poincare_space() -> WeakMetricSpace:
    def sample(rng):
        r = 0.95 * math.sqrt(rng.random())
        theta = 2.0 * math.pi * rng.random()
        return r * cmath.exp(1j * theta)

    return WeakMetricSpace(name="poincare", dist=poincare_dist,
                           sample_point=sample,
                           in_domain=lambda z: abs(complex(z)) < 1.0)


# ---------------------------------------------------------------------------
# Positive-definite cone: Thompson and Funk

def sym_part(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + m.T)


def is_spd(m: np.ndarray, sym_tol: float = 1e-12) -> bool:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    if np.max(np.abs(m - m.T)) > sym_tol * max(1.0, np.max(np.abs(m))):
        return False
    try:
        np.linalg.cholesky(sym_part(m))
    except np.linalg.LinAlgError:
        return False
    return True


def _require_spd(m, label: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or not np.isfinite(m).all() \
            or abs(m - m.T).max() > 1e-12 * max(1.0, abs(m).max()):
        raise NotSpdError(f"{label} is not symmetric positive definite")
    m = 0.5 * (m + m.T)
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        raise NotSpdError(f"{label} is not symmetric positive definite") from None
    return m


def sym_log(m: np.ndarray) -> np.ndarray:
    """Matrix logarithm of an SPD matrix via symmetric eigendecomposition."""
    m = _require_spd(m, "argument of sym_log")
    w, v = np.linalg.eigh(m)
    return (v * np.log(w)) @ v.T


def _pencil_log_eigs(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """log of the generalized eigenvalues of (q, p), both SPD."""
    p = _require_spd(p, "p")
    q = _require_spd(q, "q")
    if p.shape != q.shape:
        raise MetricDomainError(f"dimension mismatch: {p.shape} vs {q.shape}")
    # finiteness was already vetted by the SPD checks above
    return np.log(scipy.linalg.eigh(q, p, eigvals_only=True, check_finite=False))


def thompson_dist(p, q) -> float:
    """Spectral norm of log(p^{-1/2} q p^{-1/2}).

    Equals sup over unit vectors v of |log (qv,v)/(pv,v)|.
    """
    return float(np.max(np.abs(_pencil_log_eigs(p, q))))


def funk_dist(p, q) -> float:
    """log of the largest generalized eigenvalue of (q, p); may be negative.

    Asymmetric half of the Thompson metric:
    max(funk(p,q), funk(q,p)) = thompson(p,q).
    """
    return float(np.max(_pencil_log_eigs(p, q)))


def random_spd(rng: np.random.Generator, dim: int) -> np.ndarray:
    a = rng.normal(size=(dim, dim))
    scale = math.exp(rng.uniform(-1.0, 1.0))
    return scale * (a @ a.T + 0.05 * np.eye(dim))


def thompson_space(dim: int = 3) -> WeakMetricSpace:
    return WeakMetricSpace(name=f"thompson{dim}", dist=thompson_dist,
                           sample_point=lambda rng: random_spd(rng, dim))


def funk_space(dim: int = 3) -> WeakMetricSpace:
    return WeakMetricSpace(name=f"funk{dim}", dist=funk_dist,
                           sample_point=lambda rng: random_spd(rng, dim))


# ---------------------------------------------------------------------------
# Stretch metric on sampled distance functions

@dataclass(frozen=True)
class SampledDistanceFunction:
    """A distance function evaluated on a fixed finite sample.

    ``point_fn`` is the ambient distance function; ``transform`` is an
    optional map applied to the sample points before evaluation, so that
    pullbacks compose maps instead of materializing tables.  ``table_fn``
    optionally evaluates the whole pairwise table from a point list in one
    vectorized call; it must agree with ``point_fn`` entrywise.
    """

    sample: tuple
    point_fn: Callable[[np.ndarray, np.ndarray], float]
    transform: Optional[Callable[[np.ndarray], np.ndarray]] = None
    table_fn: Optional[Callable] = None
    # sample and point_fn are fixed, so the table is computed at most once
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def _mapped(self, i: int):
        x = self.sample[i]
        if self.transform is not None:
            x = self.transform(x)
            if not np.all(np.isfinite(np.asarray(x, dtype=float))):
                raise MetricDomainError(
                    f"transform mapped sample point {i} outside the domain")
        return x

    def values(self, i: int, j: int) -> float:
        if i == j:
            return 0.0
        v = float(self.point_fn(self._mapped(i), self._mapped(j)))
        if not math.isfinite(v):
            raise MetricDomainError(f"non-finite distance value at ({i}, {j})")
        return v

    def matrix(self) -> np.ndarray:
        if "matrix" in self._cache:
            return self._cache["matrix"]
        n = len(self.sample)
        pts = [self._mapped(i) for i in range(n)]
        if self.table_fn is not None:
            out = np.asarray(self.table_fn(pts), dtype=float)
            if out.shape != (n, n) or not np.isfinite(out).all():
                raise MetricDomainError("table_fn produced an invalid table")
            np.fill_diagonal(out, 0.0)
        else:
            out = np.zeros((n, n))
            for i in range(n):
                for j in range(n):
                    if i != j:
                        out[i, j] = self.point_fn(pts[i], pts[j])
        self._cache["matrix"] = out
        return out


def stretch_dist(d1: SampledDistanceFunction, d2: SampledDistanceFunction) -> float:
    """log of the max sampled ratio d2(x,y)/d1(x,y) over x != y; may be negative."""
    if len(d1.sample) != len(d2.sample):
        raise DegenerateInputError("distance functions sampled on different sets")
    m1 = d1.matrix()
    m2 = d2.matrix()
    n = len(d1.sample)
    off = ~np.eye(n, dtype=bool)
    if np.any(m1[off] <= 0.0) or np.any(m2[off] <= 0.0):
        raise DegenerateInputError("zero or negative off-diagonal distance value")
    return float(np.log(np.max(m2[off] / m1[off])))


def pullback(T: Callable, d: SampledDistanceFunction) -> SampledDistanceFunction:
    """(T*d)(x, y) := d(Tx, Ty), composed lazily."""
    prev = d.transform
    if prev is None:
        composed = T
    else:
        def composed(x, _prev=prev, _T=T):
            return _prev(_T(x))
    return SampledDistanceFunction(sample=d.sample, point_fn=d.point_fn,
                                   transform=composed, table_fn=d.table_fn)


def _default_stretch_sample(rng: np.random.Generator, n_points: int = 6):
    return tuple(rng.normal(size=2) for _ in range(n_points))


def stretch_space(base_sample=None, seed: int = 12345) -> WeakMetricSpace:
    """Stretch metric over random conformal-factor perturbations of the norm.

    Sampled points are distance functions ||x-y|| * exp((phi(x)+phi(y))/2)
    for a random bounded field phi, all bi-Lipschitz to the ambient norm.
    """
    if base_sample is None:
        base_sample = _default_stretch_sample(np.random.Generator(np.random.PCG64(seed)))
    base_sample = tuple(np.asarray(p, dtype=float) for p in base_sample)

    def sample(rng):
        a = rng.uniform(-1.0, 1.0)
        k = rng.normal(size=2)
        phase = rng.uniform(0.0, 2.0 * math.pi)

        def point_fn(x, y, _a=a, _k=k, _p=phase):
            phi_x = _a * math.sin(float(np.dot(_k, x)) + _p)
            phi_y = _a * math.sin(float(np.dot(_k, y)) + _p)
            return float(np.linalg.norm(np.asarray(x) - np.asarray(y))) \
                * math.exp(0.5 * (phi_x + phi_y))

        def table_fn(pts, _a=a, _k=k, _p=phase):
            P = np.asarray(pts, dtype=float)
            gaps = np.linalg.norm(P[:, None, :] - P[None, :, :], axis=-1)
            phi = _a * np.sin(P @ _k + _p)
            return gaps * np.exp(0.5 * (phi[:, None] + phi[None, :]))

        return SampledDistanceFunction(sample=base_sample, point_fn=point_fn,
                                       table_fn=table_fn)

    return WeakMetricSpace(name="stretch", dist=stretch_dist, sample_point=sample)


def ambient_norm_sdf(base_sample) -> SampledDistanceFunction:
    base_sample = tuple(np.asarray(p, dtype=float) for p in base_sample)

    def table_fn(pts):
        P = np.asarray(pts, dtype=float)
        return np.linalg.norm(P[:, None, :] - P[None, :, :], axis=-1)

    return SampledDistanceFunction(
        sample=base_sample,
        point_fn=lambda x, y: float(np.linalg.norm(np.asarray(x) - np.asarray(y))),
        table_fn=table_fn)


# ---------------------------------------------------------------------------
# Circle diffeomorphisms and the sup-log-Jacobian metric

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class CircleMap:
    """Orientation-preserving circle map with an explicit derivative.

    ``f`` and ``derivative`` must accept numpy arrays of angles.  If no
    derivative is supplied a central difference with step 1e-6 is used.
    """

    f: Callable[[np.ndarray], np.ndarray]
    derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def deriv(self, theta: np.ndarray) -> np.ndarray:
        if self.derivative is not None:
            return np.asarray(self.derivative(theta), dtype=float)
        h = 1e-6
        return (np.asarray(self.f(theta + h)) - np.asarray(self.f(theta - h))) / (2.0 * h)


def identity_circle_map() -> CircleMap:
    return CircleMap(f=lambda t: np.asarray(t, dtype=float),
                     derivative=lambda t: np.ones_like(np.asarray(t, dtype=float)))


def rotation_circle_map(angle: float) -> CircleMap:
    return CircleMap(f=lambda t, _a=angle: np.asarray(t, dtype=float) + _a,
                     derivative=lambda t: np.ones_like(np.asarray(t, dtype=float)))


def sine_circle_map(amplitude: float, phase: float = 0.0, shift: float = 0.0) -> CircleMap:
    """theta -> theta + shift + amplitude*sin(theta + phase); needs |amplitude| < 1."""
    if abs(amplitude) >= 1.0:
        raise NotDiffeomorphismError("|amplitude| must be < 1 for a diffeomorphism")

    def f(t, _a=amplitude, _p=phase, _s=shift):
        t = np.asarray(t, dtype=float)
        return t + _s + _a * np.sin(t + _p)

    def df(t, _a=amplitude, _p=phase):
        t = np.asarray(t, dtype=float)
        return 1.0 + _a * np.cos(t + _p)

    return CircleMap(f=f, derivative=df)


def mobius_circle_map(a: float) -> CircleMap:
    """Circle map induced by the disk automorphism z -> (z+a)/(1+az), real a.

    Derivative (1 - a^2) / |1 + a e^{i theta}|^2; multiplier (1+a)/(1-a) at
    the repelling fixed point theta = pi.
    """
    a = float(a)
    if abs(a) >= 1.0:
        raise NotDiffeomorphismError("|a| must be < 1")

    def f(t, _a=a):
        t = np.asarray(t, dtype=float)
        z = np.exp(1j * t)
        return np.angle((z + _a) / (1.0 + _a * z)) % _TWO_PI

    def df(t, _a=a):
        t = np.asarray(t, dtype=float)
        return (1.0 - _a * _a) / np.abs(1.0 + _a * np.exp(1j * t)) ** 2

    return CircleMap(f=f, derivative=df)


def jacobian_dist(f: CircleMap, g: CircleMap, grid: int = 256) -> float:
    """max over the grid of |log(g'(theta)/f'(theta))|; symmetric."""
    if grid < 16:
        raise DegenerateInputError("grid must be >= 16")
    theta = np.linspace(0.0, _TWO_PI, grid, endpoint=False)
    df = f.deriv(theta)
    dg = g.deriv(theta)
    if np.any(df <= 0.0) or np.any(dg <= 0.0):
        raise NotDiffeomorphismError("nonpositive derivative on the grid")
    return float(np.max(np.abs(np.log(dg / df))))


def jacobian_space(grid: int = 128) -> WeakMetricSpace:
    def sample(rng):
        return sine_circle_map(amplitude=rng.uniform(-0.8, 0.8),
                               phase=rng.uniform(0.0, _TWO_PI),
                               shift=rng.uniform(0.0, _TWO_PI))

    return WeakMetricSpace(name="jacobian",
                           dist=lambda f, g: jacobian_dist(f, g, grid),
                           sample_point=sample)


# ---------------------------------------------------------------------------

def registered_spaces(dim: int = 3) -> dict:
    """The six metrics exercised by the axiom and functional suites."""
    return {
        "euclidean": euclidean_space(dim),
        "poincare": poincare_space(),
        "thompson": thompson_space(dim),
        "funk": funk_space(dim),
        "stretch": stretch_space(),
        "jacobian": jacobian_space(),
    }


def registered_basepoints(spaces: dict) -> dict:
    """Natural basepoints for the registered spaces, keyed like the spaces."""
    out = {}
    for name, sp in spaces.items():
        if name == "euclidean":
            dim = int(sp.name.removeprefix("euclidean"))
            out[name] = np.zeros(dim)
        elif name == "poincare":
            out[name] = 0j
        elif name in ("thompson", "funk"):
            dim = int(sp.name.removeprefix(name))
            out[name] = np.eye(dim)
        elif name == "stretch":
            probe = sp.sample_point(np.random.Generator(np.random.PCG64(0)))
            out[name] = ambient_norm_sdf(probe.sample)
        elif name == "jacobian":
            out[name] = identity_circle_map()
    return out
