"""Weak-metric contracts.

A weak metric is a distance function with d(x, x) = 0 and the triangle
inequality, but possibly asymmetric and possibly negative.  This module
defines the space contract, symmetrization, metric functionals
h(y) = d(y, anchor) - d(x0, anchor), and sampled nonexpansiveness
certification.  Concrete spaces live in :mod:`horoflow.spaces`.
"""

from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence

import math

import numpy as np

from .seeding import trial_rng

IDENTITY_TOL = 1e-12
INEQUALITY_TOL = 1e-9


class MetricDomainError(ValueError):
    """A distance evaluation left the space's domain or was non-finite."""


class DegenerateInputError(ValueError):
    """Inputs too degenerate for the requested computation."""


@dataclass(frozen=True)
class WeakMetricSpace:
    """A point domain plus a (possibly asymmetric, possibly negative) distance.

    ``sample_point`` draws a random point from the domain given an rng; it is
    required by the sampled axiom/certification suites.  ``in_domain`` is an
    optional membership predicate used for orbit truncation.
    """

    name: str
    dist: Callable[[Any, Any], float]
    separates_points: bool = True
    sample_point: Optional[Callable[[np.random.Generator], Any]] = None
    in_domain: Optional[Callable[[Any], bool]] = None

    def distance(self, x, y) -> float:
        v = float(self.dist(x, y))
        if not math.isfinite(v):
            raise MetricDomainError(
                f"{self.name}: non-finite distance {v!r} for pair ({x!r}, {y!r})"
            )
        return v


@dataclass(frozen=True)
class MetricFunctionalTable:
    """A metric functional sampled on a finite probe set, normalized at x0."""

    basepoint: Any
    anchor: Any
    probes: tuple
    values: tuple


@dataclass(frozen=True)
class NonexpansiveReport:
    max_ratio: float
    worst_pair: tuple
    samples_used: int

    def passes(self, tol: float = INEQUALITY_TOL) -> bool:
        return self.max_ratio <= 1.0 + tol


def symmetrize(space: WeakMetricSpace, x, y) -> float:
    """max{d(x,y), d(y,x)}; nonnegative for any weak metric."""
    return max(space.distance(x, y), space.distance(y, x))


def eval_metric_functional(space: WeakMetricSpace, x0, anchor, probe) -> float:
    """h_anchor(probe) = d(probe, anchor) - d(x0, anchor)."""
    return space.distance(probe, anchor) - space.distance(x0, anchor)


def functional_table(space: WeakMetricSpace, x0, anchor, probes: Sequence) -> MetricFunctionalTable:
    if len(probes) == 0:
        raise DegenerateInputError("probes must be nonempty")
    values = tuple(eval_metric_functional(space, x0, anchor, p) for p in probes)
    return MetricFunctionalTable(basepoint=x0, anchor=anchor,
                                 probes=tuple(probes), values=values)


def certify_nonexpansive(space: WeakMetricSpace, map_fn: Callable,
                         pair_sampler: Callable[[np.random.Generator], tuple],
                         n_samples: int, tol: float = INEQUALITY_TOL,
                         seed: int = 0) -> NonexpansiveReport:
    """Sampled nonexpansiveness check under the symmetrized metric.

    The ratio D(f x, f y) / D(x, y) uses the symmetrization D so it stays
    well defined when d itself may be nonpositive.  Coincident pairs
    (D(x, y) = 0) are skipped; if every pair is skipped the sampler is
    rejected.
    """
    if n_samples < 1:
        raise DegenerateInputError("n_samples must be >= 1")
    rng = trial_rng(seed, 0)
    max_ratio = -math.inf
    worst = None
    used = 0
    for _ in range(n_samples):
        x, y = pair_sampler(rng)
        dxy = symmetrize(space, x, y)
        if dxy <= 0.0:
            continue
        ratio = symmetrize(space, map_fn(x), map_fn(y)) / dxy
        used += 1
        if ratio > max_ratio:
            max_ratio = ratio
            worst = (x, y)
    if used == 0:
        raise DegenerateInputError("all sampled pairs were coincident")
    return NonexpansiveReport(max_ratio=max_ratio, worst_pair=worst, samples_used=used)


@dataclass(frozen=True)
class AxiomReport:
    space: str
    n_triples: int
    max_identity_error: float
    max_triangle_violation: float  # relative slack
    min_pair_symmetrization: float


def check_weak_metric_axioms(space: WeakMetricSpace, n_triples: int,
                             seed: int = 0) -> AxiomReport:
    """Sample triples and measure the worst-case axiom defects.

    Triangle violations are reported relative to the magnitude of the
    distances involved, since transcendental distance formulas accumulate
    rounding proportional to their size.
    """
    if space.sample_point is None:
        raise DegenerateInputError(f"{space.name}: no point sampler registered")
    rng = trial_rng(seed, 0)
    max_id = 0.0
    max_tri = 0.0
    min_pair = math.inf
    for _ in range(n_triples):
        x = space.sample_point(rng)
        y = space.sample_point(rng)
        z = space.sample_point(rng)
        max_id = max(max_id, abs(space.distance(x, x)))
        dxy = space.distance(x, y)
        dxz = space.distance(x, z)
        dzy = space.distance(z, y)
        scale = max(1.0, abs(dxy), abs(dxz), abs(dzy))
        max_tri = max(max_tri, (dxy - dxz - dzy) / scale)
        min_pair = min(min_pair, dxy + space.distance(y, x))
    return AxiomReport(space=space.name, n_triples=n_triples,
                       max_identity_error=max_id,
                       max_triangle_violation=max_tri,
                       min_pair_symmetrization=min_pair)


@dataclass(frozen=True)
class FunctionalBoundReport:
    space: str
    n_samples: int
    max_lower_violation: float   # of -d(x0,y) <= h(y)
    max_upper_violation: float   # of h(y) <= d(y,x0)
    max_continuity_violation: float  # of |h(y)-h(z)| <= max{d(y,z), d(z,y)}


def check_functional_bounds(space: WeakMetricSpace, x0, n_samples: int,
                            seed: int = 0) -> FunctionalBoundReport:
    """Worst-case defects of the metric-functional bounds on random samples."""
    if space.sample_point is None:
        raise DegenerateInputError(f"{space.name}: no point sampler registered")
    rng = trial_rng(seed, 0)
    low = up = cont = 0.0
    for _ in range(n_samples):
        anchor = space.sample_point(rng)
        y = space.sample_point(rng)
        z = space.sample_point(rng)
        dxa = space.distance(x0, anchor)
        hy = space.distance(y, anchor) - dxa
        hz = space.distance(z, anchor) - dxa
        low = max(low, -space.distance(x0, y) - hy)
        up = max(up, hy - space.distance(y, x0))
        cont = max(cont, abs(hy - hz) - symmetrize(space, y, z))
    return FunctionalBoundReport(space=space.name, n_samples=n_samples,
                                 max_lower_violation=low,
                                 max_upper_violation=up,
                                 max_continuity_violation=cont)
