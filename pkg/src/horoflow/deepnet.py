"""Nonexpansive neural layers and diffeomorphism stretch experiments.

Layer maps are affine-plus-activation with a certified operator-norm bound
obtained by power iteration; chains of such layers are nonexpansive, their
normalized outputs drift to an input-independent vector, and their
normalized Lipschitz profile collapses like 1/n.  The module also hosts
the maximal-stretch and log-Jacobian experiments for cocycles of circle
diffeomorphisms.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import math

import numpy as np

from .cocycle import ErgodicDriver, geometric_checkpoints
from .core import DegenerateInputError
from .spaces import CircleMap, NotDiffeomorphismError

_TWO_PI = 2.0 * math.pi


class NormConstraintError(ValueError):
    """A layer violates the operator-norm-at-most-1 constraint."""


def _relu(t):
    return np.maximum(t, 0.0)


def _sigmoid(t):
    return 1.0 / (1.0 + np.exp(-t))


# each activation is 1-Lipschitz componentwise
ACTIVATIONS = {"relu": _relu, "tanh": np.tanh, "sigmoid": _sigmoid}

PLAIN = "plain"               # g(x) = act(Wx + b)
RESNET_ADJOINT = "resnet_adjoint"  # T(x) = W^T act(Wx + b)


def power_iteration_norm(W) -> float:
    """Operator norm by power iteration on W^T W (two deterministic starts,
    relative tolerance 1e-12, at most 1000 iterations)."""
    W = np.asarray(W, dtype=float)
    if not np.all(np.isfinite(W)):
        raise DegenerateInputError("non-finite weight entries")
    d = W.shape[1]
    gram = W.T @ W
    starts = [np.ones(d) / math.sqrt(d)]
    col = int(np.argmax(np.linalg.norm(W, axis=0))) if W.size else 0
    e = np.zeros(d)
    e[col] = 1.0
    starts.append(e)
    best = 0.0
    for v in starts:
        lam = 0.0
        for _ in range(1000):
            w = gram @ v
            new = float(np.linalg.norm(w))
            if new == 0.0:
                break
            v = w / new
            if abs(new - lam) <= 1e-12 * max(new, 1.0):
                lam = new
                break
            lam = new
        best = max(best, lam)
    return math.sqrt(best)


def spectral_normalize(W):
    """Scale W so its operator norm is at most 1; returns (W, certified_norm).

    W is unchanged when its norm is already <= 1; see
    :func:`power_iteration_norm` for the estimator.
    """
    W = np.asarray(W, dtype=float)
    norm = power_iteration_norm(W)
    if norm > 1.0:
        return W / norm, 1.0
    return W, norm


@dataclass(frozen=True)
class LayerMap:
    """Affine-plus-activation layer with a certified operator-norm bound."""

    W: np.ndarray
    b: np.ndarray
    activation: str
    form: str = RESNET_ADJOINT
    certified_norm: float = 1.0

    def apply(self, x):
        z = ACTIVATIONS[self.activation](self.W @ x + self.b)
        if self.form == RESNET_ADJOINT:
            return self.W.T @ z
        return z

    def __call__(self, x):
        return self.apply(x)


def make_layer(W, b, activation: str, form: str = RESNET_ADJOINT,
               normalize: bool = True, audit: bool = False) -> LayerMap:
    """Build a layer, either projecting W onto the norm ball or auditing it.

    With ``normalize`` the weight is divided by its norm when above 1; with
    ``audit`` instead a violating weight is rejected.
    """
    if activation not in ACTIVATIONS:
        raise DegenerateInputError(f"unknown activation {activation!r}")
    if form not in (PLAIN, RESNET_ADJOINT):
        raise DegenerateInputError(f"unknown layer form {form!r}")
    W = np.asarray(W, dtype=float)
    b = np.asarray(b, dtype=float)
    norm = power_iteration_norm(W)
    if audit and norm > 1.0 + 1e-9:
        raise NormConstraintError(f"weight operator norm {norm:.6g} exceeds 1")
    if normalize and norm > 1.0:
        W = W / norm
        norm = 1.0
    return LayerMap(W=W, b=b, activation=activation, form=form, certified_norm=norm)


def apply_chain(layers: Sequence[LayerMap], x0):
    """Apply layers with the first layer outermost: T1(T2(...Tn(x0)))."""
    y = np.asarray(x0, dtype=float)
    for layer in reversed(layers):
        y = layer.apply(y)
    return y


@dataclass(frozen=True)
class DriftReport:
    v_hat: np.ndarray            # (trials, d)
    n: int
    cross_input_gap: float
    per_coordinate_se: np.ndarray

    @property
    def mean_v_hat(self) -> np.ndarray:
        return np.mean(self.v_hat, axis=0)


def resnet_drift(driver: ErgodicDriver, x0, n: int, trials: int) -> DriftReport:
    """Normalized deep-chain outputs u(n)x0 / n across seeded trials.

    The cross-input gap compares against the shifted input x0 + e1; by
    nonexpansiveness it is bounded by ||x0 - x0'|| / n, the assertable form
    of input independence of the drift vector.
    """
    x0 = np.asarray(x0, dtype=float)
    x1 = x0.copy()
    x1[0] += 1.0
    v_hat = np.empty((trials, x0.shape[0]))
    gap = 0.0
    for t in range(trials):
        layers = driver.elements(t, n)
        for i, layer in enumerate(layers):
            if layer.certified_norm > 1.0 + 1e-9:
                raise NormConstraintError(
                    f"trial {t}: layer {i} has operator norm "
                    f"{layer.certified_norm:.6g} > 1")
        # both inputs ride through the chain together (first layer outermost)
        X = np.stack([x0, x1], axis=1)
        for layer in reversed(layers):
            Z = ACTIVATIONS[layer.activation](layer.W @ X + layer.b[:, None])
            X = layer.W.T @ Z if layer.form == RESNET_ADJOINT else Z
        u, u2 = X[:, 0], X[:, 1]
        v_hat[t] = u / n
        gap = max(gap, float(np.linalg.norm(u - u2)) / n)
    se = np.std(v_hat, axis=0, ddof=1) / math.sqrt(trials) if trials > 1 \
        else np.zeros(x0.shape[0])
    return DriftReport(v_hat=v_hat, n=n, cross_input_gap=gap, per_coordinate_se=se)


def lipschitz_profile(layers: Sequence[LayerMap], pair_sampler, n_pairs: int,
                      seed: int = 0) -> float:
    """max over sampled pairs of ||u(n)x - u(n)y|| / (n ||x - y||).

    For certified nonexpansive chains this is at most 1/n, quantifying how
    close the normalized composition is to a constant function.
    """
    if n_pairs < 1:
        raise DegenerateInputError("n_pairs must be >= 1")
    from .seeding import trial_rng
    rng = trial_rng(seed, 0)
    n = len(layers)
    best = 0.0
    used = 0
    for _ in range(n_pairs):
        x, y = pair_sampler(rng)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        base = float(np.linalg.norm(x - y))
        if base == 0.0:
            continue
        ratio = float(np.linalg.norm(apply_chain(layers, x) - apply_chain(layers, y))) \
            / (n * base)
        best = max(best, ratio)
        used += 1
    if used == 0:
        raise DegenerateInputError("all sampled pairs were coincident")
    return best


# ---------------------------------------------------------------------------
# Maximal stretch for diffeomorphism cocycles on the circle

@dataclass(frozen=True)
class StretchReport:
    lambda_hat: float
    argmax_trace: list   # (depth, (x, y)) best pair at each checkpoint
    z_hat: complex


def max_stretch(driver: ErgodicDriver, n: int, grid: int, trial: int = 0,
                scales=(1e-2, 1e-4), n_random_pairs: int = 0,
                seed: int = 0) -> StretchReport:
    """Maximal-stretch exponent of a cocycle of maps of the unit circle.

    Driver elements are complex maps z -> g(z) (vectorizable over numpy
    arrays) preserving the circle.  A fixed pair grid (near-diagonal pairs
    at the given scales around equispaced midpoints, plus optional random
    pairs) is re-evaluated against each incoming map; the per-step log of
    the best sampled stretch accumulates into lambda_hat.

    Depth-n difference quotients saturate in double precision once the
    cumulative stretch exceeds (pair scale)/eps, so the estimate composes
    per-step sampled suprema instead; for constant and rotation drivers the
    two notions coincide.  Refining the grid never decreases lambda_hat.
    """
    if n < 1:
        raise DegenerateInputError("n must be >= 1")
    mids = _TWO_PI * np.arange(grid) / grid
    xs, ys = [], []
    for s in scales:
        xs.append(np.exp(1j * (mids - 0.5 * s)))
        ys.append(np.exp(1j * (mids + 0.5 * s)))
    if n_random_pairs:
        from .seeding import trial_rng
        rng = trial_rng(seed, trial)
        a = np.exp(1j * _TWO_PI * rng.random(n_random_pairs))
        b = np.exp(1j * _TWO_PI * rng.random(n_random_pairs))
        keep = np.abs(a - b) > 1e-9
        xs.append(a[keep])
        ys.append(b[keep])
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    base = np.abs(x - y)
    checkpoints = set(geometric_checkpoints(n, count=12))
    total = 0.0
    trace = []
    best_pair = None
    for k, g in enumerate(driver.elements(trial, n), start=1):
        gx = g(x)
        gy = g(y)
        if not (np.all(np.isfinite(gx)) and np.all(np.isfinite(gy))):
            raise DegenerateInputError(f"map left the sampled chart at depth {k}")
        ratios = np.abs(gx - gy) / base
        i = int(np.argmax(ratios))
        total += math.log(float(ratios[i]))
        best_pair = (complex(x[i]), complex(y[i]))
        if k in checkpoints:
            trace.append((k, best_pair))
    z_hat = 0.5 * (best_pair[0] + best_pair[1])
    return StretchReport(lambda_hat=total / n, argmax_trace=trace, z_hat=z_hat)


def jacobian_cocycle_dist(driver: ErgodicDriver, n: int, grid: int,
                          trial: int = 0):
    """Distance-from-identity cocycle in the sup-log-Jacobian metric.

    Driver elements are :class:`CircleMap` objects composed as left
    increments; derivatives along the composition accumulate by the chain
    rule on the grid.  Returns rows (k, a(k), a(k)/k).
    """
    if grid < 16:
        raise DegenerateInputError("grid must be >= 16")
    theta = np.linspace(0.0, _TWO_PI, grid, endpoint=False)
    pos = theta.copy()
    cumlog = np.zeros(grid)
    rows = []
    for k, g in enumerate(driver.elements(trial, n), start=1):
        d = g.deriv(pos)
        if np.any(d <= 0.0):
            raise NotDiffeomorphismError(f"nonpositive composed derivative at step {k}")
        cumlog += np.log(d)
        pos = np.asarray(g.f(pos), dtype=float) % _TWO_PI
        a_k = float(np.max(np.abs(cumlog)))
        rows.append((k, a_k, a_k / k))
    return rows
