"""Nonexpansive layer chains, drift, and diffeomorphism stretch experiments."""

import math

import numpy as np
import pytest

from horoflow.cocycle import ErgodicDriver, constant_driver
from horoflow.core import DegenerateInputError
from horoflow.deepnet import (LayerMap, NormConstraintError, apply_chain,
                              jacobian_cocycle_dist, lipschitz_profile,
                              make_layer, max_stretch, resnet_drift,
                              spectral_normalize)
from horoflow.seeding import trial_rng
from horoflow.spaces import (CircleMap, NotDiffeomorphismError,
                             mobius_circle_map, rotation_circle_map,
                             sine_circle_map)

from oracles import operator_norm_svd


# ---------------------------------------------------------------------------
# Spectral normalization and layers

def test_spectral_normalize_matches_svd():
    rng = trial_rng(31, 0)
    for _ in range(50):
        w = rng.normal(size=(5, 5))
        w2, cert = spectral_normalize(w)
        true = operator_norm_svd(w)
        if true > 1.0:
            assert cert == 1.0
            assert operator_norm_svd(w2) == pytest.approx(1.0, abs=1e-9)
        else:
            assert np.array_equal(w2, w)
            assert cert == pytest.approx(true, abs=1e-9)


def test_spectral_normalize_rejects_nonfinite():
    with pytest.raises(DegenerateInputError):
        spectral_normalize(np.array([[1.0, float("nan")], [0.0, 1.0]]))


def test_make_layer_modes():
    w = 2.0 * np.eye(2)
    layer = make_layer(w, np.zeros(2), "relu")
    assert layer.certified_norm <= 1.0
    assert operator_norm_svd(layer.W) == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(NormConstraintError):
        make_layer(w, np.zeros(2), "relu", audit=True)
    with pytest.raises(DegenerateInputError):
        make_layer(w, np.zeros(2), "softplus")
    with pytest.raises(DegenerateInputError):
        make_layer(w, np.zeros(2), "relu", form="conv")


def test_apply_chain_puts_first_layer_outermost():
    l1 = make_layer(np.eye(1), np.array([1.0]), "relu", form="plain")
    l2 = make_layer(0.5 * np.eye(1), np.zeros(1), "relu", form="plain")
    # l1(l2(x)) = 0.5 x + 1 for x >= 0
    out = apply_chain([l1, l2], np.array([4.0]))
    assert out[0] == pytest.approx(3.0)


def test_layer_forms():
    w, _ = spectral_normalize(np.array([[0.6, 0.2], [0.1, 0.5]]))
    b = np.array([0.3, -0.2])
    x = np.array([1.0, 2.0])
    plain = make_layer(w, b, "tanh", form="plain")
    res = make_layer(w, b, "tanh")
    assert np.allclose(plain(x), np.tanh(w @ x + b))
    assert np.allclose(res(x), w.T @ np.tanh(w @ x + b))


# ---------------------------------------------------------------------------
# Drift

def _bias_driver(seed, d=1, activation="relu"):
    w, cert = spectral_normalize(np.eye(d))
    support = np.array([0.5, 1.5])

    def sampler(rng):
        b = np.full(d, support[rng.integers(2)])
        return LayerMap(W=w, b=b, activation=activation, certified_norm=cert)

    return ErgodicDriver(kind="iid_parametric", seed=seed, sampler=sampler)


def test_resnet_drift_matches_apply_chain():
    drv = _bias_driver(2)
    rep = resnet_drift(drv, np.zeros(1), 7, 3)
    for t in range(3):
        layers = drv.elements(t, 7)
        assert np.allclose(rep.v_hat[t], apply_chain(layers, np.zeros(1)) / 7)


def test_drift_mean_for_relu_bias_chain():
    rep = resnet_drift(_bias_driver(5), np.zeros(1), 500, 20)
    # mean bias is 1 and relu(x + b) = x + b along the positive orbit
    assert rep.mean_v_hat[0] == pytest.approx(1.0, abs=5 * rep.per_coordinate_se[0] + 1e-3)
    assert rep.cross_input_gap <= 1.0 / 500 + 1e-15


def test_tanh_chain_drift_is_bounded_by_sqrt_d_over_n():
    rng = trial_rng(6, 0)
    d, n = 3, 50
    w, cert = spectral_normalize(rng.normal(size=(d, d)))

    def sampler(r):
        return LayerMap(W=w, b=r.normal(size=d), activation="tanh",
                        certified_norm=cert)

    drv = ErgodicDriver(kind="iid_parametric", seed=1, sampler=sampler)
    rep = resnet_drift(drv, rng.normal(size=d), n, 5)
    assert np.all(np.linalg.norm(rep.v_hat, axis=1) <= math.sqrt(d) / n)


def test_resnet_drift_rejects_uncertified_layers():
    def sampler(rng):
        return LayerMap(W=2.0 * np.eye(1), b=np.zeros(1), activation="relu",
                        certified_norm=2.0)

    drv = ErgodicDriver(kind="iid_parametric", seed=0, sampler=sampler)
    with pytest.raises(NormConstraintError):
        resnet_drift(drv, np.zeros(1), 5, 1)


def test_lipschitz_profile_bound():
    rng = trial_rng(8, 0)
    layers = [make_layer(rng.normal(size=(4, 4)), rng.normal(size=4), "relu")
              for _ in range(60)]

    def pairs(r):
        return r.normal(size=4), r.normal(size=4)

    prof = lipschitz_profile(layers, pairs, 100, seed=2)
    assert 0.0 <= prof <= 1.0 / 60 + 1e-12
    with pytest.raises(DegenerateInputError):
        lipschitz_profile(layers, pairs, 0)

    def coincident(r):
        x = r.normal(size=4)
        return x, x

    with pytest.raises(DegenerateInputError):
        lipschitz_profile(layers, coincident, 5)


# ---------------------------------------------------------------------------
# Maximal stretch

def test_max_stretch_identity_and_rotation_are_null():
    ident = constant_driver(lambda z: z)
    assert max_stretch(ident, 20, 256).lambda_hat == pytest.approx(0.0, abs=1e-12)
    phase = complex(math.cos(1.0), math.sin(1.0))
    rot = constant_driver(lambda z, _p=phase: _p * z)
    assert abs(max_stretch(rot, 20, 256).lambda_hat) <= 1e-9


def test_max_stretch_mobius_finds_repelling_point():
    a = 0.5
    drv = constant_driver(lambda z, _a=a: (z + _a) / (1.0 + _a * z))
    rep = max_stretch(drv, 50, 1024)
    assert rep.lambda_hat == pytest.approx(math.log(3.0), rel=0.05)
    assert abs(rep.z_hat - (-1.0)) <= 1e-2
    assert rep.argmax_trace  # checkpoints were recorded
    with pytest.raises(DegenerateInputError):
        max_stretch(drv, 0, 64)


def test_max_stretch_rejects_escaping_maps():
    bad = constant_driver(lambda z: z * complex("nan"))
    with pytest.raises(DegenerateInputError):
        max_stretch(bad, 3, 32)


# ---------------------------------------------------------------------------
# Jacobian cocycle

def test_jacobian_cocycle_rotation_is_flat():
    drv = constant_driver(rotation_circle_map(1.0))
    rows = jacobian_cocycle_dist(drv, 20, 128)
    assert all(a == 0.0 for _, a, _ in rows)


def test_jacobian_cocycle_constant_mobius_rate():
    drv = constant_driver(mobius_circle_map(0.5))
    rows = jacobian_cocycle_dist(drv, 200, 512)
    k, a, ratio = rows[-1]
    assert k == 200
    # rate approaches log of the multiplier at the repelling fixed point
    assert ratio == pytest.approx(math.log(3.0), abs=0.02)


def test_jacobian_cocycle_first_step_matches_metric():
    drv = constant_driver(sine_circle_map(0.5))
    rows = jacobian_cocycle_dist(drv, 1, 256)
    assert rows[0][1] == pytest.approx(math.log(2.0))


def test_jacobian_cocycle_validation():
    drv = constant_driver(rotation_circle_map(1.0))
    with pytest.raises(DegenerateInputError):
        jacobian_cocycle_dist(drv, 10, 8)
    folding = CircleMap(f=lambda t: np.cos(np.asarray(t, dtype=float)))
    with pytest.raises(NotDiffeomorphismError):
        jacobian_cocycle_dist(constant_driver(folding), 5, 64)
