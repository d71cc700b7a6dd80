"""Experiment registry and deterministic command-line runner.

Configs are single JSON documents; flags override document values.  Every
run writes one data table (CSV or JSONL, byte-identical for identical
config+seed) and one manifest recording the seed derivation.  Exit codes:
0 success, 2 config error, 3 runtime truncation error.
"""

import argparse
import concurrent.futures
import datetime
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .core import check_functional_bounds, check_weak_metric_axioms
from .cocycle import (ErgodicDriver, EstimationError, constant_driver,
                      estimate_top_exponent, hyperbolic_walk_gap,
                      mobius_matrix)
from .deepnet import (LayerMap, jacobian_cocycle_dist, lipschitz_profile,
                      make_layer, max_stretch, resnet_drift, spectral_normalize)
from .lyapunov import filtration_probe, qr_spectrum
from .operator_cone import expm_symmetric, segal_check, state_ratio_check, tau_estimate
from .seeding import GENERATOR_NAME, trial_rng, trial_seed
from .spaces import (euclidean_space, mobius_disk, mobius_circle_map,
                     poincare_space, registered_basepoints, registered_spaces,
                     rotation_circle_map, sine_circle_map)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TRUNCATION = 3


def _threads() -> int:
    raw = os.environ.get("HOROFLOW_THREADS", "0")
    try:
        t = int(raw)
    except ValueError:
        t = 0
    return t if t > 0 else (os.cpu_count() or 1)


def map_indexed(fn, count: int) -> list:
    """fn(i) for i in range(count), optionally on a thread pool.

    Results are merged by index, so output never depends on scheduling.
    """
    t = _threads()
    if t <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with concurrent.futures.ThreadPoolExecutor(max_workers=t) as pool:
        return list(pool.map(fn, range(count)))


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


# ---------------------------------------------------------------------------
# Runners: each returns (columns, rows, truncation_count)

def _run_metric_axioms(cfg):
    samples = cfg["samples"]
    spaces = registered_spaces(cfg["dim"])
    basepoints = registered_basepoints(spaces)
    cols = ["metric", "samples", "max_identity_error", "max_triangle_violation",
            "max_lower_violation", "max_upper_violation", "max_continuity_violation"]
    rows = []
    for name in sorted(spaces):
        sp = spaces[name]
        ax = check_weak_metric_axioms(sp, samples, seed=cfg["seed"])
        fb = check_functional_bounds(sp, basepoints[name], samples, seed=cfg["seed"] + 1)
        rows.append((name, samples, ax.max_identity_error, ax.max_triangle_violation,
                     fb.max_lower_violation, fb.max_upper_violation,
                     fb.max_continuity_violation))
    return cols, rows, 0


def _hyperbolic_driver(cfg) -> ErgodicDriver:
    m1 = mobius_matrix(complex(cfg["mobius_a"]))
    if cfg.get("mobius_a2") is None:
        return constant_driver(m1, seed=cfg["seed"])
    m2 = mobius_matrix(complex(cfg["mobius_a2"]))
    w = float(cfg.get("weight", 0.5))
    return ErgodicDriver(kind="iid_finite", seed=cfg["seed"],
                         maps=(m1, m2), weights=(w, 1.0 - w))


def _run_hyperbolic_walk(cfg):
    driver = _hyperbolic_driver(cfg)

    def one(t):
        return hyperbolic_walk_gap(driver, cfg["n"], cfg["probe_budget"], trial=t)

    traces = map_indexed(one, cfg["trials"])
    rows = []
    for t, tr in enumerate(traces):
        for k, gap in zip(tr.ks, tr.gaps):
            rows.append((t, k, gap))
    return ["trial", "k", "gap"], rows, 0


_TOP_EXPONENT_PRESETS = ("translation", "pm1_walk", "disk_mobius")


def _run_top_exponent(cfg):
    preset = cfg["preset"]
    if preset == "translation":
        space = euclidean_space(1)
        driver = constant_driver(lambda x: x + 1.0, seed=cfg["seed"])
        x0 = np.zeros(1)
    elif preset == "pm1_walk":
        space = euclidean_space(1)
        driver = ErgodicDriver(kind="iid_finite", seed=cfg["seed"],
                               maps=(lambda x: x + 1.0, lambda x: x - 1.0),
                               weights=(0.5, 0.5))
        x0 = np.zeros(1)
    elif preset == "disk_mobius":
        space = poincare_space()
        driver = constant_driver(mobius_disk(complex(cfg["mobius_a"])),
                                 seed=cfg["seed"])
        x0 = 0j
    else:
        raise ValueError(f"unknown preset {preset!r}")
    est = estimate_top_exponent(driver, space, x0, cfg["n"], cfg["trials"])
    rows = [(t, v, est.lambda_hat, est.std_error, est.tail_slope)
            for t, v in enumerate(est.per_trial)]
    return (["trial", "per_trial", "lambda_hat", "std_error", "tail_slope"],
            rows, est.truncated_trials)


_SL2_PAIR = (np.array([[2.0, 1.0], [1.0, 1.0]]),
             np.array([[1.0, 1.0], [1.0, 2.0]]))


def _matrix_driver(cfg) -> ErgodicDriver:
    preset = cfg.get("preset", "diag")
    if preset == "diag":
        return constant_driver(np.diag(np.asarray(cfg["diag"], dtype=float)),
                               seed=cfg["seed"])
    if preset == "rotation":
        th = float(cfg.get("rotation_angle", math.pi / 4))
        m = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        return constant_driver(m, seed=cfg["seed"])
    if preset == "sl2_pair":
        return ErgodicDriver(kind="iid_finite", seed=cfg["seed"],
                             maps=_SL2_PAIR, weights=(0.5, 0.5))
    raise ValueError(f"unknown preset {preset!r}")


def _run_oseledets_spectrum(cfg):
    driver = _matrix_driver(cfg)
    dim = np.asarray(driver.maps[0]).shape[0]
    est = qr_spectrum(driver, dim, cfg["n"], trial=cfg.get("trial", 0))
    rows = [(i, est.exponents[i], est.resid[i]) for i in range(dim)]
    return ["index", "exponent", "resid"], rows, 0


def _run_filtration_probe(cfg):
    A = np.diag(np.asarray(cfg["diag"], dtype=float))
    dim = A.shape[0]
    probes = [np.eye(dim)[i] for i in range(dim)] + [np.ones(dim)]
    rep = filtration_probe(A, probes, cfg["n"], cfg.get("cluster_tol"))
    cluster_of = {}
    for c, members in enumerate(rep.clusters):
        for i in members:
            cluster_of[i] = c
    rows = [(i, rep.rates[i], cluster_of[i]) for i in range(len(probes))]
    return ["probe_index", "rate", "cluster"], rows, 0


def _run_operator_tau(cfg):
    est = tau_estimate(_matrix_driver(cfg), cfg["n"], cfg["trials"])
    rows = [(t, v, est.lambda_hat, est.std_error)
            for t, v in enumerate(est.per_trial)]
    return ["trial", "per_trial", "tau_hat", "std_error"], rows, 0


def _run_state_ratio(cfg):
    rows = state_ratio_check(_matrix_driver(cfg), cfg["N"],
                             cfg["checkpoints"], trial=cfg.get("trial", 0))
    return ["l", "ratio", "tau_hat"], rows, 0


def _run_segal_sweep(cfg):
    dim = cfg["dim"]
    scale = float(cfg["scale"])

    def one(i):
        rng = trial_rng(cfg["seed"], i)
        u = rng.uniform(-scale, scale, size=(dim, dim))
        v = rng.uniform(-scale, scale, size=(dim, dim))
        u = 0.5 * (u + u.T)
        v = 0.5 * (v + v.T)
        lhs, rhs = segal_check(u, v)
        import scipy.linalg
        path_gap = float(np.linalg.norm(scipy.linalg.expm(u + v)
                                        - expm_symmetric(u + v), 2))
        return (i, lhs, rhs, rhs - lhs, path_gap)

    rows = map_indexed(one, cfg["pairs"])
    return ["pair", "lhs", "rhs", "slack", "path_gap"], rows, 0


def _layer_driver(cfg) -> ErgodicDriver:
    d = cfg["d"]
    activation = cfg["activation"]
    support = np.asarray([float(b) for b in cfg["b_support"]])
    # normalize the shared weight once; per-sample only the bias is drawn
    W, cert = spectral_normalize(np.eye(d))

    def sampler(rng, _W=W, _s=support, _act=activation, _c=cert):
        b = np.full(d, _s[rng.integers(_s.size)])
        return LayerMap(W=_W, b=b, activation=_act, certified_norm=_c)

    return ErgodicDriver(kind="iid_parametric", seed=cfg["seed"], sampler=sampler)


def _run_resnet_drift(cfg):
    rep = resnet_drift(_layer_driver(cfg), np.zeros(cfg["d"]),
                       cfg["n"], cfg["trials"])
    rows = []
    for t in range(cfg["trials"]):
        for c in range(cfg["d"]):
            rows.append((t, c, rep.v_hat[t, c], rep.per_coordinate_se[c]))
    return ["trial", "coord", "v_hat", "se"], rows, 0


def _run_lipschitz_profile(cfg):
    d = cfg["d"]
    rng = trial_rng(cfg["seed"], 0)
    layers = [make_layer(rng.normal(size=(d, d)), rng.normal(size=d),
                         cfg["activation"]) for _ in range(cfg["depth"])]

    def pair_sampler(r):
        return r.normal(size=d), r.normal(size=d)

    profile = lipschitz_profile(layers, pair_sampler, cfg["n_pairs"],
                                seed=cfg["seed"] + 1)
    return ["depth", "profile"], [(cfg["depth"], profile)], 0


def _stretch_driver(cfg) -> ErgodicDriver:
    preset = cfg["preset"]
    if preset == "identity":
        return constant_driver(lambda z: z, seed=cfg["seed"])
    if preset == "rotation":
        phase = complex(math.cos(1.0), math.sin(1.0))
        return constant_driver(lambda z, _p=phase: _p * z, seed=cfg["seed"])
    if preset == "mobius":
        a = float(cfg["mobius_a"])
        return constant_driver(lambda z, _a=a: (z + _a) / (1.0 + _a * z),
                               seed=cfg["seed"])
    raise ValueError(f"unknown preset {preset!r}")


def _run_max_stretch(cfg):
    rep = max_stretch(_stretch_driver(cfg), cfg["n"], cfg["grid"],
                      trial=cfg.get("trial", 0))
    rows = []
    for depth, (x, y) in rep.argmax_trace:
        rows.append((depth, x.real, x.imag, y.real, y.imag,
                     rep.lambda_hat, rep.z_hat.real, rep.z_hat.imag))
    return (["depth", "x_re", "x_im", "y_re", "y_im",
             "lambda_hat", "z_re", "z_im"], rows, 0)


def _circle_driver(cfg) -> ErgodicDriver:
    preset = cfg["preset"]
    if preset == "rotation":
        return constant_driver(rotation_circle_map(1.0), seed=cfg["seed"])
    if preset == "sine":
        return constant_driver(sine_circle_map(float(cfg["amplitude"])),
                               seed=cfg["seed"])
    if preset == "mobius":
        return constant_driver(mobius_circle_map(float(cfg["mobius_a"])),
                               seed=cfg["seed"])
    raise ValueError(f"unknown preset {preset!r}")


def _run_jacobian_cocycle(cfg):
    rows = jacobian_cocycle_dist(_circle_driver(cfg), cfg["n"], cfg["grid"],
                                 trial=cfg.get("trial", 0))
    return ["k", "a", "ratio"], rows, 0


# ---------------------------------------------------------------------------
# Registry

class Experiment:
    def __init__(self, name, description, runner, defaults, required=()):
        self.name = name
        self.description = description
        self.runner = runner
        self.defaults = defaults
        self.required = tuple(required)


EXPERIMENTS = {e.name: e for e in [
    Experiment("hyperbolic-walk",
               "metric-functional convergence gap for disk Mobius walks",
               _run_hyperbolic_walk,
               {"n": 1000, "trials": 1, "probe_budget": 16,
                "mobius_a": 0.5, "mobius_a2": None, "weight": 0.5}),
    Experiment("top-exponent",
               "top exponent a(n)/n of a nonexpansive cocycle",
               _run_top_exponent,
               {"preset": "translation", "n": 1000, "trials": 10, "mobius_a": 0.5}),
    Experiment("oseledets-spectrum",
               "full Lyapunov spectrum by QR accumulation",
               _run_oseledets_spectrum,
               {"preset": "diag", "diag": [3.0, 1.0], "n": 100000, "trials": 1}),
    Experiment("filtration-probe",
               "growth-rate clustering of probe vectors under a constant matrix",
               _run_filtration_probe,
               {"diag": [2.0, 0.5], "n": 1000, "cluster_tol": None, "trials": 1}),
    Experiment("operator-tau",
               "exponent of ||log(v^T v)|| for matrix products",
               _run_operator_tau,
               {"preset": "diag", "diag": [2.0, 0.5], "n": 100, "trials": 10}),
    Experiment("state-ratio",
               "vector-state ratios against the operator exponent",
               _run_state_ratio,
               {"preset": "diag", "diag": [2.0, 0.5], "N": 200,
                "checkpoints": [10, 100, 200], "trials": 1, "n": 200}),
    Experiment("segal-sweep",
               "exp(u+v) vs exp(u/2)exp(v)exp(u/2) norm inequality sweep",
               _run_segal_sweep,
               {"pairs": 1000, "dim": 3, "scale": 2.0, "n": 1, "trials": 1}),
    Experiment("resnet-drift",
               "normalized deep-chain drift across random layers",
               _run_resnet_drift,
               {"d": 1, "n": 10000, "trials": 100, "activation": "relu",
                "b_support": [0.5, 1.5]}),
    Experiment("lipschitz-profile",
               "normalized Lipschitz profile of a certified chain",
               _run_lipschitz_profile,
               {"depth": 100, "d": 4, "activation": "relu", "n_pairs": 200,
                "n": 1, "trials": 1}),
    Experiment("max-stretch",
               "maximal stretch exponent for circle diffeomorphism cocycles",
               _run_max_stretch,
               {"preset": "mobius", "mobius_a": 0.5, "n": 50, "grid": 1024,
                "trials": 1}),
    Experiment("jacobian-cocycle",
               "sup-log-Jacobian distance cocycle for circle maps",
               _run_jacobian_cocycle,
               {"preset": "mobius", "mobius_a": 0.5, "amplitude": 0.5,
                "n": 200, "grid": 512, "trials": 1}),
    Experiment("metric-axioms",
               "weak-metric axiom and functional-bound property suite",
               _run_metric_axioms,
               {"samples": 2000, "dim": 3, "n": 1, "trials": 1}),
]}


def validate(config: dict) -> list:
    """Diagnostics for a config document; empty list iff run would start."""
    diags = []
    name = config.get("experiment")
    if not name:
        diags.append("experiment: missing")
        return diags
    if name not in EXPERIMENTS:
        diags.append(f"experiment: unknown name {name!r}")
        return diags
    if "seed" not in config:
        diags.append("seed: missing")
    elif not isinstance(config["seed"], int) or config["seed"] < 0:
        diags.append("seed: must be a nonnegative integer")
    exp = EXPERIMENTS[name]
    merged = {**exp.defaults, **config}
    for field, lo in (("n", 1), ("trials", 1)):
        if field in merged:
            v = merged[field]
            if not isinstance(v, int) or v < lo:
                diags.append(f"{field}: must be an integer >= {lo}")
    return diags


def list_experiments():
    """Stable (name, required-parameter, description) listing."""
    rows = []
    for name in sorted(EXPERIMENTS):
        exp = EXPERIMENTS[name]
        params = ", ".join(sorted(exp.defaults))
        rows.append((name, params, exp.description))
    return rows


def run(config: dict) -> int:
    """Execute one experiment; writes data table + manifest, returns exit code."""
    diags = validate(config)
    if diags:
        for d in diags:
            print(f"config error: {d}", file=sys.stderr)
        return EXIT_CONFIG
    exp = EXPERIMENTS[config["experiment"]]
    cfg = {**exp.defaults, **config}
    out_dir = cfg.get("output_dir", ".")
    out_format = cfg.get("output_format", "csv")
    if out_format not in ("csv", "jsonl"):
        print("config error: output_format: must be csv or jsonl", file=sys.stderr)
        return EXIT_CONFIG
    os.makedirs(out_dir, exist_ok=True)
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    try:
        columns, rows, truncations = exp.runner(cfg)
    except EstimationError as e:
        print(f"truncation error: {e}", file=sys.stderr)
        return EXIT_TRUNCATION
    finished = datetime.datetime.now(datetime.timezone.utc).isoformat()
    stem = os.path.join(out_dir, f"{exp.name}-{cfg['seed']}")
    data_path = f"{stem}.{out_format}"
    if out_format == "csv":
        with open(data_path, "w", newline="") as fh:
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(fmt(x) for x in row) + "\n")
    else:
        with open(data_path, "w", newline="") as fh:
            for row in rows:
                fh.write(json.dumps({c: (fmt(x) if isinstance(x, (float, np.floating))
                                         else x)
                                     for c, x in zip(columns, row)},
                                    sort_keys=True) + "\n")
    trials = int(cfg.get("trials", 1))
    manifest = {
        "config": {k: v for k, v in cfg.items()},
        "generator": GENERATOR_NAME,
        "artifact_version": __version__,
        "started": started,
        "finished": finished,
        "per_trial_seeds": [trial_seed(cfg["seed"], t) for t in range(trials)],
        "truncations": truncations,
        "data_file": os.path.basename(data_path),
    }
    with open(f"{stem}.manifest.json", "w", newline="") as fh:
        json.dump(manifest, fh, indent=2, default=str)
        fh.write("\n")
    print(f"wrote {data_path}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="horoflow",
        description="deterministic experiments on weak metrics and ergodic cocycles")
    parser.add_argument("--experiment", help="experiment name (see --list)")
    parser.add_argument("--config", help="path to a JSON config document")
    parser.add_argument("--seed", type=int, help="master seed (overrides config)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--format", choices=["csv", "jsonl"], help="output format")
    parser.add_argument("--list", action="store_true", help="list experiments and exit")
    parser.add_argument("--validate-only", action="store_true",
                        help="validate the config and exit")
    args = parser.parse_args(argv)

    if args.list:
        for name, params, desc in list_experiments():
            print(f"{name:22s} [{params}]  {desc}")
        return EXIT_OK

    config = {}
    if args.config:
        try:
            with open(args.config) as fh:
                config = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            print(f"config error: cannot parse {args.config}: {e}", file=sys.stderr)
            return EXIT_CONFIG
    if args.experiment:
        config["experiment"] = args.experiment
    if args.seed is not None:
        config["seed"] = args.seed
    if args.out:
        config["output_dir"] = args.out
    if args.format:
        config["output_format"] = args.format

    if args.validate_only:
        diags = validate(config)
        for d in diags:
            print(d)
        return EXIT_OK if not diags else EXIT_CONFIG

    code = run(config)
    if code == EXIT_CONFIG and config.get("experiment") not in EXPERIMENTS:
        print("registered experiments:", file=sys.stderr)
        for name, params, desc in list_experiments():
            print(f"  {name}: {desc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
