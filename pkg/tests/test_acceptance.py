"""End-to-end acceptance suite: the binding behavioral claims of this package.

Each test prints one summary line ("[k/8] label: PASS/FAIL (detail)"); run
with ``pytest tests/test_acceptance.py -v -s`` to see every line.  The suite
trades speed for fidelity: the sampling and experiment tests integrate real
trajectories and take a few minutes altogether.
"""
import itertools
import math
import os
import time

import numpy as np
import pytest
from scipy import stats

from simmering import data, diagnostics, ensemble, net, optimize, runner, seeding
from simmering.config import from_dict
from simmering.dynamics import (
    IntegratorConfig,
    PhaseState,
    TemperatureSchedule,
    ThermostatChain,
    initial_velocities,
    run_trajectory,
)
from simmering.net import Topology


def _report(index: int, label: str, ok: bool, detail: str):
    print(f"[{index}/8] {label}: {'PASS' if ok else 'FAIL'} ({detail})", flush=True)
    assert ok, f"{label}: {detail}"


# ---------------------------------------------------------------------------
# 1. gradient exactness


def _fd_gradient(top, params, x, y, kind, h=1e-5):
    g = np.empty_like(params)
    for j in range(params.size):
        up = params.copy()
        dn = params.copy()
        up[j] += h
        dn[j] -= h
        g[j] = (net.loss(kind, net.forward(top, up, x), y)
                - net.loss(kind, net.forward(top, dn, x), y)) / (2.0 * h)
    return g


def _random_case(r, kind):
    """Random architecture within the [4,16,16,3] envelope plus a batch."""
    n_hidden = int(r.integers(1, 3))
    hidden = tuple(int(v) for v in r.integers(2, 17, size=n_hidden))
    if kind == "categorical_cross_entropy":
        k_out = int(r.integers(2, 4))
    elif kind == "binary_cross_entropy_from_logits":
        k_out = 1
    else:
        k_out = int(r.integers(1, 4))
    sizes = (int(r.integers(1, 5)),) + hidden + (k_out,)
    acts = tuple(str(r.choice(("tanh", "relu", "elu"))) for _ in hidden) + ("linear",)
    top = Topology(sizes, acts)
    params = r.normal(size=top.param_count)
    n = int(r.integers(2, 7))
    x = r.normal(size=(n, sizes[0]))
    if kind == "categorical_cross_entropy":
        y = np.eye(k_out)[r.integers(0, k_out, size=n)].astype(float)
    elif kind == "binary_cross_entropy_from_logits":
        y = (r.random(size=(n, 1)) > 0.5).astype(float)
    else:
        y = r.normal(size=(n, k_out))
    return top, params, x, y


def _relu_kink_free(top, params, x, margin=1e-3):
    # a relu pre-activation inside the stencil would invalidate the oracle
    pre, _ = net._forward_cached(top, params, np.asarray(x, dtype=np.float64))
    for z, act in zip(pre, top.activations):
        if act == "relu" and np.any(np.abs(z) < margin):
            return False
    return True


def test_gradients_match_finite_differences():
    r = np.random.Generator(np.random.PCG64(np.random.SeedSequence(2024)))
    kinds = itertools.cycle(net.LOSSES)
    worst = 0.0
    done = 0
    while done < 100:
        kind = next(kinds)
        top, params, x, y = _random_case(r, kind)
        if not _relu_kink_free(top, params, x):
            continue
        g = net.gradient(top, params, x, y, kind)
        g_fd = _fd_gradient(top, params, x, y, kind)
        worst = max(worst, float(np.max(np.abs(g - g_fd) / (1.0 + np.abs(g_fd)))))
        done += 1
    _report(1, "gradient exactness vs central finite differences",
            worst < 1e-6, f"100 random cases, max rel err {worst:.2e}")


# ---------------------------------------------------------------------------
# 2. canonical sampling on the harmonic potential


def _harmonic_state(temperature, chain_mass, seed):
    return PhaseState(
        positions=np.array([0.0]),
        velocities=initial_velocities(1, temperature, seed),
        masses=1.0,
        chain=ThermostatChain.rest(2, mass=chain_mass),
        step_index=0,
    )


def _constant_config(temperature, dt):
    sched = TemperatureSchedule(t_initial=temperature, t_target=temperature,
                                t_step=1.0, hold_iterations=1)
    return IntegratorConfig(dt=dt, schedule=sched, chain_length=2)


def test_harmonic_sampling_is_canonical():
    grad = lambda x: x           # k = 1
    pot = lambda x: float(0.5 * x[0] ** 2)
    details = []
    ok = True
    for temperature in (0.1, 0.5, 1.0):
        t0 = time.time()
        # chain mass on the oscillator scale keeps the chain resonant
        state = _harmonic_state(temperature, chain_mass=temperature, seed=1)
        cfg = _constant_config(temperature, dt=0.002)
        state, _ = run_trajectory(state, grad, cfg, 100_000, pot,
                                  snapshot_start=100_000)
        state, traj = run_trajectory(state, grad, cfg, 2_000_000, pot,
                                     snapshot_start=0, snapshot_stride=1)
        elapsed = time.time() - t0
        x = traj.snapshots[:, 0]
        x2_err = abs(float(np.mean(x * x)) - temperature) / temperature
        v2_err = abs(float(np.mean(traj.kinetic_temperature)) - temperature) / temperature
        # thin to roughly independent samples before the distribution test
        p = stats.kstest(x[::2000], "norm", args=(0.0, math.sqrt(temperature))).pvalue
        good = x2_err < 0.05 and v2_err < 0.05 and p > 0.01 and elapsed < 60.0
        ok = ok and good
        details.append(f"T={temperature}: x2 {x2_err:.1%}, v2 {v2_err:.1%}, KS p={p:.2f}, {elapsed:.0f}s")
    _report(2, "harmonic sampling is canonical", ok, "; ".join(details))


# ---------------------------------------------------------------------------
# 3. extended-energy conservation


def test_extended_energy_is_conserved():
    grad = lambda x: x
    pot = lambda x: float(0.5 * x[0] ** 2)
    state = _harmonic_state(0.5, chain_mass=0.5, seed=1)
    _, traj = run_trajectory(state, grad, _constant_config(0.5, dt=0.001),
                             100_000, pot, snapshot_start=100_000)
    e = traj.extended_energy
    drift = abs(float(e[-1] - e[0])) / abs(float(e[0]))
    _report(3, "extended energy stable over 1e5 steps",
            drift < 1e-3, f"relative change {drift:.2e}")


# ---------------------------------------------------------------------------
# 4. noisy-sine retrofit, directional improvement


SINE_RETROFIT = {
    "name": "sine_retrofit_acceptance",
    "seed": 0,
    "replicates": 10,
    "data": {"kind": "noisy_sine", "n_points": 101, "noise_amp": 0.1, "n_train": 65},
    "model": {"hidden": [20, 20], "activations": ["tanh", "tanh", "linear"],
              "loss": "sse", "init": "glorot_normal"},
    "adam": {"alpha": 0.002, "epochs": 2000},
    "simmer": {"dt": 0.002, "iterations": 10000, "chain_length": 2,
               "chain_mass": 1.0, "particle_mass": 1.0,
               "schedule": {"t_initial": 0.0, "t_target": 0.05,
                            "t_step": 0.01, "hold_iterations": 1000}},
    "sampling": {"burn_in": 7000, "stride": 1, "fraction": 1.0},
}


def test_sine_retrofit_improves_on_adam_endpoint():
    cfg = from_dict(SINE_RETROFIT)
    prep = runner.prepare_data(cfg)
    topo = runner.build_topology(cfg, prep.dataset)
    grad_fn, ltrain, ltest = runner._loss_fns(cfg, topo, prep)
    xs = prep.dataset.features
    truth = np.sin(2.0 * np.pi * xs[:, 0])
    scaled_xs = data.scale_features(prep.scaler, xs)

    test_wins = curve_wins = 0
    for r in range(cfg.replicates):
        report = runner._train_one_adam(cfg, topo, prep, r)
        state = optimize.retrofit_init(report, gamma=cfg.adam.alpha,
                                       chain_length=cfg.simmer.chain_length,
                                       chain_mass=cfg.simmer.chain_mass,
                                       particle_mass=cfg.simmer.particle_mass)
        _, traj = run_trajectory(state, grad_fn, runner._integrator_config(cfg),
                                 cfg.simmer.iterations, ltrain, ltest,
                                 snapshot_start=cfg.sampling.burn_in, snapshot_stride=1)
        plan = ensemble.SamplingPlan(total_iterations=cfg.simmer.iterations,
                                     burn_in=cfg.sampling.burn_in, stride=1,
                                     fraction=cfg.sampling.fraction,
                                     seed=cfg.seed, replicate=r)
        bundle = ensemble.collect(traj, plan, topo, prep.scaler)
        adam_test = runner._params_test_metric(topo, report.final_params, prep)
        ens_test = runner._bundle_test_metric(bundle, prep)
        adam_curve = float(np.mean((data.unscale_targets(
            prep.scaler, net.forward(topo, report.final_params, scaled_xs))[:, 0] - truth) ** 2))
        ens_curve = float(np.mean((ensemble.regression_mean(bundle, xs)[:, 0] - truth) ** 2))
        test_wins += ens_test < adam_test
        curve_wins += ens_curve < adam_curve
        print(f"    replicate {r}: adam test {adam_test:.5f} ens test {ens_test:.5f}"
              f" | adam curve {adam_curve:.5f} ens curve {ens_curve:.5f}", flush=True)
    _report(4, "sine retrofit beats the optimizer endpoint in >=8/10 replicates",
            test_wins >= 8 and curve_wins >= 8,
            f"test wins {test_wins}/10, curve wins {curve_wins}/10")


# ---------------------------------------------------------------------------
# 5. iris classification from random initialization


IRIS_AB_INITIO = {
    "name": "iris_ab_initio_acceptance",
    "seed": 0,
    "replicates": 8,
    "data": {"kind": "csv", "path": "builtin:iris", "n_train": 112},
    "model": {"hidden": [100, 50, 50],
              "activations": ["tanh", "tanh", "tanh", "linear"],
              "loss": "categorical_cross_entropy", "init": "glorot_normal"},
    "adam": {"alpha": 0.002, "epochs": 200},
    "simmer": {"dt": 0.001, "iterations": 12000, "chain_length": 2,
               "chain_mass": 1.0, "particle_mass": 1.0,
               "schedule": {"t_initial": 0.002, "t_target": 0.002}},
    "sampling": {"burn_in": 2000, "stride": 1, "fraction": 0.02},
}


def test_iris_ensemble_matches_adam_and_votes_are_proportions():
    cfg = from_dict(IRIS_AB_INITIO)
    prep = runner.prepare_data(cfg)
    topo = runner.build_topology(cfg, prep.dataset)
    grad_fn, ltrain, ltest = runner._loss_fns(cfg, topo, prep)

    adam_report = runner._train_one_adam(cfg, topo, prep, 0)
    adam_acc = runner._params_test_metric(topo, adam_report.final_params, prep)

    pooled_metric = runner._PooledMetric(prep, topo)
    bundles = []
    for r in range(cfg.replicates):
        sched = cfg.simmer.schedule
        state = PhaseState(
            positions=runner.initial_params(cfg, topo, r),
            velocities=initial_velocities(topo.param_count, sched.t_initial,
                                          seeding.child_seed(cfg.seed, "velocities", r)),
            masses=cfg.simmer.particle_mass,
            chain=ThermostatChain.rest(cfg.simmer.chain_length, mass=cfg.simmer.chain_mass),
            step_index=0,
        )
        _, traj = run_trajectory(state, grad_fn, runner._integrator_config(cfg),
                                 cfg.simmer.iterations, ltrain, ltest,
                                 snapshot_start=cfg.sampling.burn_in, snapshot_stride=1)
        plan = ensemble.SamplingPlan(total_iterations=cfg.simmer.iterations,
                                     burn_in=cfg.sampling.burn_in, stride=1,
                                     fraction=cfg.sampling.fraction,
                                     seed=cfg.seed, replicate=r)
        bundle = ensemble.collect(traj, plan, topo, prep.scaler)
        bundles.append(bundle)
        pooled_metric.add(bundle)
    pooled_acc = pooled_metric.value()

    features = prep.dataset.features
    bounds = ((features[:, 0].min(), features[:, 0].max()),
              (features[:, 1].min(), features[:, 1].max()))
    _, _, props = ensemble.decision_grid(ensemble.pool(bundles), bounds, resolution=100)
    grid_gap = float(np.max(np.abs(props.sum(axis=2) - 1.0)))

    _report(5, "iris pooled ensemble matches Adam and grid votes sum to one",
            pooled_acc >= adam_acc and grid_gap == 0.0,
            f"pooled acc {pooled_acc:.4f} vs adam {adam_acc:.4f}, "
            f"8 replicates, max |vote sum - 1| = {grid_gap:.1e} on 100x100 grid")


# ---------------------------------------------------------------------------
# 6. retrofit handoff exactness


def test_handoff_is_exact():
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(7)))

    top = Topology((1, 5, 1), ("tanh", "linear"))
    x = np.linspace(-1, 1, 12)[:, None]
    y = np.sin(x)
    params0 = net.init_glorot_normal(top, seeding.child_seed(3, "weights"))
    report = optimize.train_adam(top, params0, x, y, x, y, "sse", epochs=50, alpha=0.002)
    state = optimize.retrofit_init(report, gamma=0.002)
    bits_equal = state.positions.tobytes() == report.final_params.tobytes()

    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(1, 40))
        last = rng.normal(size=n)
        prev = rng.normal(size=n)
        gamma = float(rng.uniform(1e-4, 1.0))
        v = optimize.velocity_estimate(last, prev, gamma)
        worst = max(worst, float(np.max(np.abs(v - (last - prev) / gamma))))
    _report(6, "retrofit handoff is bit-exact",
            bits_equal and worst <= 1e-15,
            f"positions bit-identical: {bits_equal}, velocity residual {worst:.1e}")


# ---------------------------------------------------------------------------
# 7. curvature spectrum probe


def test_spectrum_probe():
    # separable quadratic with known eigenvalues 1 and 100
    grad_fn = lambda p: np.array([1.0, 100.0]) * p
    spec = diagnostics.spectrum_from_gradient(grad_fn, np.array([0.3, -0.2]))
    quad_err = float(np.max(np.abs(spec.eigenvalues - np.array([100.0, 1.0]))))

    # small overfit sine net: directions differ by orders of magnitude
    top = Topology((1, 10, 1), ("tanh", "linear"))
    rng = seeding.generator(12)
    x = np.linspace(-1, 1, 8)[:, None]
    y = np.sin(2 * np.pi * x) + 0.1 * rng.standard_normal((8, 1))
    params0 = net.init_glorot_normal(top, seeding.child_seed(12, "weights"))
    report = optimize.train_adam(top, params0, x, y, x, y, "sse", epochs=4000, alpha=0.01)
    eig = diagnostics.hessian_spectrum(top, report.final_params, x, y, "sse").eigenvalues
    mags = np.abs(eig)
    spread = float(mags.max() / max(mags.min(), 1e-300))

    _report(7, "curvature spectrum probe",
            quad_err < 1e-6 and spread >= 1e4,
            f"quadratic eigenvalue err {quad_err:.1e}, overfit-net spread {spread:.1e}")


# ---------------------------------------------------------------------------
# 8. determinism of the experiment pipeline


DETERMINISM_CONFIG = {
    "name": "determinism_probe",
    "seed": 11,
    "replicates": 2,
    "data": {"kind": "noisy_sine", "n_points": 41, "noise_amp": 0.1, "n_train": 25},
    "model": {"hidden": [8], "activations": ["tanh", "linear"],
              "loss": "sse", "init": "glorot_normal"},
    "adam": {"alpha": 0.002, "epochs": 60},
    "simmer": {"dt": 0.002, "iterations": 400, "chain_length": 2,
               "chain_mass": 1.0, "particle_mass": 1.0,
               "schedule": {"t_initial": 0.0, "t_target": 0.02,
                            "t_step": 0.01, "hold_iterations": 100}},
    "sampling": {"burn_in": 300, "stride": 1, "fraction": 0.5},
}


def _dir_bytes(root):
    found = {}
    for base, _, names in os.walk(root):
        for name in names:
            path = os.path.join(base, name)
            with open(path, "rb") as fh:
                found[os.path.relpath(path, root)] = fh.read()
    return found


def test_runs_are_deterministic(tmp_path):
    cfg = from_dict(DETERMINISM_CONFIG)
    dirs = {}
    for tag in ("first", "second"):
        adam_dir = str(tmp_path / f"adam_{tag}")
        retro_dir = str(tmp_path / f"retro_{tag}")
        runner.run_train_adam(cfg, adam_dir)
        runner.run_retrofit(cfg, adam_dir, retro_dir)
        dirs[tag] = (adam_dir, retro_dir)

    mismatches = []
    for pair in zip(dirs["first"], dirs["second"]):
        a, b = (_dir_bytes(p) for p in pair)
        if set(a) != set(b):
            mismatches.append("file sets differ")
        mismatches.extend(rel for rel in a if a[rel] != b.get(rel))
    n_files = sum(len(_dir_bytes(p)) for p in dirs["first"])
    _report(8, "identical config and seed reproduce byte-identical outputs",
            not mismatches,
            f"{n_files} files compared{', mismatches: ' + ', '.join(mismatches) if mismatches else ''}")
