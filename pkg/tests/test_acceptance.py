"""End-to-end acceptance gate.

Each test covers one numbered criterion and prints a single pass/fail line
to the terminal (bypassing capture) before asserting. The benchmark-scale
criteria share session-scoped experiment fixtures; set SPARTANBO_ACCEPT_CACHE
to a directory to reuse finished experiment runs across invocations.
"""

import math
import os
import pickle
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import kstest, norm

from spartanbo.acquisition import PredictionSet, eiig, expected_improvement, \
    information_gain
from spartanbo.benchmarks import (HARTMANN6_MINIMUM, get_benchmark,
                                  run_experiment)
from spartanbo.cli import main, read_trace
from spartanbo.inference import slice_step
from spartanbo.kernels import (ArdParams, SpartanParams, WeightConfig, gram,
                               matern52_ard_cross, spartan_cross, weights)
from spartanbo.strategies import HboConfig, RunConfig, run_hbo, run_spbo
from spartanbo.surrogate import Dataset, center_scale, fit, predict_many

CACHE_DIR = os.environ.get("SPARTANBO_ACCEPT_CACHE")


def _cached(key, builder):
    if not CACHE_DIR:
        return builder()
    path = Path(CACHE_DIR) / f"{key}.pkl"
    if path.exists():
        with open(path, "rb") as fh:
            return pickle.load(fh)
    out = builder()
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        pickle.dump(out, fh)
    return out


@pytest.fixture()
def report(capsys):
    def emit(num, label, ok, detail=""):
        with capsys.disabled():
            line = f"criterion {num:2d} ({label}): {'PASS' if ok else 'FAIL'}"
            if detail:
                line += f"  [{detail}]"
            print(line, flush=True)
    return emit


@pytest.fixture(scope="session")
def exp2d_runs():
    cfg = RunConfig(n_init=10, n_iter=40)
    return _cached("exp2d_sbo_bo_10rep", lambda: run_experiment(
        get_benchmark("exp2d"), ["sbo", "bo"], 10, cfg, base_seed=0))


@pytest.fixture(scope="session")
def hartmann_runs():
    cfg = RunConfig(n_init=10, n_iter=70)
    return _cached("hartmann6_sbo_bo_10rep", lambda: run_experiment(
        get_benchmark("hartmann6"), ["sbo", "bo"], 10, cfg, base_seed=0))


@pytest.fixture(scope="session")
def michalewicz_runs():
    cfg = RunConfig(n_init=10, n_iter=100)
    return _cached("michalewicz10_sbo_5rep", lambda: run_experiment(
        get_benchmark("michalewicz10"), ["sbo"], 5, cfg, base_seed=0))


def test_criterion_01_exp2d_convergence(exp2d_runs, report):
    summary, _ = exp2d_runs
    # gap after 20 model-guided evaluations: record index 10 init + 20 - 1
    med = float(summary.medians["sbo"][29])
    ok = med < 1e-2 and summary.failures["sbo"] == 0
    report(1, "exp2d convergence", ok, f"median gap@20 = {med:.3e}")
    assert ok


def test_criterion_02_hartmann6_no_harm(hartmann_runs, report):
    summary, _ = hartmann_runs
    best = {a: HARTMANN6_MINIMUM + float(np.median(summary.final_gaps[a]))
            for a in ("sbo", "bo")}
    ok = (abs(best["sbo"] - best["bo"]) <= 0.3
          and best["sbo"] <= -2.5 and best["bo"] <= -2.5
          and summary.failures["sbo"] == 0 and summary.failures["bo"] == 0)
    report(2, "hartmann6 no-harm", ok,
           f"median best sbo = {best['sbo']:.4f}, bo = {best['bo']:.4f}")
    assert ok


def test_criterion_03_exp2d_paired_dominance(exp2d_runs, report):
    summary, _ = exp2d_runs
    sbo, bo = summary.final_gaps["sbo"], summary.final_gaps["bo"]
    wins = sum(s <= b for s, b in zip(sbo, bo))
    ok = len(sbo) == len(bo) == 10 and wins >= 7
    report(3, "exp2d paired dominance", ok, f"sbo <= bo in {wins}/10 reps")
    assert ok


def test_criterion_04_michalewicz_beats_random(michalewicz_runs, report):
    summary, _ = michalewicz_runs
    bench = get_benchmark("michalewicz10")
    baselines = []
    for r in range(5):
        rng = np.random.default_rng(r)
        X = rng.uniform(0.0, math.pi, size=(1000, 10))
        baselines.append(min(bench.evaluator(x) for x in X))
    sbo_best = bench.known_minimum + float(np.median(summary.final_gaps["sbo"]))
    random_best = float(np.median(baselines))
    ok = sbo_best <= random_best and summary.failures["sbo"] == 0
    report(4, "michalewicz10 beats random", ok,
           f"sbo median best = {sbo_best:.4f}, random median best = {random_best:.4f}")
    assert ok


def _dense_predict(data, params, kernel, xs):
    mean, scale = center_scale(data.y)
    yc = (data.y - mean) / scale
    if kernel == "matern52":
        cross = lambda A, B: matern52_ard_cross(A, B, params)
        prior = params.signal_variance
    else:
        cross = lambda A, B: spartan_cross(A, B, params)
        prior = None
    G = gram(data.X, cross, noise_variance=1e-6)
    Ginv = np.linalg.inv(G)
    ks = cross(xs[None, :], data.X)[0]
    kss = cross(xs[None, :], xs[None, :])[0, 0] if prior is None else prior
    mu = mean + scale * float(ks @ Ginv @ yc)
    s2 = scale ** 2 * float(kss - ks @ Ginv @ ks)
    return mu, max(s2, 0.0)


def test_criterion_05_oracle_equivalence(report):
    rng = np.random.default_rng(10)
    worst = 0.0
    for case in range(100):
        kernel = "matern52" if case % 2 == 0 else "spartan"
        n = int(rng.integers(1, 11))
        d = int(rng.integers(1, 4))
        data = Dataset(rng.random((n, d)), rng.normal(size=n))
        ls = rng.uniform(0.2, 1.5, d)
        sv = float(rng.uniform(0.5, 2.0))
        if kernel == "matern52":
            params = ArdParams(ls, sv)
        else:
            params = SpartanParams(ArdParams(rng.uniform(0.05, 0.3, d), sv),
                                   ArdParams(ls, sv), rng.random(d))
        ps = fit(data, params, kernel=kernel, noise_variance=1e-6)
        for _ in range(3):
            xs = rng.random(d)
            mu, s2 = predict_many(ps, xs[None, :])
            mo, so = _dense_predict(data, params, kernel, xs)
            worst = max(worst, abs(float(mu[0]) - mo), abs(float(s2[0]) - so))
    ok = worst < 1e-8
    report(5, "oracle equivalence", ok, f"max |error| = {worst:.2e}")
    assert ok


def test_criterion_06_weight_normalization(report):
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(10_000):
        d = int(rng.integers(1, 5))
        w = WeightConfig(global_variance=float(rng.uniform(1.0, 20.0)),
                         local_variance=float(rng.uniform(0.01, 0.5)))
        ll, lg = weights(rng.random(d), rng.random(d), w)
        worst = max(worst, abs(ll ** 2 + lg ** 2 - 1.0))
    ok = worst < 1e-12
    report(6, "weight normalization", ok, f"max |l^2+g^2-1| = {worst:.2e}")
    assert ok


def test_criterion_07_spartan_psd(report):
    rng = np.random.default_rng(12)
    min_eig = math.inf
    for _ in range(50):
        d = int(rng.integers(1, 4))
        X = rng.random((20, d))
        sp = SpartanParams(
            ArdParams(rng.uniform(0.02, 0.5, d), float(rng.uniform(0.2, 3.0))),
            ArdParams(rng.uniform(0.2, 2.0, d), float(rng.uniform(0.2, 3.0))),
            rng.random(d))
        G = gram(X, lambda A, B: spartan_cross(A, B, sp), noise_variance=0.0)
        min_eig = min(min_eig, float(np.min(np.linalg.eigvalsh(G))))
    ok = min_eig >= -1e-8
    report(7, "spartan PSD", ok, f"min eigenvalue = {min_eig:.2e}")
    assert ok


def test_criterion_08_closed_form_acquisitions(report):
    e1 = expected_improvement(PredictionSet([0.0], [1.0]), 0.0)
    e2 = expected_improvement(PredictionSet([-1.0], [1.0]), 0.0)
    # published six-figure value 1.083312 is mis-rounded; the defining
    # expression Phi(1) + phi(1) evaluates to 1.0833155
    e2_ref = float(norm.cdf(1.0) + norm.pdf(1.0))
    ig = information_gain(PredictionSet([-1.0, 1.0], [1.0, 1.0]))
    ps = PredictionSet([0.3, -0.2], [0.5, 1.2])
    exact = eiig(ps, 0.1, alpha=0.0, n=3) == expected_improvement(ps, 0.1)
    ok = (abs(e1 - 0.398942) < 1e-6 and abs(e2 - e2_ref) < 1e-6
          and abs(ig - 0.5 * math.log(2.0)) < 1e-6 and exact)
    report(8, "closed-form acquisitions", ok,
           f"EI = {e1:.6f}, {e2:.6f}; IG = {ig:.6f}; alpha=0 exact = {exact}")
    assert ok


def test_criterion_09_slice_sampler(report):
    rng = np.random.default_rng(13)
    z = np.array([0.0])
    xs = np.empty(5000)
    for i in range(500):
        z = slice_step(z, lambda t: -0.5 * t[0] ** 2, rng)
    for i in range(5000):
        z = slice_step(z, lambda t: -0.5 * t[0] ** 2, rng)
        xs[i] = z[0]
    ks = kstest(xs, norm.cdf).statistic
    mean, var = float(np.mean(xs)), float(np.var(xs))
    ok = ks < 0.05 and abs(mean) < 3 / math.sqrt(5000) and 0.9 <= var <= 1.1
    report(9, "slice sampler", ok,
           f"KS = {ks:.4f}, mean = {mean:.4f}, var = {var:.4f}")
    assert ok


def test_criterion_10_spbo_structure(report):
    bench = get_benchmark("exp2d")
    cfg = RunConfig(n_init=10, n_iter=24, m=5, burn_in=30, seed=0)
    trace = _cached("spbo_exp2d_structure", lambda: run_spbo(
        bench.evaluator, bench.space, cfg))
    perts = [r for r in trace.records if r.phase == "perturbation"]
    worst = 0.0
    for r in perts:
        magnitude = cfg.spbo.c / r.meta["step"] ** cfg.spbo.gamma
        disp = np.abs(np.asarray(r.meta["pre_clip"])
                      - np.asarray(r.meta["paired"]))
        worst = max(worst, float(np.max(np.abs(disp - magnitude))))
    ok = len(perts) >= 5 and worst < 1e-12
    report(10, "spbo perturbation structure", ok,
           f"{len(perts)} perturbations, max |disp - c/i^gamma| = {worst:.2e}")
    assert ok


def test_criterion_11_hbo_exactness(report):
    bench = get_benchmark("mixed-quad4")

    def one(seed):
        cfg = RunConfig(n_init=10, m=5, burn_in=50, seed=seed,
                        hbo=HboConfig(N_c=30, N_d=4))
        tr = run_hbo(bench.evaluator, bench.space, cfg)
        best = min(tr.records, key=lambda r: r.y)
        return best.cats == (1,) and abs(best.x[0] - 0.3) <= 1e-2

    hits = _cached("hbo_mixed_quad4_10seed",
                   lambda: [one(seed) for seed in range(10)])
    ok = sum(hits) >= 8
    report(11, "hbo exactness", ok, f"{sum(hits)}/10 seeds exact")
    assert ok


def _strip_wall(path):
    lines = path.read_text().splitlines()
    return [",".join(ln.split(",")[:-1]) for ln in lines]


def test_criterion_12_determinism_and_crn(exp2d_runs, report, tmp_path):
    cfg = tmp_path / "exp.toml"
    cfg.write_text('benchmark = "exp2d"\nalgorithms = ["sbo"]\n'
                   'repetitions = 1\nn_init = 4\nn_iter = 3\nm = 3\n'
                   'burn_in = 10\n')
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(cfg), "--out", str(a)]) == 0
    assert main(["run", str(cfg), "--out", str(b)]) == 0
    fa, fb = next(a.glob("*.csv")), next(b.glob("*.csv"))
    # wall_ms is the one timing column; everything else must match bytewise
    identical = _strip_wall(fa) == _strip_wall(fb)

    _, traces = exp2d_runs
    shared = True
    for r in range(10):
        for ra, rb in zip(traces[("sbo", r)].records[:10],
                          traces[("bo", r)].records[:10]):
            shared &= bool(np.array_equal(ra.x, rb.x)) and ra.y == rb.y
    ok = identical and shared
    report(12, "determinism and CRN", ok,
           f"traces identical = {identical}, shared init = {shared}")
    assert ok
