"""Acceptance criteria, one test each, with a PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (the lines appear in the
terminal summary) or directly as ``python tests/test_acceptance.py``.
"""

import os
import time
from contextlib import contextmanager

import numpy as np
import pytest

import oracles
from cli_pipeline import pipeline_1d
from esnfilter.distortion import Distortion1DSpec, distort_1d
from esnfilter.experiments import (
    HARD_DISTORTION_1D,
    HARD_SYMBOL_HOLD,
    THREADS_ENV,
    Experiment1DSpec,
    Experiment2DSpec,
    run_experiment_1d,
    run_experiment_2d,
    run_seed_1d,
    seed_list,
)
from esnfilter.formats import (
    load_model,
    read_frame_pgm,
    read_signal_csv,
    report_row,
    save_model,
    write_frame_pgm,
    write_signal_csv,
)
from esnfilter.readout import TrainingSet, harvest_states, predict, ridge_solve, train
from esnfilter.reservoir import (
    ReservoirConfig,
    ReservoirState,
    build_reservoir,
    estimate_spectral_radius,
    run,
)
from esnfilter.signals import SignalSeries, gen_bitstream

RESULTS = []


def _verdict(request, name: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    RESULTS.append(line)
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")
    if reporter is not None:
        reporter.write_line("")
        reporter.write_line(line)
    else:
        print(line)
    assert ok, line


@contextmanager
def _env(name, value):
    old = os.environ.get(name)
    os.environ[name] = value
    try:
        yield
    finally:
        if old is None:
            del os.environ[name]
        else:
            os.environ[name] = old


def _rows(result):
    return [report_row(r) for r in result.reports], result.aggregate


def test_c1_recovery_band(request):
    t0 = time.perf_counter()
    result = run_experiment_1d(Experiment1DSpec())
    elapsed = time.perf_counter() - t0
    agg = result.aggregate
    ok = agg.median >= 0.85 and agg.max >= 0.90 and elapsed <= 10.0
    _verdict(request, "C1 1-D recovery band", ok,
             f"median={agg.median:.4f} max={agg.max:.4f} mean={agg.mean:.4f} "
             f"time={elapsed:.2f}s")


def test_c2_size_saturation(request):
    t0 = time.perf_counter()
    means = []
    for n in (10, 20, 40, 80):
        spec = Experiment1DSpec(n=n, distortion=HARD_DISTORTION_1D,
                                symbol_hold=HARD_SYMBOL_HOLD, seeds=seed_list(5))
        means.append(run_experiment_1d(spec).aggregate.mean)
    elapsed = time.perf_counter() - t0
    monotone = all(b >= a for a, b in zip(means, means[1:]))
    early, late = means[1] - means[0], means[3] - means[2]
    ok = monotone and late < early and elapsed <= 60.0
    _verdict(request, "C2 size saturation", ok,
             "means=" + ",".join(f"{m:.4f}" for m in means)
             + f" gain10->20={early:.4f} gain40->80={late:.4f} time={elapsed:.2f}s")


def test_c3_video_improvement(request):
    t0 = time.perf_counter()
    result = run_experiment_2d(Experiment2DSpec())
    elapsed = time.perf_counter() - t0
    gain = result.aggregate.mean
    ok = gain >= 3.0 and elapsed <= 120.0
    _verdict(request, "C3 2-D PSNR gain", ok,
             f"mean_gain={gain:.3f}dB min={result.aggregate.min:.3f}dB time={elapsed:.2f}s")


def test_c4_spectral_conditioning(request):
    rng = np.random.default_rng(2024)
    worst = 0.0
    count = 0
    for n, conn in ((5, 0.5), (20, 0.2), (100, 0.1)):
        for _ in range(34 if n != 100 else 32):
            rho = float(rng.uniform(0.1, 0.99))
            cfg = ReservoirConfig(n=n, rho_target=rho, connectivity=conn,
                                  seed=int(rng.integers(2**63)))
            w = build_reservoir(cfg)
            worst = max(worst, abs(np.max(np.abs(np.linalg.eigvals(w.w_self))) - rho))
            count += 1
    small_worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 5))
        m = rng.uniform(-1, 1, (n, n))
        est = estimate_spectral_radius(m).radius
        small_worst = max(small_worst, abs(est - oracles.spectral_radius_charpoly(m)))
    ok = count == 100 and worst <= 1e-6 and small_worst <= 1e-6
    _verdict(request, "C4 spectral conditioning", ok,
             f"{count} reservoirs max|rho-target|={worst:.2e}; "
             f"n<=4 vs charpoly max err={small_worst:.2e}")


def test_c5_ridge_oracle(request):
    rng = np.random.default_rng(5)
    worst = 0.0
    for i in range(50):
        lam = (0.0, 0.1, 10.0)[i % 3]
        n = int(rng.integers(1, 4))
        M = int(rng.integers(n if lam == 0 else 1, 6))
        o = int(rng.integers(1, 3))
        X = rng.normal(size=(n, M))
        D = rng.normal(size=(o, M))
        got = ridge_solve(X, D, lam)
        ref = oracles.ridge_bruteforce(X, D, lam)
        worst = max(worst, float(np.max(np.abs(got - ref))))

    cfg = ReservoirConfig(n=500, seed=1)
    d = gen_bitstream(3000, 4, 2)
    u = distort_1d(d, Distortion1DSpec(noise_seed=3))
    X, D = harvest_states(build_reservoir(cfg), cfg, TrainingSet(u, d, 100))
    lam = 1e-6
    W = ridge_solve(X, D, lam)
    lhs = W @ (X @ X.T + lam * np.eye(500))
    rhs = D @ X.T
    resid = float(np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs))
    ok = worst <= 1e-9 and resid < 1e-8 and X.shape == (500, 2900)
    _verdict(request, "C5 ridge oracle", ok,
             f"50 instances max err={worst:.2e}; n=500 M={X.shape[1]} "
             f"relative residual={resid:.2e}")


def test_c6_dynamics_invariants(request):
    rng = np.random.default_rng(6)
    cfg = ReservoirConfig(n=50, in_scale=1.0, seed=4)
    w = build_reservoir(cfg)
    u = SignalSeries(rng.uniform(-1e6, 1e6, 10_000))
    x = run(w, cfg, u)
    peak = float(np.max(np.abs(x)))
    bounded = peak <= cfg.kappa / cfg.gamma

    cfg0 = ReservoirConfig()
    w0 = build_reservoir(cfg0)
    drive = SignalSeries(rng.uniform(-1, 1, 500))
    xa = run(w0, cfg0, drive, x0=ReservoirState(rng.uniform(-1, 1, cfg0.n)))
    xb = run(w0, cfg0, drive, x0=ReservoirState(rng.uniform(-1, 1, cfg0.n)))
    gap = float(np.max(np.abs(xa[-1] - xb[-1])))

    xz = run(w0, cfg0, SignalSeries(np.zeros(1000)))
    zero = not np.any(xz)
    ok = bounded and gap < 1e-6 and zero
    _verdict(request, "C6 dynamics invariants", ok,
             f"max|x|={peak:.6f} (bound {cfg.kappa / cfg.gamma}); "
             f"|dx(500)|inf={gap:.2e}; zero fixed point exact={zero}")


def test_c7_distortion_oracle(request):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        K = int(rng.integers(1, 4))
        taps = int(rng.integers(1, 5))
        a = tuple(rng.uniform(-1.5, 1.5, K))
        b = tuple(rng.uniform(-1, 1, taps))
        d = rng.uniform(-1, 1, int(rng.integers(1, 60)))
        got = distort_1d(SignalSeries(d), Distortion1DSpec(a, b, (0.0,) * K)).data[:, 0]
        worst = max(worst, float(np.max(np.abs(got - oracles.poly_of_delays(d, a, b)))))

    spec = Distortion1DSpec(noise_seed=11)
    d = gen_bitstream(400, 4, 1).data[:, 0]
    e = d.copy()
    e[250:] = rng.uniform(-1, 1, 150)
    causal = np.array_equal(distort_1d(SignalSeries(d), spec).data[:250],
                            distort_1d(SignalSeries(e), spec).data[:250])
    ok = worst <= 1e-12 and causal
    _verdict(request, "C7 distortion oracle", ok,
             f"100 specs max err={worst:.2e}; causal prefix identical={causal}")


def test_c8_determinism_and_round_trips(request, tmp_path):
    checks = {}
    spec1 = Experiment1DSpec(train_len=800, test_len=600, seeds=seed_list(4))
    spec2 = Experiment2DSpec(n=60, train_frames=150, test_frames=60, seeds=seed_list(3))
    with _env(THREADS_ENV, "1"):
        a1, a2 = run_experiment_1d(spec1), run_experiment_2d(spec2)
        b1, b2 = run_experiment_1d(spec1), run_experiment_2d(spec2)
    with _env(THREADS_ENV, "4"):
        c1, c2 = run_experiment_1d(spec1), run_experiment_2d(spec2)
    checks["repeat runs"] = _rows(a1) == _rows(b1) and _rows(a2) == _rows(b2)
    checks["thread counts"] = _rows(a1) == _rows(c1) and _rows(a2) == _rows(c2)

    d = gen_bitstream(600, 4, 1)
    u = distort_1d(d, Distortion1DSpec(noise_seed=2))
    model = train(ReservoirConfig(seed=0), TrainingSet(u, d, 100))
    save_model(model, tmp_path / "m.json")
    loaded = load_model(tmp_path / "m.json")
    checks["model round trip"] = (
        loaded.weights.equals(model.weights) and loaded.config == model.config
        and np.array_equal(predict(loaded, u).data, predict(model, u).data)
    )

    write_signal_csv(u, tmp_path / "u.csv")
    checks["csv round trip"] = read_signal_csv(tmp_path / "u.csv").equals(u)

    frame = np.random.default_rng(8).uniform(-1, 1, (8, 8))
    write_frame_pgm(frame, tmp_path / "f.pgm")
    checks["pgm round trip"] = bool(
        np.max(np.abs(read_frame_pgm(tmp_path / "f.pgm") - frame)) <= 1 / 255
    )

    cli = pipeline_1d(tmp_path, 20)
    inproc = report_row(run_seed_1d(Experiment1DSpec(eval_washout=100), 20))
    checks["cli equals in-process"] = all(
        cli[k] == v for k, v in inproc.items() if k != "training_nrmse"
    )
    ok = all(checks.values())
    _verdict(request, "C8 determinism and round trips", ok,
             "; ".join(f"{k}={v}" for k, v in checks.items()))


@pytest.mark.slow
def test_large_scale_video(request):
    spec = Experiment2DSpec(n=500, train_frames=3000, test_frames=600)
    gain = run_experiment_2d(spec).aggregate.mean
    _verdict(request, "large-scale 2-D run (long)", gain >= 3.0, f"mean_gain={gain:.3f}dB")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-p", "no:cacheprovider"]))
