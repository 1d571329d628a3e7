import math

import numpy as np
import pytest

from esnfilter.distortion import Distortion1DSpec, Distortion2DSpec
from esnfilter.experiments import (
    Aggregate,
    Experiment1DSpec,
    Experiment2DSpec,
    fit_1d,
    make_data_1d,
    run_experiment_1d,
    run_experiment_2d,
    run_seed_1d,
    seed_list,
    worker_count,
)
from esnfilter.formats import read_frame_pgm
from esnfilter.signals import SignalSeries


def test_seed_list():
    assert seed_list(3) == (0, 10, 20)
    assert seed_list(2, base=5) == (5, 15)
    with pytest.raises(ValueError):
        seed_list(0)


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("ESN_FILTER_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("ESN_FILTER_THREADS", "0")
    assert worker_count() >= 1
    monkeypatch.setenv("ESN_FILTER_THREADS", "-2")
    with pytest.raises(ValueError):
        worker_count()


def test_spec_validation():
    with pytest.raises(ValueError):
        Experiment1DSpec(train_len=50, washout=50)
    with pytest.raises(ValueError):
        Experiment1DSpec(test_len=100, eval_washout=100)
    with pytest.raises(ValueError):
        Experiment1DSpec(seeds=())
    with pytest.raises(ValueError):
        Experiment2DSpec(train_frames=100, washout=100)


def test_identity_distortion_recovers_everything():
    spec = Experiment1DSpec(
        distortion=Distortion1DSpec(a=(1.0,), b=(1.0,), c=(0.0,)),
        train_len=1000, test_len=1000, seeds=seed_list(4),
    )
    result = run_experiment_1d(spec)
    assert all(r.recovery_rate >= 0.99 for r in result.reports)


def test_aggregate_is_arithmetic_mean():
    spec = Experiment1DSpec(train_len=600, test_len=600, seeds=seed_list(5),
                            distortion=Distortion1DSpec(c=(0.6, 0.0)))
    result = run_experiment_1d(spec)
    rates = [r.recovery_rate for r in result.reports]
    assert result.aggregate.mean == pytest.approx(sum(rates) / len(rates), rel=1e-15)
    assert result.aggregate.min == min(rates) and result.aggregate.max == max(rates)
    assert [r.seed for r in result.reports] == list(spec.seeds)


def test_reports_carry_all_rates():
    r = run_seed_1d(Experiment1DSpec(train_len=800, test_len=800), 0)
    assert 0 <= r.recovery_rate <= 1 and 0 <= r.recovery_rate_all <= 1
    assert 0 <= r.recovery_rate_interior <= 1
    assert r.eval_washout == 100
    assert abs(r.best_lag) <= 5
    assert math.isfinite(r.training_nrmse)


def test_test_segment_never_influences_readout():
    spec = Experiment1DSpec(train_len=800, test_len=800)
    clean, distorted = make_data_1d(spec, 0)
    perm = np.random.default_rng(0).permutation(800)
    clean2 = SignalSeries(np.concatenate([clean.data[:800], clean.data[800:][perm]]))
    dist2 = SignalSeries(np.concatenate([distorted.data[:800], distorted.data[800:][perm]]))
    a = fit_1d(spec, 0, clean, distorted)
    b = fit_1d(spec, 0, clean2, dist2)
    assert np.array_equal(a.weights.w_out, b.weights.w_out)


def test_experiment_1d_is_reproducible():
    spec = Experiment1DSpec(train_len=600, test_len=600, seeds=seed_list(3))
    assert run_experiment_1d(spec) == run_experiment_1d(spec)


def test_experiment_independent_of_worker_count(monkeypatch):
    spec = Experiment1DSpec(train_len=600, test_len=600, seeds=seed_list(4))
    monkeypatch.setenv("ESN_FILTER_THREADS", "1")
    serial = run_experiment_1d(spec)
    monkeypatch.setenv("ESN_FILTER_THREADS", "4")
    parallel = run_experiment_1d(spec)
    assert serial == parallel


def _small_2d(**kw):
    base = dict(n=60, train_frames=200, test_frames=80, seeds=seed_list(2))
    base.update(kw)
    return Experiment2DSpec(**base)


def test_2d_pass_through_is_high_quality():
    result = run_experiment_2d(_small_2d(n=200, distortion=Distortion2DSpec(1.0, 0.0)))
    for r in result.reports:
        assert r.psnr_distorted_db == 300.0
        assert r.psnr_filtered_db > 20.0


@pytest.mark.xfail(
    strict=True,
    reason="undistorted input scores the capped 300 dB PSNR; no filter output comes within 0.1 dB",
)
def test_2d_pass_through_within_a_tenth_of_a_db():
    result = run_experiment_2d(_small_2d(n=200, distortion=Distortion2DSpec(1.0, 0.0)))
    for r in result.reports:
        assert r.psnr_filtered_db >= r.psnr_distorted_db - 0.1


def test_2d_reproducible_and_writes_frames(tmp_path):
    spec = _small_2d()
    a = run_experiment_2d(spec, tmp_path)
    b = run_experiment_2d(spec)
    assert a == b
    for r in a.reports:
        assert r.mse_reduction > 0
        assert r.psnr_gain_db == r.psnr_filtered_db - r.psnr_distorted_db
    files = sorted(tmp_path.glob("*.pgm"))
    assert len(files) == 2 * 4 * 3
    assert read_frame_pgm(files[0]).shape == (8, 8)


def test_2d_in_scale_default():
    assert Experiment2DSpec().resolved_in_scale == pytest.approx(1 / 8)
    assert Experiment2DSpec(frame_shape=(16, 16)).resolved_in_scale == pytest.approx(1 / 16)
    assert Experiment2DSpec(in_scale=0.5).resolved_in_scale == 0.5


def test_aggregate_of():
    agg = Aggregate.of([0.9, 1.0, 0.8])
    assert agg.median == 0.9 and agg.min == 0.8 and agg.max == 1.0
