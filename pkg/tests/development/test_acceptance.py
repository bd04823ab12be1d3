"""Long-running end-to-end checks. Run with: pytest -m slow tests/development"""
import math

import numpy as np
import pytest
from msgspec import structs

from AirshipWind.estimators import EstimatorConfig, config_with_scaled_rows, default_config, predict, update
from AirshipWind.eval_cli import REPLICATE_SEED_STRIDE, DatasetJob, RunJob, compute_rms, dataset_job, execute_run
from AirshipWind.models import EstimatorKind, MeasurementVariant
from AirshipWind.neural import N_INPUTS, Dataset, forward, train_scg
from AirshipWind.pipeline import OracleSource, PipelineConfig, run_estimators
from AirshipWind.simkit import SensorNoise, packaged_scenario, synthesize_sensors, training_grid
from AirshipWind.wind_model import CF_FLOOR
from helpers import make_frame

pytestmark = pytest.mark.slow


def test_noiseless_scenario_converges():
    spec = packaged_scenario("scenario1")
    streams = synthesize_sensors(spec, noise=SensorNoise.noiseless())
    # noise-free data: trust the velocity rows and let c_f barely drift
    cfg = EstimatorConfig.from_diagonals(MeasurementVariant.THREE_EQ, [1e-4, 1e-4, 1e-9], [1e3, 1e-2, 1e-2])
    result = run_estimators(spec, streams, [EstimatorKind.EKF], estimator_configs={EstimatorKind.EKF: cfg})
    est = result.estimates
    err = np.hypot(est["ekf_v_nw"] - est["true_v_nw"], est["ekf_v_ew"] - est["true_v_ew"])
    cf_err = np.abs(est["ekf_c_f"] - est["true_c_f"])
    for start, end in ((110.0, 160.0), (220.0, 320.0)):
        window = (est["t"] >= start) & (est["t"] < end)
        assert window.any()
        assert float(err[window].max()) < 0.05
        assert float(cf_err[window].max()) < 0.01
    assert result.skipped_updates["ekf"] == 0


def test_distrusted_hybrid_tracks_three_equation_filter():
    spec = packaged_scenario("scenario2")
    streams = synthesize_sensors(spec)
    q, r = [1e-4, 1e-4, 5e-7], [10.24] * 3
    configs = {
        EstimatorKind.EKF: EstimatorConfig.from_diagonals(MeasurementVariant.THREE_EQ, q, r),
        EstimatorKind.HYBRID: config_with_scaled_rows(
            EstimatorConfig.from_diagonals(MeasurementVariant.HYBRID, q, r * 2), [3, 4, 5], 1e9
        ),
    }
    est = run_estimators(
        spec, streams, [EstimatorKind.EKF, EstimatorKind.HYBRID],
        estimator_configs=configs, nn_source=OracleSource(spec, (1.0, -1.0, 0.1)),
    ).estimates
    for col in ("v_nw", "v_ew", "c_f"):
        assert np.max(np.abs(est[f"hybrid_{col}"] - est[f"ekf_{col}"])) < 1e-6


def test_oracle_hybrid_beats_three_equation_filter():
    spec = packaged_scenario("scenario1")
    job = RunJob(
        spec=spec,
        kinds=[EstimatorKind.EKF, EstimatorKind.HYBRID],
        pipeline=PipelineConfig(),
        noise=SensorNoise(),
        estimator_configs={},
        nn_bias=[0.0, 0.0, 0.0],
    )
    artifacts = execute_run(job)
    report = compute_rms(artifacts.result.estimates, artifacts.truth)
    hybrid, ekf = report.estimators["hybrid"], report.estimators["ekf"]
    assert hybrid.rms_v_nw + hybrid.rms_v_ew < ekf.rms_v_nw + ekf.rms_v_ew


def test_network_learns_a_smooth_map():
    rng = np.random.default_rng(7)
    x = rng.uniform(-1, 1, size=(2000, N_INPUTS))
    A = rng.uniform(-0.5, 0.5, size=(3, N_INPUTS))
    y = x @ A.T
    model, report = train_scg(Dataset(x, y, np.zeros(len(x))), epochs=1000, seed=1)
    assert report.epochs <= 1000
    assert report.metrics["test"].mse < 1e-4
    assert report.metrics["test"].r_value > 0.999
    fresh = rng.uniform(-1, 1, size=(200, N_INPUTS))
    assert np.mean((forward(model, fresh) - fresh @ A.T) ** 2) < 1e-3


def test_covariance_symmetry_over_many_cycles():
    rng = np.random.default_rng(99)
    cfg = default_config(MeasurementVariant.THREE_EQ)
    x, P = cfg.x0.as_array(), cfg.p0_matrix
    for _ in range(100_000):
        frame = make_frame(
            v_pitot=rng.uniform(3, 9),
            v_n=rng.uniform(-10, 10),
            v_e=rng.uniform(-10, 10),
            psi=rng.uniform(-math.pi, math.pi),
        )
        x, P = predict(x, P, cfg)
        x, P, _ = update(x, P, None, frame, cfg)
    assert np.array_equal(P, P.T)
    assert np.all(np.isfinite(P))
    assert x[2] >= CF_FLOOR


def test_dataset_generation_is_reproducible():
    grid = training_grid(rotations_deg=(45.0,), speeds=(3.0,), headings_deg=(112.5,))
    jobs = [DatasetJob(spec, SensorNoise(), PipelineConfig()) for spec in grid]
    first = [dataset_job(job) for job in jobs]
    second = [dataset_job(job) for job in jobs]
    for (x1, y1), (x2, y2) in zip(first, second):
        assert x1.tobytes() == x2.tobytes()
        assert y1.tobytes() == y2.tobytes()


def _racetrack_grid_dataset(decimate: int = 8) -> Dataset:
    grid = training_grid(
        rotations_deg=(0.0, 90.0),
        speeds=(1.0, 3.0, 5.0),
        headings_deg=tuple(45.0 * k for k in range(8)),
    )
    grid = [spec for spec in grid if spec.name.startswith("racetrack")]
    assert len(grid) == 48
    results = [dataset_job(DatasetJob(spec, SensorNoise(), PipelineConfig())) for spec in grid]
    x = np.vstack([r[0][::decimate] for r in results])
    y = np.vstack([r[1][::decimate] for r in results])
    ids = np.concatenate([np.full(len(r[0][::decimate]), i) for i, r in enumerate(results)])
    return Dataset(x, y, ids)


def test_trained_network_on_grid_subset():
    dataset = _racetrack_grid_dataset()
    _, report = train_scg(dataset, epochs=2000, seed=0)
    assert report.metrics["test"].mse <= 0.05
    assert report.metrics["test"].r_value >= 0.95

    model_a, rerun_a = train_scg(dataset, epochs=50, seed=0)
    model_b, rerun_b = train_scg(dataset, epochs=50, seed=0)
    assert rerun_a.train_mse == report.train_mse[:50]
    assert np.array_equal(model_a.parameters(), model_b.parameters())


def _seeded_reports(kinds, n_seeds, nn_bias=None):
    spec = packaged_scenario("scenario1")
    reports = []
    for k in range(n_seeds):
        job = RunJob(
            spec=structs.replace(spec, seeds=spec.seeds.offset(REPLICATE_SEED_STRIDE * k)),
            kinds=kinds,
            pipeline=PipelineConfig(),
            noise=SensorNoise(),
            estimator_configs={},
            nn_bias=nn_bias,
        )
        artifacts = execute_run(job)
        reports.append(compute_rms(artifacts.result.estimates, artifacts.truth))
    return reports


def test_three_equation_filter_beats_single_equation_median():
    reports = _seeded_reports([EstimatorKind.CHO2011, EstimatorKind.EKF], 25)
    for component in ("rms_v_nw", "rms_v_ew"):
        cho = np.median([getattr(r.estimators["cho2011"], component) for r in reports])
        ekf = np.median([getattr(r.estimators["ekf"], component) for r in reports])
        assert ekf < cho


def test_biased_oracle_hybrid_improves_east_component():
    reports = _seeded_reports([EstimatorKind.EKF, EstimatorKind.HYBRID], 25, nn_bias=[0.3, 0.3, 0.0])
    wins = sum(r.estimators["hybrid"].rms_v_ew < r.estimators["ekf"].rms_v_ew for r in reports)
    assert wins >= 20
