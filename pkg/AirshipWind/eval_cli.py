"""Command-line driver: datasets, training, scenario runs and RMS tables."""
import argparse
import asyncio
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import msgspec
import numpy as np
import pandas as pd
from msgspec import structs

from .config_loader import ConfigLoader
from .estimators import EstimatorConfig
from .exceptions import AirshipWindError, ConfigError, MisalignedLogError
from .model_store import file_sha256, load_dataset, load_model, save_dataset, save_model
from .models import EstimatorKind, EstimatorRms, ReplicateSummary, RmsReport, RunManifest
from .neural import Dataset, MlpModel, train_scg
from .pipeline import MlpSource, OracleSource, PipelineConfig, RunResult, collect_nn_samples, run_estimators
from .simkit import (
    GRID_HEADINGS_DEG,
    GRID_ROTATIONS_DEG,
    GRID_SPEEDS,
    PUBLISHED_GRID_COUNT,
    ScenarioSpec,
    SensorNoise,
    SensorStreams,
    load_scenario,
    packaged_scenario,
    simulate_truth,
    synthesize_sensors,
    training_grid,
    truth_at,
)

logger = logging.getLogger(__name__)

# Published fit and RMS figures, kept as annotations next to our own numbers
REFERENCE_TRAIN = {
    "train": {"r_value": 0.99731, "mse": 0.0206},
    "test": {"r_value": 0.99720, "mse": 0.0205},
}
REFERENCE_RMS = {
    "scenario1": {"cho2011": (1.01, 1.74), "ekf": (0.58, 1.42), "nn": (1.19, 1.25), "hybrid": (0.74, 0.71)},
    "scenario2": {"cho2011": (0.71, 0.52), "ekf": (0.52, 0.38), "nn": (1.01, 1.21), "hybrid": (0.46, 0.52)},
}

REPLICATE_SEED_STRIDE = 1000

RUN_OUTPUTS = {
    "estimates": "estimates.csv",
    "truth": "truth.csv",
    "trajectory": "trajectory.csv",
    "imu": "imu.csv",
    "gps": "gps.csv",
    "pitot": "pitot.csv",
    "timing": "timing.csv",
    "report": "report.json",
    "manifest": "manifest.json",
}


def write_csv(df: pd.DataFrame, path: Path):
    """CSV with the time column at 1e-6 s resolution."""
    out = df.copy()
    if "t" in out.columns:
        out["t"] = out["t"].map("{:.6f}".format)
    out.to_csv(path, index=False)


def write_json(obj: Any, path: Path):
    with open(path, "wb") as f:
        f.write(msgspec.json.format(msgspec.json.encode(obj), indent=2) + b"\n")


def compute_rms(estimates: pd.DataFrame, truth: pd.DataFrame, burn_in: float = 0.0) -> RmsReport:
    """RMS of V_Nw and V_Ew errors per estimator over the whole log.

    With burn_in > 0 the report also carries the RMS over ticks with t >= burn_in.
    """
    for name, df in (("estimate", estimates), ("truth", truth)):
        if "t" not in df.columns:
            raise MisalignedLogError(f"{name} log has no time column")
    for col in ("v_nw", "v_ew"):
        if col not in truth.columns:
            raise MisalignedLogError(f"truth log has no {col} column")
    t_est = estimates["t"].to_numpy(dtype=float)
    t_true = truth["t"].to_numpy(dtype=float)
    if len(t_est) != len(t_true):
        raise MisalignedLogError(f"estimate log has {len(t_est)} rows, truth log has {len(t_true)}")
    if not np.array_equal(t_est, t_true):
        i = int(np.argmax(t_est != t_true))
        raise MisalignedLogError(f"timestamps differ at row {i}: {t_est[i]} vs {t_true[i]}")
    if len(t_est) == 0:
        raise MisalignedLogError("logs are empty")

    names = [c[:-len("_v_nw")] for c in estimates.columns if c.endswith("_v_nw") and c != "true_v_nw"]
    if not names:
        raise MisalignedLogError("estimate log has no estimator columns")

    def table(mask: np.ndarray) -> Dict[str, EstimatorRms]:
        rows = {}
        for name in names:
            e_n = estimates[f"{name}_v_nw"].to_numpy(dtype=float)[mask] - truth["v_nw"].to_numpy(dtype=float)[mask]
            e_e = estimates[f"{name}_v_ew"].to_numpy(dtype=float)[mask] - truth["v_ew"].to_numpy(dtype=float)[mask]
            rows[name] = EstimatorRms(
                rms_v_nw=float(np.sqrt(np.mean(e_n ** 2))),
                rms_v_ew=float(np.sqrt(np.mean(e_e ** 2))),
            )
        return with_percentages(rows)

    after = {}
    if burn_in > 0:
        mask = t_est >= burn_in
        if not mask.any():
            raise ConfigError(f"burn-in of {burn_in} s leaves no ticks")
        after = table(mask)
    return RmsReport(
        estimators=table(np.ones(len(t_est), dtype=bool)),
        n_ticks=len(t_est),
        burn_in=burn_in,
        after_burn_in=after,
    )


def with_percentages(rows: Dict[str, EstimatorRms]) -> Dict[str, EstimatorRms]:
    """Fill in percentage deltas relative to cho2011 when it is present."""
    base = rows.get(EstimatorKind.CHO2011.value)
    if base is None:
        return rows

    def pct(value: float, ref: float) -> Optional[float]:
        return (value - ref) / ref * 100.0 if ref > 0 else None

    return {
        name: structs.replace(
            r,
            pct_v_nw=pct(r.rms_v_nw, base.rms_v_nw),
            pct_v_ew=pct(r.rms_v_ew, base.rms_v_ew),
        )
        for name, r in rows.items()
    }


def reference_rms(scenario_id: str) -> Dict[str, EstimatorRms]:
    ref = REFERENCE_RMS.get(scenario_id)
    if not ref:
        return {}
    return with_percentages({name: EstimatorRms(*values) for name, values in ref.items()})


def log_rms_table(report: RmsReport, title: str):
    logger.info(f"{title} ({report.n_ticks} ticks)")
    for name, r in report.estimators.items():
        pct = "" if r.pct_v_nw is None else f"  ({r.pct_v_nw:+.1f}%, {r.pct_v_ew:+.1f}%)"
        logger.info(f"  {name:8s} V_Nw {r.rms_v_nw:.3f}  V_Ew {r.rms_v_ew:.3f}{pct}")
    if report.after_burn_in:
        logger.info(f"  after {report.burn_in:g} s burn-in:")
        for name, r in report.after_burn_in.items():
            logger.info(f"  {name:8s} V_Nw {r.rms_v_nw:.3f}  V_Ew {r.rms_v_ew:.3f}")


def apply_scenario_overrides(spec: ScenarioSpec, overrides: Dict[str, Any]) -> ScenarioSpec:
    if not overrides:
        return spec
    unknown = set(overrides) - set(ScenarioSpec.__struct_fields__)
    if unknown:
        raise ConfigError(f"Unknown scenario override keys: {sorted(unknown)}")
    try:
        return msgspec.convert({**msgspec.to_builtins(spec), **overrides}, ScenarioSpec)
    except msgspec.ValidationError as e:
        raise ConfigError(f"Invalid scenario override: {e}")


async def gather_jobs(fn: Callable, jobs: Sequence[Any], workers: int) -> List[Any]:
    """Run jobs in a process pool; results come back in submission order."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    loop = asyncio.get_running_loop()
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [loop.run_in_executor(pool, fn, job) for job in jobs]
        return await asyncio.gather(*futures)


@dataclass
class DatasetJob:
    spec: ScenarioSpec
    noise: SensorNoise
    pipeline: PipelineConfig


def dataset_job(job: DatasetJob):
    streams = synthesize_sensors(job.spec, job.noise)
    return collect_nn_samples(job.spec, streams, job.pipeline)


@dataclass
class RunJob:
    spec: ScenarioSpec
    kinds: List[EstimatorKind]
    pipeline: PipelineConfig
    noise: SensorNoise
    estimator_configs: Dict[EstimatorKind, EstimatorConfig]
    model: Optional[MlpModel] = None
    nn_bias: Optional[List[float]] = None


@dataclass
class RunArtifacts:
    result: RunResult
    truth: pd.DataFrame
    trajectory: pd.DataFrame
    streams: SensorStreams


def execute_run(job: RunJob) -> RunArtifacts:
    """Simulate one scenario and run the selected estimators on it."""
    streams = synthesize_sensors(job.spec, job.noise)
    nn_source = None
    if job.model is not None:
        nn_source = MlpSource(job.model)
    elif job.nn_bias is not None:
        nn_source = OracleSource(job.spec, job.nn_bias)
    result = run_estimators(job.spec, streams, job.kinds, job.pipeline, job.estimator_configs, nn_source)

    t = result.estimates["t"].to_numpy()
    tick_truth = truth_at(job.spec, t)
    truth = pd.DataFrame({
        "t": t,
        "v_n": tick_truth.v_ned[:, 0],
        "v_e": tick_truth.v_ned[:, 1],
        "v_d": tick_truth.v_ned[:, 2],
        "phi": tick_truth.attitude[:, 0],
        "theta": tick_truth.attitude[:, 1],
        "psi": tick_truth.attitude[:, 2],
        "v_nw": tick_truth.wind[:, 0],
        "v_ew": tick_truth.wind[:, 1],
        "c_f": tick_truth.c_f,
    })
    sim = simulate_truth(job.spec)
    trajectory = pd.DataFrame({
        "t": sim.t,
        "n": sim.position[:, 0],
        "e": sim.position[:, 1],
        "d": sim.position[:, 2],
        "v_n": sim.v_ned[:, 0],
        "v_e": sim.v_ned[:, 1],
        "psi": sim.attitude[:, 2],
        "v_nw": sim.wind[:, 0],
        "v_ew": sim.wind[:, 1],
    })
    return RunArtifacts(result=result, truth=truth, trajectory=trajectory, streams=streams)


def timing_summary(timing: pd.DataFrame) -> pd.DataFrame:
    """Step time percentiles per estimator, microseconds."""
    rows = []
    for name, group in timing.groupby("estimator", sort=False):
        us = group["step_ns"].to_numpy(dtype=float) / 1000.0
        p50, p90, p99 = np.percentile(us, [50, 90, 99])
        rows.append({"estimator": name, "steps": len(us), "p50_us": p50, "p90_us": p90, "p99_us": p99, "max_us": us.max()})
    return pd.DataFrame(rows)


def build_manifest(job: RunJob, model_path: Optional[str], burn_in: float) -> RunManifest:
    return RunManifest(
        scenario_id=job.spec.name,
        scenario=msgspec.to_builtins(job.spec),
        seeds=msgspec.to_builtins(job.spec.seeds),
        estimators=[k.value for k in job.kinds],
        estimator_configs={k.value: msgspec.to_builtins(c) for k, c in job.estimator_configs.items()},
        pipeline=msgspec.to_builtins(job.pipeline),
        noise=msgspec.to_builtins(job.noise),
        outputs=dict(RUN_OUTPUTS),
        model_path=str(model_path) if model_path else None,
        model_sha256=file_sha256(model_path) if model_path else None,
        nn_bias=job.nn_bias,
        burn_in=burn_in,
    )


def write_run(artifacts: RunArtifacts, manifest: RunManifest, out_dir: Path) -> RmsReport:
    out_dir.mkdir(parents=True, exist_ok=True)
    streams = artifacts.streams
    write_csv(artifacts.result.estimates, out_dir / RUN_OUTPUTS["estimates"])
    write_csv(artifacts.truth, out_dir / RUN_OUTPUTS["truth"])
    write_csv(artifacts.trajectory, out_dir / RUN_OUTPUTS["trajectory"])
    write_csv(pd.DataFrame({"t": streams.imu_t, "phi": streams.imu[:, 0], "theta": streams.imu[:, 1],
                            "psi": streams.imu[:, 2]}), out_dir / RUN_OUTPUTS["imu"])
    write_csv(pd.DataFrame({"t": streams.gps_t, "v_n": streams.gps[:, 0], "v_e": streams.gps[:, 1],
                            "v_d": streams.gps[:, 2]}), out_dir / RUN_OUTPUTS["gps"])
    write_csv(pd.DataFrame({"t": streams.pitot_t, "v_pitot": streams.pitot}), out_dir / RUN_OUTPUTS["pitot"])
    timing_summary(artifacts.result.timing).to_csv(out_dir / RUN_OUTPUTS["timing"], index=False)

    report = compute_rms(artifacts.result.estimates, artifacts.truth, manifest.burn_in)
    report = structs.replace(report, reference=reference_rms(manifest.scenario_id))
    write_json(report, out_dir / RUN_OUTPUTS["report"])
    write_json(manifest, out_dir / RUN_OUTPUTS["manifest"])
    logger.info(f"Wrote run outputs to {out_dir}")
    return report


def parse_estimators(value: str) -> List[EstimatorKind]:
    kinds = []
    for name in value.split(","):
        name = name.strip()
        if not name:
            continue
        try:
            kinds.append(EstimatorKind(name))
        except ValueError:
            raise ConfigError(f"Unknown estimator {name!r}; choose from {[k.value for k in EstimatorKind]}")
    if not kinds:
        raise ConfigError("No estimators selected")
    return kinds


def _resolve_scenario(args, config: Dict[str, Any]) -> ScenarioSpec:
    if args.scenario:
        spec = load_scenario(args.scenario)
    else:
        spec = packaged_scenario(args.packaged)
    return apply_scenario_overrides(spec, ConfigLoader.get_scenario_overrides(config))


def _estimator_configs(args, config: Dict[str, Any], kinds: List[EstimatorKind]) -> Dict[EstimatorKind, EstimatorConfig]:
    from_files = {}
    for path in args.estimator_config or []:
        cfg = ConfigLoader.load_estimator_config(path)
        from_files[cfg.variant] = cfg
    configs = {}
    for kind in kinds:
        if kind.variant is None:
            continue
        configs[kind] = from_files.get(kind.variant) or ConfigLoader.get_estimator_config(config, kind.variant)
    return configs


def _job_from_manifest(manifest: RunManifest) -> RunJob:
    try:
        spec = msgspec.convert(manifest.scenario, ScenarioSpec)
        kinds = [EstimatorKind(k) for k in manifest.estimators]
        configs = {EstimatorKind(k): msgspec.convert(c, EstimatorConfig) for k, c in manifest.estimator_configs.items()}
        pipeline = msgspec.convert(manifest.pipeline, PipelineConfig)
        noise = msgspec.convert(manifest.noise, SensorNoise)
    except (msgspec.ValidationError, ValueError) as e:
        raise ConfigError(f"Manifest cannot be replayed: {e}")

    model = None
    if manifest.model_path:
        digest = file_sha256(manifest.model_path)
        if digest != manifest.model_sha256:
            raise ConfigError(f"Model {manifest.model_path} changed since the run (sha256 {digest})")
        model = load_model(manifest.model_path)
    return RunJob(spec, kinds, pipeline, noise, configs, model, manifest.nn_bias)


async def cmd_dataset(args, config: Dict[str, Any]) -> Dataset:
    """Run the training grid and log filtered network inputs with true targets."""
    pipeline = ConfigLoader.get_pipeline_config(config)
    noise = SensorNoise.noiseless() if args.noise_free else ConfigLoader.get_noise_config(config)
    workers = args.workers or ConfigLoader.get_run_config(config)["workers"]
    overrides = ConfigLoader.get_scenario_overrides(config)

    grid = training_grid(args.rotations, args.speeds, args.headings, base_seed=args.base_seed)
    grid = [apply_scenario_overrides(spec, overrides) for spec in grid]
    logger.info(f"Generating dataset from {len(grid)} runs (published campaign: {PUBLISHED_GRID_COUNT}) "
                f"with {workers} workers")

    results = await gather_jobs(dataset_job, [DatasetJob(spec, noise, pipeline) for spec in grid], workers)
    inputs = np.vstack([r[0] for r in results])
    targets = np.vstack([r[1] for r in results])
    scenario_id = np.concatenate([np.full(len(r[0]), i, dtype=np.int64) for i, r in enumerate(results)])
    dataset = Dataset(inputs, targets, scenario_id)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(dataset, out)
    return dataset


def cmd_train(args, config: Dict[str, Any]):
    training = ConfigLoader.get_training_config(config)
    epochs = training.epochs if args.epochs is None else args.epochs
    seed = training.seed if args.seed is None else args.seed
    normalize = training.normalize and not args.raw
    if epochs < 0:
        raise ConfigError(f"epochs must be non-negative, got {epochs}")

    dataset = load_dataset(args.dataset)
    model, report = train_scg(dataset, epochs, seed, normalize=normalize, log_every=training.log_every)
    report = structs.replace(report, reference=REFERENCE_TRAIN)

    save_model(model, args.out)
    report_path = Path(args.report) if args.report else Path(f"{args.out}.report.json")
    write_json(report, report_path)

    for name, m in report.metrics.items():
        r = "n/a" if m.r_value is None else f"{m.r_value:.5f}"
        logger.info(f"{name:10s} rows {m.n_rows:8d}  MSE {m.mse:.5f}  R {r}")
    logger.info(f"Best validation epoch {report.best_epoch} of {report.epochs}; report written to {report_path}")
    return model, report


async def cmd_run(args, config: Dict[str, Any]):
    run_config = ConfigLoader.get_run_config(config)
    workers = args.workers or run_config["workers"]
    out_dir = Path(args.out)

    if args.manifest:
        with open(args.manifest, "rb") as f:
            try:
                manifest = msgspec.json.decode(f.read(), type=RunManifest)
            except msgspec.DecodeError as e:
                raise ConfigError(f"Invalid manifest {args.manifest}: {e}")
        job = _job_from_manifest(manifest)
        logger.info(f"Replaying {manifest.scenario_id} from {args.manifest}")
        artifacts = execute_run(job)
        report = write_run(artifacts, structs.replace(manifest, outputs=dict(RUN_OUTPUTS)), out_dir)
        log_rms_table(report, f"RMS for {manifest.scenario_id} (replay)")
        return report

    spec = _resolve_scenario(args, config)
    kinds = parse_estimators(args.estimators)
    needs_nn = any(k.needs_nn for k in kinds)
    model = None
    if args.model:
        model = load_model(args.model)
    elif needs_nn and args.oracle_bias is None:
        raise ConfigError(f"Estimators {[k.value for k in kinds if k.needs_nn]} need --model (or --oracle-bias)")

    burn_in = run_config["burn_in"] if args.burn_in is None else args.burn_in
    noise = SensorNoise.noiseless() if args.noise_free else ConfigLoader.get_noise_config(config)
    base = RunJob(
        spec=spec,
        kinds=kinds,
        pipeline=ConfigLoader.get_pipeline_config(config),
        noise=noise,
        estimator_configs=_estimator_configs(args, config, kinds),
        model=model if needs_nn else None,
        nn_bias=list(args.oracle_bias) if args.oracle_bias is not None and model is None and needs_nn else None,
    )
    model_path = args.model if base.model is not None else None

    if args.replicates <= 1:
        artifacts = execute_run(base)
        report = write_run(artifacts, build_manifest(base, model_path, burn_in), out_dir)
        log_rms_table(report, f"RMS for {spec.name}")
        return report

    jobs = []
    for r in range(args.replicates):
        replicate = structs.replace(spec, seeds=spec.seeds.offset(REPLICATE_SEED_STRIDE * r))
        jobs.append(RunJob(replicate, base.kinds, base.pipeline, base.noise, base.estimator_configs,
                           base.model, base.nn_bias))
    logger.info(f"Running {len(jobs)} replicates of {spec.name} with {workers} workers")
    all_artifacts = await gather_jobs(execute_run, jobs, workers)

    reports = []
    for r, (job, artifacts) in enumerate(zip(jobs, all_artifacts)):
        reports.append(write_run(artifacts, build_manifest(job, model_path, burn_in), out_dir / f"rep_{r:03d}"))

    median = {}
    for name in reports[0].estimators:
        median[name] = EstimatorRms(
            rms_v_nw=float(np.median([rep.estimators[name].rms_v_nw for rep in reports])),
            rms_v_ew=float(np.median([rep.estimators[name].rms_v_ew for rep in reports])),
        )
    summary = ReplicateSummary(
        scenario_id=spec.name,
        replicates=len(reports),
        median=with_percentages(median),
        runs=reports,
    )
    write_json(summary, out_dir / "summary.json")
    log_rms_table(RmsReport(estimators=summary.median, n_ticks=reports[0].n_ticks),
                  f"Median RMS over {len(reports)} replicates of {spec.name}")
    return summary


def cmd_rms(args, config: Dict[str, Any]) -> RmsReport:
    estimates = pd.read_csv(args.estimates)
    truth = pd.read_csv(args.truth)
    burn_in = ConfigLoader.get_run_config(config)["burn_in"] if args.burn_in is None else args.burn_in
    report = compute_rms(estimates, truth, burn_in)
    log_rms_table(report, f"RMS of {args.estimates}")
    if args.out:
        write_json(report, Path(args.out))
    else:
        sys.stdout.write(msgspec.json.format(msgspec.json.encode(report), indent=2).decode() + "\n")
    return report


def grid_frame(grid: Sequence[ScenarioSpec]) -> pd.DataFrame:
    return pd.DataFrame([
        {
            "id": i,
            "name": spec.name,
            "plan": spec.name.split("_")[0],
            "rotation_deg": spec.initial_heading_deg,
            "wind_speed": spec.wind[0].speed if spec.wind else 0.0,
            "wind_heading_deg": spec.wind[0].heading_deg if spec.wind else 0.0,
            "imu_seed": spec.seeds.imu,
            "gps_seed": spec.seeds.gps,
            "pitot_seed": spec.seeds.pitot,
        }
        for i, spec in enumerate(grid)
    ])


def cmd_grid_list(args, config: Dict[str, Any]) -> pd.DataFrame:
    grid = training_grid(args.rotations, args.speeds, args.headings, base_seed=args.base_seed)
    df = grid_frame(grid)
    logger.info(f"{len(df)} scenarios in the grid (published campaign: {PUBLISHED_GRID_COUNT})")
    if args.out:
        df.to_csv(args.out, index=False)
    else:
        df.to_csv(sys.stdout, index=False)
    return df


def _add_grid_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--rotations", type=float, nargs="+", default=list(GRID_ROTATIONS_DEG),
                        help="Plan rotations in degrees (default: 0 45 ... 315)")
    parser.add_argument("--speeds", type=float, nargs="+", default=list(GRID_SPEEDS),
                        help="Wind speeds in m/s (default: 0 1 2 3 4 5)")
    parser.add_argument("--headings", type=float, nargs="+", default=list(GRID_HEADINGS_DEG),
                        help="Wind headings in degrees (default: 0 22.5 ... 337.5)")
    parser.add_argument("--base-seed", type=int, default=1000, help="First sensor seed of the grid (default: 1000)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="airship-wind", description="Airship wind estimation toolkit")
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        help="Set the logging level (default: INFO)"
    )
    parser.add_argument("--config", default=None, help="YAML config file (default: config.yaml in project root)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dataset", help="Simulate the training grid and write the network dataset")
    p.add_argument("--out", required=True, help="Dataset CSV path")
    _add_grid_arguments(p)
    p.add_argument("--noise-free", action="store_true", help="Disable sensor noise")
    p.add_argument("--workers", type=int, default=None, help="Worker processes (default: run.workers)")

    p = sub.add_parser("train", help="Train the wind network with SCG")
    p.add_argument("--dataset", required=True, help="Dataset CSV path")
    p.add_argument("--out", required=True, help="Model file path")
    p.add_argument("--epochs", type=int, default=None, help="Training epochs (default: training.epochs)")
    p.add_argument("--seed", type=int, default=None, help="Split and initialization seed (default: training.seed)")
    p.add_argument("--raw", action="store_true", help="Train without input/target normalization")
    p.add_argument("--report", default=None, help="Report path (default: <model>.report.json)")

    p = sub.add_parser("run", help="Run estimators on a scenario")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--scenario", help="Scenario YAML file")
    source.add_argument("--packaged", help="Packaged scenario name (scenario1, scenario2)")
    source.add_argument("--manifest", help="Replay the run described by a manifest.json")
    p.add_argument("--out", required=True, help="Output directory")
    p.add_argument("--estimators", default="cho2011,ekf", help="Comma-separated list of cho2011,ekf,nn,hybrid")
    p.add_argument("--model", default=None, help="Model file for nn and hybrid")
    p.add_argument("--oracle-bias", type=float, nargs=3, default=None, metavar=("V_NW", "V_EW", "C_F"),
                   help="Use true wind plus this bias instead of a trained network")
    p.add_argument("--estimator-config", action="append", default=None,
                   help="Estimator config YAML; may be given once per variant")
    p.add_argument("--replicates", type=int, default=1, help="Seeded replicates of the scenario (default: 1)")
    p.add_argument("--burn-in", type=float, default=None, help="Burn-in window in seconds (default: run.burn_in)")
    p.add_argument("--noise-free", action="store_true", help="Disable sensor noise")
    p.add_argument("--workers", type=int, default=None, help="Worker processes (default: run.workers)")

    p = sub.add_parser("rms", help="RMS table from an estimate log and a truth log")
    p.add_argument("--estimates", required=True, help="estimates.csv")
    p.add_argument("--truth", required=True, help="truth.csv")
    p.add_argument("--burn-in", type=float, default=None, help="Burn-in window in seconds (default: run.burn_in)")
    p.add_argument("--out", default=None, help="Report JSON path (default: stdout)")

    p = sub.add_parser("grid-list", help="List the training grid")
    _add_grid_arguments(p)
    p.add_argument("--out", default=None, help="CSV path (default: stdout)")
    return parser


COMMANDS = {
    "dataset": cmd_dataset,
    "train": cmd_train,
    "run": cmd_run,
    "rms": cmd_rms,
    "grid-list": cmd_grid_list,
}


async def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, configure logging and dispatch to a subcommand. Returns the exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)

    numeric_level = getattr(logging, args.log_level.upper())
    logging.basicConfig(
        level=numeric_level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        force=True
    )

    try:
        config = ConfigLoader.load_config(args.config)
        result = COMMANDS[args.command](args, config)
        if asyncio.iscoroutine(result):
            await result
    except AirshipWindError as e:
        logger.error(f"{args.command} failed: {e}")
        return 2
    except OSError as e:
        logger.error(f"{args.command} failed: {e}")
        return 2
    except Exception as e:
        logger.exception(f"Unexpected error in {args.command}: {e}")
        return 1
    return 0


def cli():
    sys.exit(asyncio.run(main()))


if __name__ == "__main__":
    cli()
