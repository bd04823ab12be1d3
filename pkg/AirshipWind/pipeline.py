"""Signal path around the estimators.

Sensor streams are held onto the 16 Hz estimator clock. The network branch sees
low-pass filtered frames, the EKF branch sees the raw held samples unless
filter_ekf_inputs is set.
"""
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Protocol, Sequence, Union

import msgspec
import numpy as np
import pandas as pd

from .estimators import EstimatorConfig, WindEkf, default_config
from .exceptions import ConfigError
from .frames import EulerAttitude, unwrap_angle
from .models import EstimatorKind, MeasurementVariant, SensorType
from .neural import MlpModel, forward, remap_inputs
from .rate_scheduler import DEFAULT_RATES, ESTIMATOR_RATE, RateScheduler, StreamMap, sample_count
from .simkit import ScenarioSpec, SensorStreams, truth_at
from .wind_model import MeasurementFrame, WindState

logger = logging.getLogger(__name__)

DEFAULT_TAU = 1.5  # s

# estimator columns follow this order regardless of selection order
ESTIMATOR_ORDER = (EstimatorKind.CHO2011, EstimatorKind.EKF, EstimatorKind.NN, EstimatorKind.HYBRID)


class PipelineConfig(msgspec.Struct):
    tau: float = DEFAULT_TAU
    estimator_rate: float = ESTIMATOR_RATE
    imu_rate: float = DEFAULT_RATES[SensorType.IMU]
    gps_rate: float = DEFAULT_RATES[SensorType.GPS]
    pitot_rate: float = DEFAULT_RATES[SensorType.PITOT]
    filter_ekf_inputs: bool = False

    def __post_init__(self):
        for name in ("tau", "estimator_rate", "imu_rate", "gps_rate", "pitot_rate"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be positive, got {value}")

    @property
    def tick_period(self) -> float:
        return 1.0 / self.estimator_rate

    def sensor_rates(self) -> Dict[SensorType, float]:
        return {
            SensorType.IMU: self.imu_rate,
            SensorType.GPS: self.gps_rate,
            SensorType.PITOT: self.pitot_rate,
        }


@dataclass
class LowPass:
    """First-order low-pass 1/(tau s + 1), zero-order-hold discretized."""
    tau: float = DEFAULT_TAU
    ts: float = 1.0 / ESTIMATOR_RATE
    y: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigError(f"Low-pass time constant must be positive, got {self.tau}")
        if not self.ts > 0:
            raise ConfigError(f"Low-pass step must be positive, got {self.ts}")

    @property
    def a(self) -> float:
        return math.exp(-self.ts / self.tau)

    def reset(self):
        self.y = None


def lowpass_step(f: LowPass, z: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Advance the filter by one step; the first sample initializes the output."""
    z = np.asarray(z, dtype=float)
    if f.y is None:
        f.y = z.copy()
    else:
        a = f.a
        f.y = a * f.y + (1.0 - a) * z
    return float(f.y) if f.y.ndim == 0 else f.y.copy()


@dataclass
class TickFrames:
    t: float
    raw: MeasurementFrame
    filtered: MeasurementFrame


class FramePipeline:
    """Scheduler plus input filter of one run."""

    def __init__(self, config: Optional[PipelineConfig] = None):
        self.config = config or PipelineConfig()
        self.scheduler = RateScheduler(self.config.sensor_rates(), self.config.estimator_rate)
        # channels: v_pitot, v_n, v_e, v_d, phi, theta, psi (angles unwrapped)
        self.lowpass = LowPass(tau=self.config.tau, ts=self.config.tick_period)
        self._phi: Optional[float] = None
        self._psi: Optional[float] = None
        self.n_withheld = 0

    def _continuous(self, prev: Optional[float], wrapped: float) -> float:
        return wrapped if prev is None else unwrap_angle(prev, wrapped)

    def tick(self, t: float, streams: StreamMap) -> Optional[TickFrames]:
        self.scheduler.advance(t, streams)
        if not self.scheduler.ready:
            self.n_withheld += 1
            logger.debug(f"Tick at t={t:.4f} withheld: waiting for {self._missing()}")
            return None

        _, imu = self.scheduler.latest_sample(SensorType.IMU)
        _, gps = self.scheduler.latest_sample(SensorType.GPS)
        _, v_pitot = self.scheduler.latest_sample(SensorType.PITOT)
        phi, theta, psi = (float(v) for v in imu)
        v_n, v_e, v_d = (float(v) for v in gps)
        v_pitot = float(v_pitot)

        raw = MeasurementFrame(v_pitot, v_n, v_e, v_d, EulerAttitude(phi, theta, psi), t)

        self._phi = self._continuous(self._phi, phi)
        self._psi = self._continuous(self._psi, psi)
        y = lowpass_step(self.lowpass, [v_pitot, v_n, v_e, v_d, self._phi, theta, self._psi])
        # EulerAttitude wraps phi and psi back into (-pi, pi]
        filtered = MeasurementFrame(y[0], y[1], y[2], y[3], EulerAttitude(y[4], y[5], y[6]), t)
        return TickFrames(t=t, raw=raw, filtered=filtered)

    def _missing(self) -> List[str]:
        return [s.value for s in self.scheduler.rates if self.scheduler.latest_sample(s) is None]


def schedule_tick(pipeline: FramePipeline, t: float, streams: StreamMap) -> Optional[TickFrames]:
    """Frames for the estimator tick at time t, or None while a sensor has not reported yet."""
    return pipeline.tick(t, streams)


def nn_estimate(model: MlpModel, frame: MeasurementFrame) -> WindState:
    return WindState.from_array(forward(model, remap_inputs(frame)))


def hybrid_step(ekf: WindEkf, frame: MeasurementFrame, nn_out: WindState) -> WindState:
    """One predict and one hybrid update with the network output as extra measurement rows."""
    if ekf.config.variant != MeasurementVariant.HYBRID:
        raise ConfigError(f"hybrid_step needs a hybrid filter, got variant {ekf.config.variant.value}")
    return ekf.step(frame, nn_out)


class NnSource(Protocol):
    def estimate(self, tick: TickFrames) -> WindState:
        ...


class MlpSource:
    """Trained network on the filtered frame."""

    def __init__(self, model: MlpModel):
        self.model = model

    def estimate(self, tick: TickFrames) -> WindState:
        return nn_estimate(self.model, tick.filtered)


class OracleSource:
    """True wind and scale factor of a scenario plus a constant bias."""

    def __init__(self, spec: ScenarioSpec, bias: Sequence[float] = (0.0, 0.0, 0.0)):
        self.spec = spec
        self.bias = np.asarray(bias, dtype=float)
        if self.bias.shape != (3,):
            raise ConfigError(f"Oracle bias needs 3 values, got {self.bias.shape}")

    def estimate(self, tick: TickFrames) -> WindState:
        truth = truth_at(self.spec, [tick.t]).sample(0)
        return WindState(truth.v_nw + self.bias[0], truth.v_ew + self.bias[1], truth.c_f + self.bias[2])


@dataclass
class RunResult:
    estimates: pd.DataFrame
    timing: pd.DataFrame
    skipped_updates: Dict[str, int] = field(default_factory=dict)
    withheld_ticks: int = 0


def tick_times(duration: float, estimator_rate: float = ESTIMATOR_RATE) -> np.ndarray:
    return np.arange(sample_count(duration, estimator_rate)) / estimator_rate


def collect_nn_samples(
    spec: ScenarioSpec,
    streams: SensorStreams,
    config: Optional[PipelineConfig] = None,
):
    """Network inputs from filtered tick frames and the matching true targets."""
    config = config or PipelineConfig()
    pipeline = FramePipeline(config)
    mapping = streams.as_mapping()
    times, inputs = [], []
    for t in tick_times(spec.total_duration, config.estimator_rate):
        tick = pipeline.tick(float(t), mapping)
        if tick is None:
            continue
        times.append(t)
        inputs.append(remap_inputs(tick.filtered))
    truth = truth_at(spec, np.array(times))
    targets = np.column_stack([truth.wind, truth.c_f])
    return np.array(inputs).reshape(-1, 8), targets


def run_estimators(
    spec: ScenarioSpec,
    streams: SensorStreams,
    kinds: Sequence[EstimatorKind],
    config: Optional[PipelineConfig] = None,
    estimator_configs: Optional[Dict[EstimatorKind, EstimatorConfig]] = None,
    nn_source: Optional[NnSource] = None,
) -> RunResult:
    """Step every selected estimator on identical tick frames over the whole run."""
    config = config or PipelineConfig()
    selected = {EstimatorKind(k) for k in kinds}
    kinds = [k for k in ESTIMATOR_ORDER if k in selected]
    if not kinds:
        raise ConfigError("No estimators selected")
    if any(k.needs_nn for k in kinds) and nn_source is None:
        raise ConfigError(f"Estimators {[k.value for k in kinds if k.needs_nn]} need a network model")

    configs = dict(estimator_configs or {})
    filters: Dict[EstimatorKind, WindEkf] = {}
    for kind in kinds:
        if kind.variant is None:
            continue
        cfg = configs.get(kind) or default_config(kind.variant)
        if cfg.variant != kind.variant:
            raise ConfigError(f"{kind.value} needs a {kind.variant.value} configuration, got {cfg.variant.value}")
        filters[kind] = WindEkf(cfg, name=kind.value)

    pipeline = FramePipeline(config)
    mapping = streams.as_mapping()
    need_nn = any(k.needs_nn for k in kinds)

    rows = []
    timing_t: List[float] = []
    timing_name: List[str] = []
    timing_ns: List[int] = []

    logger.info(f"Running {[k.value for k in kinds]} on {spec.name} ({spec.total_duration:g} s)")
    for t in tick_times(spec.total_duration, config.estimator_rate):
        tick = pipeline.tick(float(t), mapping)
        if tick is None:
            continue
        ekf_frame = tick.filtered if config.filter_ekf_inputs else tick.raw
        row = {"t": tick.t}

        nn_out, nn_ns = None, 0
        if need_nn:
            start = time.perf_counter_ns()
            nn_out = nn_source.estimate(tick)
            nn_ns = time.perf_counter_ns() - start

        for kind in kinds:
            start = time.perf_counter_ns()
            if kind == EstimatorKind.NN:
                state = nn_out
                elapsed = nn_ns
            elif kind == EstimatorKind.HYBRID:
                state = hybrid_step(filters[kind], ekf_frame, nn_out)
                elapsed = time.perf_counter_ns() - start + nn_ns
            else:
                state = filters[kind].step(ekf_frame)
                elapsed = time.perf_counter_ns() - start
            row[f"{kind.value}_v_nw"] = state.v_nw
            row[f"{kind.value}_v_ew"] = state.v_ew
            row[f"{kind.value}_c_f"] = state.c_f
            timing_t.append(tick.t)
            timing_name.append(kind.value)
            timing_ns.append(elapsed)
        rows.append(row)

    columns = ["t"] + [f"{k.value}_{c}" for k in kinds for c in ("v_nw", "v_ew", "c_f")]
    estimates = pd.DataFrame(rows, columns=columns)
    truth = truth_at(spec, estimates["t"].to_numpy())
    estimates.insert(1, "true_v_nw", truth.wind[:, 0])
    estimates.insert(2, "true_v_ew", truth.wind[:, 1])
    estimates.insert(3, "true_c_f", truth.c_f)

    skipped = {f.name: f.n_skipped for f in filters.values()}
    for name, n in skipped.items():
        if n:
            logger.warning(f"{name}: {n} measurement updates skipped on {spec.name}")
    logger.info(f"Finished {spec.name}: {len(estimates)} ticks, {pipeline.n_withheld} withheld")
    timing = pd.DataFrame({"t": timing_t, "estimator": timing_name, "step_ns": timing_ns})
    return RunResult(estimates=estimates, timing=timing, skipped_updates=skipped, withheld_ticks=pipeline.n_withheld)
