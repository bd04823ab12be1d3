"""Kinematic truth simulator and sensor synthesis.

The airship tracks its commanded heading ideally: the air-relative velocity is
horizontal, of constant magnitude (cruise speed) and points along the heading.
Ground velocity is that plus a piecewise-constant horizontal wind. Heading
changes are flown at a constant turn rate.

Wind heading is the direction the wind velocity points to:
V_Nw = |V_w| cos(psi_w), V_Ew = |V_w| sin(psi_w).
"""
import logging
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import msgspec
import numpy as np
import yaml
from msgspec import structs
from scipy.integrate import cumulative_trapezoid

from .airdata import (
    PitotModel,
    airdata_from_airspeed,
    airspeed,
    airspeed_from_airdata,
    pitot_pressure,
    pitot_speed,
    scale_factor,
)
from .exceptions import ConfigError
from .frames import EulerAttitude, Vec3, ned_to_body, wrap_angle
from .models import SensorType, TurnDirection
from .rate_scheduler import DEFAULT_RATES, sample_count

logger = logging.getLogger(__name__)

TRUTH_RATE = 100.0
DEFAULT_CRUISE_SPEED = 7.0
DEFAULT_ALTITUDE = 50.0
DEFAULT_TURN_RATE_DEG = 3.0
MAX_FLOW_ANGLE_DEG = 80.0

GRID_ROTATIONS_DEG = tuple(range(0, 360, 45))
GRID_SPEEDS = (0.0, 1.0, 2.0, 3.0, 4.0, 5.0)
GRID_HEADINGS_DEG = tuple(22.5 * i for i in range(16))
# run count quoted for the original training campaign
PUBLISHED_GRID_COUNT = 1281


class Segment(msgspec.Struct):
    """Turn to heading_deg at the scenario turn rate, then hold it until duration elapses."""
    heading_deg: float
    duration: float
    turn: TurnDirection = TurnDirection.SHORTEST

    def __post_init__(self):
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise ConfigError(f"Segment duration must be positive, got {self.duration}")
        if not math.isfinite(self.heading_deg):
            raise ConfigError(f"Segment heading must be finite, got {self.heading_deg}")


class WindStep(msgspec.Struct):
    start_time: float
    speed: float
    heading_deg: float

    def __post_init__(self):
        if not (math.isfinite(self.speed) and self.speed >= 0):
            raise ConfigError(f"Wind speed must be non-negative, got {self.speed}")
        if not (math.isfinite(self.start_time) and self.start_time >= 0):
            raise ConfigError(f"Wind step start time must be non-negative, got {self.start_time}")

    @property
    def velocity(self) -> Tuple[float, float]:
        h = math.radians(self.heading_deg)
        return self.speed * math.cos(h), self.speed * math.sin(h)


class SensorSeeds(msgspec.Struct):
    imu: int = 1
    gps: int = 2
    pitot: int = 3

    def offset(self, k: int) -> "SensorSeeds":
        return SensorSeeds(self.imu + k, self.gps + k, self.pitot + k)


class SensorNoise(msgspec.Struct):
    """Standard deviations of the additive Gaussian sensor noise."""
    sigma_roll_pitch: float = 5.2e-3  # rad
    sigma_yaw: float = 0.1  # rad
    sigma_ground_speed: float = 0.4  # m/s, per axis
    sigma_pitot: float = 6.04e-4

    def __post_init__(self):
        for name in ("sigma_roll_pitch", "sigma_yaw", "sigma_ground_speed", "sigma_pitot"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ConfigError(f"{name} must be non-negative, got {value}")

    @classmethod
    def noiseless(cls) -> "SensorNoise":
        return cls(0.0, 0.0, 0.0, 0.0)


class ScenarioSpec(msgspec.Struct):
    name: str
    segments: List[Segment]
    wind: List[WindStep] = msgspec.field(default_factory=list)
    initial_heading_deg: float = 0.0
    cruise_speed: float = DEFAULT_CRUISE_SPEED
    altitude: float = DEFAULT_ALTITUDE
    eta: float = 1.0
    turn_rate_deg: float = DEFAULT_TURN_RATE_DEG
    duration: Optional[float] = None  # defaults to the plan length
    seeds: SensorSeeds = msgspec.field(default_factory=SensorSeeds)
    alpha_amplitude_deg: float = 0.0
    beta_amplitude_deg: float = 0.0
    alpha_beta_period: float = 20.0

    def __post_init__(self):
        if not self.segments:
            raise ConfigError(f"Scenario {self.name} has no segments")
        if not self.cruise_speed > 0:
            raise ConfigError(f"Cruise speed must be positive, got {self.cruise_speed}")
        if not self.eta > 0:
            raise ConfigError(f"Pitot calibration factor must be positive, got {self.eta}")
        if not self.turn_rate_deg > 0:
            raise ConfigError(f"Turn rate must be positive, got {self.turn_rate_deg}")
        if self.duration is not None and not self.duration > 0:
            raise ConfigError(f"Scenario duration must be positive, got {self.duration}")
        for name in ("alpha_amplitude_deg", "beta_amplitude_deg"):
            if not 0 <= getattr(self, name) < MAX_FLOW_ANGLE_DEG:
                raise ConfigError(f"{name} must be in [0, {MAX_FLOW_ANGLE_DEG}), got {getattr(self, name)}")
        if not self.alpha_beta_period > 0:
            raise ConfigError(f"alpha_beta_period must be positive, got {self.alpha_beta_period}")
        starts = [w.start_time for w in self.wind]
        if starts != sorted(starts):
            raise ConfigError(f"Wind steps of {self.name} must be ordered by start time")
        # rejects turns that do not fit in their segment
        _heading_schedule(self)

    @property
    def plan_duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    @property
    def total_duration(self) -> float:
        return self.duration if self.duration is not None else self.plan_duration


class TruthSample(msgspec.Struct):
    t: float
    position: Optional[Tuple[float, float, float]]
    v_ned: Tuple[float, float, float]
    attitude: Tuple[float, float, float]
    v_nw: float
    v_ew: float
    c_f: float


@dataclass
class TruthTrajectory:
    """Truth sampled at the instants in t; rows align across fields."""
    t: np.ndarray
    v_ned: np.ndarray  # (N, 3)
    attitude: np.ndarray  # (N, 3) phi, theta, psi
    wind: np.ndarray  # (N, 2) V_Nw, V_Ew
    c_f: np.ndarray
    position: Optional[np.ndarray] = None  # (N, 3) NED, only on the simulation grid

    def __len__(self) -> int:
        return len(self.t)

    def sample(self, i: int) -> TruthSample:
        pos = None if self.position is None else tuple(float(v) for v in self.position[i])
        return TruthSample(
            t=float(self.t[i]),
            position=pos,
            v_ned=tuple(float(v) for v in self.v_ned[i]),
            attitude=tuple(float(v) for v in self.attitude[i]),
            v_nw=float(self.wind[i, 0]),
            v_ew=float(self.wind[i, 1]),
            c_f=float(self.c_f[i]),
        )


@dataclass
class SensorStreams:
    """Timestamped raw sensor samples of one run."""
    imu_t: np.ndarray
    imu: np.ndarray  # (N, 3) phi, theta, psi
    gps_t: np.ndarray
    gps: np.ndarray  # (N, 3) V_N, V_E, V_D
    pitot_t: np.ndarray
    pitot: np.ndarray  # (N,) V_pitot

    def as_mapping(self) -> Dict[SensorType, Tuple[np.ndarray, np.ndarray]]:
        return {
            SensorType.IMU: (self.imu_t, self.imu),
            SensorType.GPS: (self.gps_t, self.gps),
            SensorType.PITOT: (self.pitot_t, self.pitot),
        }


def sample_times(duration: float, rate: float) -> np.ndarray:
    """Instants i / rate in [0, duration)."""
    return np.arange(sample_count(duration, rate)) / rate


def _turn_angle(prev: float, target: float, turn: TurnDirection) -> float:
    """Signed heading change in radians, positive to the right."""
    if turn == TurnDirection.SHORTEST:
        return wrap_angle(target - prev)
    delta = (target - prev) % (2.0 * math.pi)
    if turn == TurnDirection.RIGHT:
        return delta
    return delta - 2.0 * math.pi if delta > 0 else 0.0


def _heading_schedule(spec: ScenarioSpec) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per segment: start time, continuous start heading, signed turn rate, turn time."""
    rate = math.radians(spec.turn_rate_deg)
    starts, psi0, rates, turn_times = [], [], [], []
    t = 0.0
    psi = math.radians(spec.initial_heading_deg)
    for seg in spec.segments:
        delta = _turn_angle(wrap_angle(psi), wrap_angle(math.radians(seg.heading_deg)), seg.turn)
        turn_time = abs(delta) / rate
        if turn_time > seg.duration + 1e-9:
            raise ConfigError(
                f"Scenario {spec.name}: turn to {seg.heading_deg} deg needs {turn_time:.2f} s "
                f"but the segment lasts {seg.duration} s"
            )
        starts.append(t)
        psi0.append(psi)
        rates.append(math.copysign(rate, delta) if delta else 0.0)
        turn_times.append(turn_time)
        psi += delta
        t += seg.duration
    return np.array(starts), np.array(psi0), np.array(rates), np.array(turn_times)


def heading_at(spec: ScenarioSpec, times) -> np.ndarray:
    """Continuous (unwrapped) commanded heading in radians."""
    t = np.atleast_1d(np.asarray(times, dtype=float))
    starts, psi0, rates, turn_times = _heading_schedule(spec)
    idx = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(starts) - 1)
    dt = t - starts[idx]
    return psi0[idx] + rates[idx] * np.minimum(dt, turn_times[idx])


def wind_at(spec: ScenarioSpec, t):
    """Horizontal wind (V_Nw, V_Ew) at time t, or an (N, 2) array for an array of times.

    Zero before the first wind step.
    """
    scalar = np.ndim(t) == 0
    times = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros((len(times), 2))
    for step in spec.wind:
        mask = times >= step.start_time
        out[mask] = step.velocity
    if scalar:
        return float(out[0, 0]), float(out[0, 1])
    return out


def flow_angles_at(spec: ScenarioSpec, times) -> Tuple[np.ndarray, np.ndarray]:
    """Synthetic angle of attack and sideslip; zero unless the stress hook is set."""
    t = np.atleast_1d(np.asarray(times, dtype=float))
    phase = 2.0 * math.pi * t / spec.alpha_beta_period
    alpha = math.radians(spec.alpha_amplitude_deg) * np.sin(phase)
    beta = math.radians(spec.beta_amplitude_deg) * np.cos(phase)
    return alpha, beta


def truth_at(spec: ScenarioSpec, times) -> TruthTrajectory:
    """Analytic truth at arbitrary instants (no positions)."""
    t = np.atleast_1d(np.asarray(times, dtype=float))
    psi = heading_at(spec, t)
    wind = wind_at(spec, t)
    alpha, beta = flow_angles_at(spec, t)

    v_ned = np.zeros((len(t), 3))
    v_ned[:, 0] = spec.cruise_speed * np.cos(psi) + wind[:, 0]
    v_ned[:, 1] = spec.cruise_speed * np.sin(psi) + wind[:, 1]

    attitude = np.zeros((len(t), 3))
    attitude[:, 2] = wrap_angle(psi)

    return TruthTrajectory(t=t, v_ned=v_ned, attitude=attitude, wind=wind, c_f=scale_factor(spec.eta, alpha, beta))


def pitot_truth(spec: ScenarioSpec, times) -> np.ndarray:
    """Noise-free Pitot speed from the body-frame airspeed at each instant."""
    truth = truth_at(spec, times)
    alpha, beta = flow_angles_at(spec, truth.t)
    model = PitotModel(spec.eta)
    out = np.empty(len(truth))
    for i in range(len(truth)):
        att = EulerAttitude.from_array(truth.attitude[i])
        v_g = Vec3.from_array(ned_to_body(att, truth.v_ned[i]))
        v_w = Vec3.from_array(ned_to_body(att, [truth.wind[i, 0], truth.wind[i, 1], 0.0]))
        v_t = airdata_from_airspeed(airspeed(v_g, v_w)).v_t
        # the Pitot tube reads the body-x component of the flow at the synthetic angles
        u_a = airspeed_from_airdata(v_t, float(alpha[i]), float(beta[i])).x
        out[i] = pitot_speed(pitot_pressure(u_a, model))
    return out


def simulate_truth(spec: ScenarioSpec, rate: float = TRUTH_RATE) -> TruthTrajectory:
    """Truth on the simulation grid, positions integrated from V_NED."""
    truth = truth_at(spec, sample_times(spec.total_duration, rate))
    position = cumulative_trapezoid(truth.v_ned, truth.t, axis=0, initial=0.0)
    position[:, 2] -= spec.altitude
    truth.position = position
    logger.debug(f"Simulated {len(truth)} truth samples for {spec.name}")
    return truth


def synthesize_sensors(
    spec: ScenarioSpec,
    noise: Optional[SensorNoise] = None,
    seeds: Optional[SensorSeeds] = None,
    rates: Optional[Dict[SensorType, float]] = None,
) -> SensorStreams:
    """Noisy IMU, GPS and Pitot streams, each drawn from its own seeded generator.

    Every sensor samples the analytic truth at its own instants.
    """
    noise = noise or SensorNoise()
    seeds = seeds or spec.seeds
    rates = {**DEFAULT_RATES, **(rates or {})}
    duration = spec.total_duration

    imu_t = sample_times(duration, rates[SensorType.IMU])
    gps_t = sample_times(duration, rates[SensorType.GPS])
    pitot_t = sample_times(duration, rates[SensorType.PITOT])

    imu_rng = np.random.default_rng(seeds.imu)
    gps_rng = np.random.default_rng(seeds.gps)
    pitot_rng = np.random.default_rng(seeds.pitot)

    imu = truth_at(spec, imu_t).attitude
    sigma_att = np.array([noise.sigma_roll_pitch, noise.sigma_roll_pitch, noise.sigma_yaw])
    imu = imu + imu_rng.standard_normal(imu.shape) * sigma_att
    imu[:, 0] = wrap_angle(imu[:, 0])
    imu[:, 2] = wrap_angle(imu[:, 2])

    gps = truth_at(spec, gps_t).v_ned
    gps = gps + gps_rng.standard_normal(gps.shape) * noise.sigma_ground_speed

    pitot = pitot_truth(spec, pitot_t)
    pitot = np.maximum(pitot + pitot_rng.standard_normal(pitot.shape) * noise.sigma_pitot, 0.0)

    return SensorStreams(imu_t=imu_t, imu=imu, gps_t=gps_t, gps=gps, pitot_t=pitot_t, pitot=pitot)


def _square(name: str, leg_time: float, turn_time: float = 30.0) -> ScenarioSpec:
    hold = leg_time + turn_time
    return ScenarioSpec(
        name=name,
        segments=[
            Segment(0.0, leg_time),
            Segment(90.0, hold, TurnDirection.RIGHT),
            Segment(180.0, hold, TurnDirection.RIGHT),
            Segment(270.0, hold, TurnDirection.RIGHT),
            Segment(0.0, turn_time, TurnDirection.RIGHT),
        ],
    )


def base_plans() -> Tuple[ScenarioSpec, ScenarioSpec]:
    """The two closed training circuits: racetrack and square, 280 s each."""
    racetrack = ScenarioSpec(
        name="racetrack",
        segments=[
            Segment(0.0, 80.0),
            Segment(180.0, 140.0, TurnDirection.RIGHT),
            Segment(0.0, 60.0, TurnDirection.RIGHT),
        ],
    )
    return racetrack, _square("square", 40.0)


def rotate_plan(spec: ScenarioSpec, degrees: float) -> ScenarioSpec:
    segments = [structs.replace(s, heading_deg=(s.heading_deg + degrees) % 360.0) for s in spec.segments]
    return structs.replace(
        spec,
        segments=segments,
        initial_heading_deg=(spec.initial_heading_deg + degrees) % 360.0,
    )


def training_grid(
    rotations_deg=GRID_ROTATIONS_DEG,
    speeds=GRID_SPEEDS,
    headings_deg=GRID_HEADINGS_DEG,
    base_seed: int = 1000,
) -> List[ScenarioSpec]:
    """Base plans x rotations x constant winds; zero-wind cases appear once per rotation."""
    grid = []
    for plan in base_plans():
        for rot in rotations_deg:
            rotated = rotate_plan(plan, rot)
            for speed in speeds:
                for heading in headings_deg:
                    if speed == 0 and heading != headings_deg[0]:
                        continue
                    k = len(grid)
                    grid.append(structs.replace(
                        rotated,
                        name=f"{plan.name}_r{rot:g}_v{speed:g}_h{heading:g}",
                        wind=[WindStep(0.0, float(speed), float(heading))],
                        seeds=SensorSeeds(base_seed + 3 * k, base_seed + 3 * k + 1, base_seed + 3 * k + 2),
                    ))
    logger.info(f"Training grid has {len(grid)} scenarios")
    full = (
        tuple(rotations_deg) == GRID_ROTATIONS_DEG
        and tuple(speeds) == GRID_SPEEDS
        and tuple(headings_deg) == GRID_HEADINGS_DEG
    )
    if full and len(grid) != PUBLISHED_GRID_COUNT:
        logger.warning(
            f"Deduplicated grid count {len(grid)} differs from the published count {PUBLISHED_GRID_COUNT}"
        )
    return grid


def load_scenario(path: Union[str, Path]) -> ScenarioSpec:
    try:
        with open(path, "r") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"Scenario file {path} is not valid YAML: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"Scenario file {path} must contain a mapping")
    data.setdefault("name", Path(path).stem)
    try:
        return msgspec.convert(data, ScenarioSpec)
    except msgspec.ValidationError as e:
        raise ConfigError(f"Invalid scenario {path}: {e}")


def dump_scenario(spec: ScenarioSpec, path: Union[str, Path]):
    with open(path, "w") as f:
        yaml.safe_dump(msgspec.to_builtins(spec), f, sort_keys=False)
    logger.info(f"Wrote scenario {spec.name} to {path}")


def packaged_scenario(name: str) -> ScenarioSpec:
    """Scenario shipped in the package, e.g. scenario1 or scenario2."""
    resource = resources.files("AirshipWind").joinpath("scenarios", f"{name}.yaml")
    if not resource.is_file():
        raise ConfigError(f"No packaged scenario named {name}")
    with resources.as_file(resource) as path:
        return load_scenario(path)
