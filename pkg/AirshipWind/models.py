"""Shared enums and serializable records for wind estimation runs."""
import msgspec
from typing import Any, Optional, Dict, List
from enum import Enum


class Frame(str, Enum):
    """Reference frame a vector is expressed in."""
    BODY = "body"
    NED = "ned"


class MeasurementVariant(str, Enum):
    """Measurement vector layout used by a filter."""
    CHO2011 = "cho2011"  # z = [z1]
    THREE_EQ = "ekf"  # z = [z1, z2, z3]
    HYBRID = "hybrid"  # z = [z1, z2, z3, chi_nn]

    @property
    def dim(self) -> int:
        """Number of measurement rows."""
        return {
            MeasurementVariant.CHO2011: 1,
            MeasurementVariant.THREE_EQ: 3,
            MeasurementVariant.HYBRID: 6,
        }[self]


class EstimatorKind(str, Enum):
    """Estimators that can be run side by side."""
    CHO2011 = "cho2011"
    EKF = "ekf"
    NN = "nn"
    HYBRID = "hybrid"

    @property
    def needs_nn(self) -> bool:
        return self in (EstimatorKind.NN, EstimatorKind.HYBRID)

    @property
    def variant(self) -> Optional[MeasurementVariant]:
        """Filter variant behind this estimator, None for the pure network."""
        return {
            EstimatorKind.CHO2011: MeasurementVariant.CHO2011,
            EstimatorKind.EKF: MeasurementVariant.THREE_EQ,
            EstimatorKind.NN: None,
            EstimatorKind.HYBRID: MeasurementVariant.HYBRID,
        }[self]


class SensorType(str, Enum):
    """Simulated onboard sensors."""
    IMU = "imu"  # attitude
    GPS = "gps"  # NED groundspeed
    PITOT = "pitot"  # V_pitot


class TurnDirection(str, Enum):
    """Direction taken when a segment changes heading."""
    SHORTEST = "shortest"
    LEFT = "left"
    RIGHT = "right"


class SplitMetrics(msgspec.Struct):
    """Fit quality on one dataset split."""
    n_rows: int
    mse: float
    r_value: Optional[float] = None  # None when predictions or targets have zero variance


class ErrorHistogram(msgspec.Struct):
    """Residual histogram pooled over all outputs."""
    edges: List[float]
    counts: List[int]


class TrainReport(msgspec.Struct):
    """Outcome of one network training run."""
    seed: int
    epochs: int
    train_mse: List[float]
    validation_mse: List[float]
    best_epoch: int
    split_sizes: Dict[str, int]
    metrics: Dict[str, SplitMetrics]
    histogram: Optional[ErrorHistogram] = None
    zero_target_variance: bool = False
    normalized: bool = True
    reference: Dict[str, Dict[str, float]] = {}  # published figures, annotation only


class EstimatorRms(msgspec.Struct):
    """RMS of the horizontal wind estimation error for one estimator."""
    rms_v_nw: float
    rms_v_ew: float
    pct_v_nw: Optional[float] = None  # relative to cho2011, percent
    pct_v_ew: Optional[float] = None


class RmsReport(msgspec.Struct):
    """Per-estimator RMS table, optionally with a burn-in window excluded."""
    estimators: Dict[str, EstimatorRms]
    n_ticks: int
    burn_in: float = 0.0
    after_burn_in: Dict[str, EstimatorRms] = {}
    reference: Dict[str, EstimatorRms] = {}  # published figures, annotation only


class RunManifest(msgspec.Struct):
    """Everything needed to replay a run bit-exactly."""
    scenario_id: str
    scenario: Dict[str, Any]
    seeds: Dict[str, int]
    estimators: List[str]
    estimator_configs: Dict[str, Dict[str, Any]]
    pipeline: Dict[str, Any]
    noise: Dict[str, float]
    outputs: Dict[str, str]
    model_path: Optional[str] = None
    model_sha256: Optional[str] = None
    nn_bias: Optional[List[float]] = None
    burn_in: float = 0.0
    format_version: int = 1


class ReplicateSummary(msgspec.Struct):
    """Median RMS over seeded replicates of one scenario."""
    scenario_id: str
    replicates: int
    median: Dict[str, EstimatorRms]
    runs: List[RmsReport]
