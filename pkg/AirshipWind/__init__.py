from .models import *
from .estimators import EstimatorConfig, WindEkf, default_config
from .frames import EulerAttitude, Vec3
from .neural import MlpModel, forward, train_scg
from .pipeline import PipelineConfig, run_estimators
from .simkit import ScenarioSpec, SensorNoise, packaged_scenario
from .wind_model import MeasurementFrame, WindState

__all__ = [
    "EstimatorConfig",
    "WindEkf",
    "default_config",
    "EulerAttitude",
    "Vec3",
    "MlpModel",
    "forward",
    "train_scg",
    "PipelineConfig",
    "run_estimators",
    "ScenarioSpec",
    "SensorNoise",
    "packaged_scenario",
    "MeasurementFrame",
    "WindState",
    "EstimatorKind",
    "MeasurementVariant",
    "RmsReport",
    "TrainReport",
]
