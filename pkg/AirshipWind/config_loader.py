"""Configuration loader for wind estimation runs."""
import os
import yaml
import logging
from typing import Dict, Any, Optional
from pathlib import Path

import msgspec
from dotenv import load_dotenv

from .estimators import EstimatorConfig, default_config
from .exceptions import ConfigError
from .models import MeasurementVariant
from .neural import TrainingConfig
from .pipeline import PipelineConfig
from .simkit import SensorNoise
from .wind_model import CF_FLOOR, WindState

logger = logging.getLogger(__name__)

_TRUE_STRINGS = {"1", "true", "yes", "on"}
_FALSE_STRINGS = {"0", "false", "no", "off"}


def _parse_bool(name: str, value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in _TRUE_STRINGS:
        return True
    if lowered in _FALSE_STRINGS:
        return False
    raise ConfigError(f"{name} must be a boolean, got {value!r}")


def _parse_number(name: str, value: str, kind=float):
    try:
        return kind(value)
    except ValueError:
        raise ConfigError(f"{name} must be a {kind.__name__}, got {value!r}")


class ConfigLoader:
    """Load and manage configuration for AirshipWind."""

    @staticmethod
    def load_config(config_path: Optional[str] = None) -> Dict[str, Any]:
        """Load configuration from YAML file and environment variables.

        Args:
            config_path: Path to YAML config file. Defaults to config.yaml in project root.

        Returns:
            Merged configuration dictionary
        """
        config: Dict[str, Any] = {}
        load_dotenv()

        explicit = config_path is not None
        if config_path is None:
            project_root = Path(__file__).parent.parent
            config_path = project_root / "config.yaml"

        if Path(config_path).exists():
            try:
                with open(config_path, 'r') as f:
                    yaml_config = yaml.safe_load(f)
            except yaml.YAMLError as e:
                raise ConfigError(f"Failed to parse config {config_path}: {e}")
            if yaml_config:
                if not isinstance(yaml_config, dict):
                    raise ConfigError(f"Config {config_path} must contain a mapping")
                config = yaml_config
                logger.info(f"Loaded configuration from {config_path}")
        elif explicit:
            raise ConfigError(f"Config file not found: {config_path}")
        else:
            logger.debug(f"No config file at {config_path}, using defaults")

        return ConfigLoader._merge_env_config(config)

    @staticmethod
    def _merge_env_config(config: Dict[str, Any]) -> Dict[str, Any]:
        """Merge environment variables into configuration.

        Environment variables override YAML config values.
        """
        for section in ('scenario', 'pipeline', 'training', 'run'):
            if not isinstance(config.get(section), dict):
                config[section] = {}

        if os.getenv('AIRSHIP_WIND_ETA'):
            config['scenario']['eta'] = _parse_number('AIRSHIP_WIND_ETA', os.getenv('AIRSHIP_WIND_ETA'))
        if os.getenv('AIRSHIP_WIND_TAU'):
            config['pipeline']['tau'] = _parse_number('AIRSHIP_WIND_TAU', os.getenv('AIRSHIP_WIND_TAU'))
        if os.getenv('AIRSHIP_WIND_FILTER_EKF_INPUTS'):
            config['pipeline']['filter_ekf_inputs'] = _parse_bool(
                'AIRSHIP_WIND_FILTER_EKF_INPUTS', os.getenv('AIRSHIP_WIND_FILTER_EKF_INPUTS')
            )
        if os.getenv('AIRSHIP_WIND_EPOCHS'):
            config['training']['epochs'] = _parse_number('AIRSHIP_WIND_EPOCHS', os.getenv('AIRSHIP_WIND_EPOCHS'), int)
        if os.getenv('AIRSHIP_WIND_SEED'):
            config['training']['seed'] = _parse_number('AIRSHIP_WIND_SEED', os.getenv('AIRSHIP_WIND_SEED'), int)
        if os.getenv('AIRSHIP_WIND_WORKERS'):
            config['run']['workers'] = _parse_number('AIRSHIP_WIND_WORKERS', os.getenv('AIRSHIP_WIND_WORKERS'), int)

        return config

    @staticmethod
    def _convert(section: str, data: Any, type_):
        try:
            return msgspec.convert(data or {}, type_)
        except msgspec.ValidationError as e:
            raise ConfigError(f"Invalid '{section}' configuration: {e}")

    @staticmethod
    def get_pipeline_config(config: Dict[str, Any]) -> PipelineConfig:
        return ConfigLoader._convert('pipeline', config.get('pipeline'), PipelineConfig)

    @staticmethod
    def get_noise_config(config: Dict[str, Any]) -> SensorNoise:
        return ConfigLoader._convert('noise', config.get('noise'), SensorNoise)

    @staticmethod
    def get_training_config(config: Dict[str, Any]) -> TrainingConfig:
        return ConfigLoader._convert('training', config.get('training'), TrainingConfig)

    @staticmethod
    def get_run_config(config: Dict[str, Any]) -> Dict[str, Any]:
        """Worker count and burn-in window for scenario runs."""
        run = config.get('run', {})
        workers = int(run.get('workers', 1))
        burn_in = float(run.get('burn_in', 20.0))
        if workers < 1:
            raise ConfigError(f"run.workers must be at least 1, got {workers}")
        if burn_in < 0:
            raise ConfigError(f"run.burn_in must be non-negative, got {burn_in}")
        return {'workers': workers, 'burn_in': burn_in}

    @staticmethod
    def get_scenario_overrides(config: Dict[str, Any]) -> Dict[str, Any]:
        """Fields applied on top of every loaded scenario; empty unless set in the config or environment."""
        return {k: v for k, v in (config.get('scenario') or {}).items() if v is not None}

    @staticmethod
    def get_estimator_config(config: Dict[str, Any], variant: MeasurementVariant) -> EstimatorConfig:
        """Filter tuning for a variant; entries missing from the config keep the tuned defaults."""
        variant = MeasurementVariant(variant)
        # sections are named after the variant: cho2011, ekf, hybrid
        data = (config.get('estimators') or {}).get(variant.value)
        if not data:
            return default_config(variant)
        return estimator_config_from_dict(data, variant)

    @staticmethod
    def load_estimator_config(path: str) -> EstimatorConfig:
        """Standalone estimator config file."""
        try:
            with open(path, 'r') as f:
                data = yaml.safe_load(f)
        except FileNotFoundError:
            raise ConfigError(f"Estimator config not found: {path}")
        except yaml.YAMLError as e:
            raise ConfigError(f"Failed to parse estimator config {path}: {e}")
        if not isinstance(data, dict) or 'variant' not in data:
            raise ConfigError(f"Estimator config {path} must be a mapping with a 'variant' key")
        config = estimator_config_from_dict(data)
        logger.info(f"Loaded {config.variant.value} estimator config from {path}")
        return config


def estimator_config_from_dict(data: Dict[str, Any], variant: Optional[MeasurementVariant] = None) -> EstimatorConfig:
    """Build an EstimatorConfig from diagonal or full-matrix keys."""
    try:
        variant = MeasurementVariant(data.get('variant', variant))
    except ValueError:
        raise ConfigError(f"Unknown estimator variant {data.get('variant')!r}")
    base = default_config(variant)

    def matrix(name: str, current):
        if name in data:
            return data[name]
        diag = data.get(f"{name}_diag")
        if diag is not None:
            if not isinstance(diag, (list, tuple)):
                raise ConfigError(f"{name}_diag must be a list")
            return [[float(diag[i]) if i == j else 0.0 for j in range(len(diag))] for i in range(len(diag))]
        return current

    x0 = base.x0
    if 'x0' in data:
        values = data['x0']
        if not isinstance(values, (list, tuple)) or len(values) != 3:
            raise ConfigError(f"x0 needs 3 values, got {values!r}")
        x0 = WindState(*(float(v) for v in values))

    try:
        return EstimatorConfig(
            variant=variant,
            q=matrix('q', base.q),
            r=matrix('r', base.r),
            p0=matrix('p0', base.p0),
            x0=x0,
            cf_floor=float(data.get('cf_floor', CF_FLOOR)),
        )
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"Invalid {variant.value} estimator config: {e}")
