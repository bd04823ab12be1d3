"""Multi-rate sample-and-hold of sensor streams onto the estimator clock."""
import logging
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np

from .models import SensorType

logger = logging.getLogger(__name__)

ESTIMATOR_RATE = 16.0  # Hz

DEFAULT_RATES = {
    SensorType.IMU: 100.0,  # attitude
    SensorType.GPS: 4.0,  # V_NED
    SensorType.PITOT: 18.0,
}

# sensor -> (timestamps, values), timestamps monotone
StreamMap = Mapping[SensorType, Tuple[np.ndarray, np.ndarray]]


def sample_count(duration: float, rate: float) -> int:
    """Number of instants i / rate inside [0, duration)."""
    return int(np.ceil(duration * rate - 1e-9))


class RateScheduler:
    """Zero-order hold of the latest sample per sensor at each estimator tick.

    Tick k happens at exactly k / estimator_rate. A sample is visible to a tick
    when its timestamp is at or before the tick time.
    """

    def __init__(self, rates: Optional[Dict[SensorType, float]] = None, estimator_rate: float = ESTIMATOR_RATE):
        if not estimator_rate > 0:
            raise ValueError(f"Estimator rate must be positive, got {estimator_rate}")
        self.rates: Dict[SensorType, float] = dict(DEFAULT_RATES)
        if rates:
            self.rates.update(rates)
        for sensor, rate in self.rates.items():
            if not rate > 0:
                raise ValueError(f"{sensor.value} rate must be positive, got {rate}")
        self.estimator_rate = estimator_rate
        self.tick_period = 1.0 / estimator_rate

        # sensor -> (timestamp, value)
        self.latest: Dict[SensorType, Tuple[float, Any]] = {}
        self.cursors: Dict[SensorType, int] = {s: 0 for s in self.rates}

    def tick_time(self, k: int) -> float:
        return k / self.estimator_rate

    def n_ticks(self, duration: float) -> int:
        """Ticks in [0, duration)."""
        return sample_count(duration, self.estimator_rate)

    def advance(self, t: float, streams: StreamMap) -> Dict[SensorType, int]:
        """Consume every stream sample with timestamp <= t; returns counts consumed per sensor."""
        consumed = {}
        for sensor, (times, values) in streams.items():
            start = self.cursors.get(sensor, 0)
            stop = int(np.searchsorted(times, t, side="right"))
            consumed[sensor] = max(0, stop - start)
            if stop > start:
                self.latest[sensor] = (float(times[stop - 1]), values[stop - 1])
                self.cursors[sensor] = stop
        return consumed

    @property
    def ready(self) -> bool:
        """True once every configured sensor has reported at least once."""
        return all(sensor in self.latest for sensor in self.rates)

    def latest_sample(self, sensor: SensorType) -> Optional[Tuple[float, Any]]:
        return self.latest.get(sensor)

    def reset(self):
        self.latest.clear()
        self.cursors = {s: 0 for s in self.rates}
