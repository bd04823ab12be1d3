"""Shared fixtures for the AirshipWind test suite."""
import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root and this directory
sys.path.insert(0, str(Path(__file__).parent.parent))
sys.path.insert(0, str(Path(__file__).parent))

from AirshipWind.models import TurnDirection
from AirshipWind.simkit import ScenarioSpec, Segment, SensorSeeds, WindStep


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def short_scenario():
    """40 s run: one leg north, a right turn east, wind step at 20 s."""
    return ScenarioSpec(
        name="short",
        segments=[
            Segment(0.0, 10.0),
            Segment(90.0, 40.0, TurnDirection.RIGHT),
        ],
        wind=[WindStep(0.0, 2.0, 90.0), WindStep(20.0, 3.0, 180.0)],
        duration=40.0,
        seeds=SensorSeeds(5, 6, 7),
    )
