"""Tests for the wind measurement model and its Jacobian."""
import math

import numpy as np
import pytest

from AirshipWind.exceptions import ScaleFactorError
from AirshipWind.models import MeasurementVariant
from AirshipWind.wind_model import (
    WindState,
    jacobian,
    measurement_vector,
    observe,
    process_model,
)
from helpers import make_frame

ALL_VARIANTS = list(MeasurementVariant)


def test_zero_wind_unit_scale():
    h = observe(WindState(0.0, 0.0, 1.0), make_frame(), MeasurementVariant.THREE_EQ)
    np.testing.assert_allclose(h, [49.0, 7.0, 0.0])


def test_crosswind_east():
    frame = make_frame(v_pitot=7.0, v_n=0.0, v_e=9.0, psi=math.pi / 2)
    h = observe(WindState(0.0, 2.0, 1.0), frame, MeasurementVariant.THREE_EQ)
    np.testing.assert_allclose(h, [49.0, 0.0, 9.0], atol=1e-12)


def test_cho2011_observes_pitot_only():
    h = observe(WindState(0.0, 0.0, 1.0), make_frame(), MeasurementVariant.CHO2011)
    assert h.shape == (1,)
    assert h[0] == pytest.approx(49.0)


def test_hybrid_appends_state():
    chi = WindState(1.0, -1.0, 0.9)
    h = observe(chi, make_frame(), MeasurementVariant.HYBRID, nn_out=chi)
    np.testing.assert_array_equal(h[3:], [1.0, -1.0, 0.9])


def test_hybrid_needs_network_output():
    with pytest.raises(ValueError):
        observe(WindState(), make_frame(), MeasurementVariant.HYBRID)
    with pytest.raises(ValueError):
        measurement_vector(make_frame(), MeasurementVariant.HYBRID)


def test_measurement_vector_layout():
    frame = make_frame(v_pitot=6.0, v_n=5.0, v_e=-1.0)
    np.testing.assert_array_equal(measurement_vector(frame, MeasurementVariant.CHO2011), [36.0])
    np.testing.assert_array_equal(measurement_vector(frame, MeasurementVariant.THREE_EQ), [36.0, 5.0, -1.0])
    z = measurement_vector(frame, MeasurementVariant.HYBRID, WindState(0.5, 0.25, 1.0))
    np.testing.assert_array_equal(z, [36.0, 5.0, -1.0, 0.5, 0.25, 1.0])


def test_scale_factor_below_floor_is_rejected():
    with pytest.raises(ScaleFactorError):
        observe(WindState(0.0, 0.0, 0.01), make_frame(), MeasurementVariant.THREE_EQ)
    with pytest.raises(ScaleFactorError):
        jacobian(WindState(0.0, 0.0, -1.0), make_frame(), MeasurementVariant.CHO2011)


def test_jacobian_hand_evaluation():
    H = jacobian(WindState(0.0, 0.0, 1.0), make_frame(), MeasurementVariant.THREE_EQ)
    np.testing.assert_allclose(H, [[-14.0, 0.0, 98.0], [1.0, 0.0, -7.0], [0.0, 1.0, 0.0]], atol=1e-15)


def test_hybrid_jacobian_bottom_block_is_identity():
    H = jacobian(WindState(0.3, -0.2, 1.1), make_frame(psi=0.4, theta=0.1), MeasurementVariant.HYBRID)
    assert H.shape == (6, 3)
    np.testing.assert_array_equal(H[3:], np.eye(3))


def _numeric_jacobian(x, frame, variant, step=1e-6):
    cols = []
    for j in range(3):
        dx = np.zeros(3)
        dx[j] = step
        nn_plus = x + dx if variant == MeasurementVariant.HYBRID else None
        nn_minus = x - dx if variant == MeasurementVariant.HYBRID else None
        plus = observe(x + dx, frame, variant, nn_out=nn_plus)
        minus = observe(x - dx, frame, variant, nn_out=nn_minus)
        cols.append((plus - minus) / (2 * step))
    return np.column_stack(cols)


@pytest.mark.parametrize("variant", ALL_VARIANTS)
def test_jacobian_matches_finite_differences(variant, rng):
    for _ in range(1000):
        x = np.array([rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0.5, 1.5)])
        frame = make_frame(
            v_pitot=rng.uniform(0, 10),
            v_n=rng.uniform(-10, 10),
            v_e=rng.uniform(-10, 10),
            v_d=rng.uniform(-2, 2),
            phi=rng.uniform(-0.5, 0.5),
            theta=rng.uniform(-1.0, 1.0),
            psi=rng.uniform(-math.pi, math.pi),
        )
        H = jacobian(x, frame, variant)
        H_fd = _numeric_jacobian(x, frame, variant)
        err = np.max(np.abs(H - H_fd)) / max(1.0, np.max(np.abs(H)))
        assert err < 1e-6, f"relative error {err} at x={x}"


def test_process_model_is_identity():
    np.testing.assert_array_equal(process_model(), np.eye(3))


def test_wind_state_speed_and_heading():
    w = WindState(0.0, 2.0, 1.0)
    assert w.wind_speed == pytest.approx(2.0)
    assert w.wind_heading == pytest.approx(math.pi / 2)
    np.testing.assert_array_equal(WindState.from_array(w.as_array()).as_array(), [0.0, 2.0, 1.0])
