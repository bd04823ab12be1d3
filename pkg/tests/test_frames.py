"""Tests for attitude, rotations and angle wrapping."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from AirshipWind.exceptions import GimbalLockError
from AirshipWind.frames import (
    EulerAttitude,
    Vec3,
    euler_rate_matrix,
    ned_to_body,
    rotation_body_to_ned,
    unwrap_angle,
    wrap_angle,
)
from AirshipWind.models import Frame

angles = st.floats(min_value=-math.pi, max_value=math.pi, allow_nan=False)
pitches = st.floats(min_value=-1.5, max_value=1.5, allow_nan=False)


def test_identity_attitude():
    np.testing.assert_array_equal(rotation_body_to_ned(EulerAttitude()), np.eye(3))


def test_pure_yaw_maps_east_to_body_x():
    v = ned_to_body(EulerAttitude(0.0, 0.0, math.pi / 2), [0.0, 1.0, 0.0])
    np.testing.assert_allclose(v, [1.0, 0.0, 0.0], atol=1e-15)


@given(angles, pitches, angles)
def test_rotation_is_orthonormal(phi, theta, psi):
    R = rotation_body_to_ned(EulerAttitude(phi, theta, psi))
    assert np.max(np.abs(R.T @ R - np.eye(3))) < 1e-12
    assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)


@given(angles, pitches, angles)
def test_ned_to_body_inverts_the_rotation(phi, theta, psi):
    att = EulerAttitude(phi, theta, psi)
    v = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(rotation_body_to_ned(att) @ ned_to_body(att, v), v, atol=1e-12)


def test_euler_rate_matrix_zero_roll_pitch_is_identity():
    np.testing.assert_allclose(euler_rate_matrix(EulerAttitude(0.0, 0.0, 2.1)), np.eye(3), atol=1e-15)


def test_euler_rate_matrix_roll_row():
    M = euler_rate_matrix(EulerAttitude(math.pi / 4, 0.0, 0.0))
    np.testing.assert_allclose(M[1], [0.0, math.cos(math.pi / 4), -math.sin(math.pi / 4)])


def test_euler_rate_matrix_matches_finite_differences(rng):
    h = 1e-5
    for _ in range(20):
        angles0 = rng.uniform([-math.pi, -1.2, -math.pi], [math.pi, 1.2, math.pi])
        angle_rates = rng.uniform(-1.0, 1.0, size=3)
        C_plus = rotation_body_to_ned(EulerAttitude.from_array(angles0 + h * angle_rates))
        C_minus = rotation_body_to_ned(EulerAttitude.from_array(angles0 - h * angle_rates))
        C = rotation_body_to_ned(EulerAttitude.from_array(angles0))
        # dC/dt = C [w]x with w the body rates
        skew = C.T @ (C_plus - C_minus) / (2 * h)
        body_rates = np.array([skew[2, 1], skew[0, 2], skew[1, 0]])
        recovered = euler_rate_matrix(EulerAttitude.from_array(angles0)) @ body_rates
        np.testing.assert_allclose(recovered, angle_rates, atol=1e-6)


def test_euler_rate_matrix_rejects_gimbal_lock():
    att = EulerAttitude(0.0, 0.0, 0.0)
    att.theta = math.pi / 2
    with pytest.raises(GimbalLockError):
        euler_rate_matrix(att)


@pytest.mark.parametrize("theta", [math.pi / 2, -math.pi / 2, 2.0, float("nan")])
def test_attitude_rejects_invalid_pitch(theta):
    with pytest.raises(GimbalLockError):
        EulerAttitude(0.0, theta, 0.0)


def test_gimbal_lock_is_a_value_error():
    with pytest.raises(ValueError):
        EulerAttitude(0.0, math.pi / 2, 0.0)


@pytest.mark.parametrize("a, expected", [
    (0.0, 0.0),
    (3 * math.pi, math.pi),
    (-math.pi, math.pi),
    (math.pi, math.pi),
    (2 * math.pi + 0.1, 0.1),
    (-2 * math.pi - 0.1, -0.1),
])
def test_wrap_angle(a, expected):
    assert wrap_angle(a) == pytest.approx(expected, abs=1e-12)


@given(st.floats(min_value=-1e4, max_value=1e4, allow_nan=False))
def test_wrap_angle_range(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi
    assert math.cos(w) == pytest.approx(math.cos(a), abs=1e-9)


def test_wrap_angle_array():
    out = wrap_angle(np.array([0.0, 3 * math.pi, -math.pi]))
    assert isinstance(out, np.ndarray)
    np.testing.assert_allclose(out, [0.0, math.pi, math.pi])


def test_attitude_wraps_roll_and_yaw():
    att = EulerAttitude(2 * math.pi + 0.2, 0.1, -math.pi)
    assert att.phi == pytest.approx(0.2)
    assert att.psi == pytest.approx(math.pi)


def test_unwrap_angle_continues_across_pi():
    prev = math.pi - 0.05
    new = -math.pi + 0.05
    assert unwrap_angle(prev, new) == pytest.approx(math.pi + 0.05)


def test_vec3_helpers():
    v = Vec3.from_array([3.0, 4.0, 0.0], Frame.NED)
    assert v.frame == Frame.NED
    assert v.norm() == 5.0
    np.testing.assert_array_equal(v.as_array(), [3.0, 4.0, 0.0])
