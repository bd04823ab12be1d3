"""Euler-angle attitude and body <-> NED rotations.

Conventions: 3-2-1 (yaw, pitch, roll) Euler sequence, NED inertial frame,
body x forward, y starboard, z down. Angles are radians.
"""
import math
from typing import Union

import msgspec
import numpy as np

from .exceptions import GimbalLockError
from .models import Frame

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi


# Results within this distance of -pi are reported as +pi
_WRAP_EPS = 1e-12


def wrap_angle(a: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Wrap an angle (or array of angles) into (-pi, pi]."""
    arr = np.asarray(a, dtype=float)
    r = arr - TWO_PI * np.round(arr / TWO_PI)
    r = np.where(r <= -math.pi + _WRAP_EPS, r + TWO_PI, r)
    r = np.minimum(r, math.pi)
    if isinstance(a, np.ndarray):
        return r
    return float(r)


def unwrap_angle(prev_continuous: float, new_wrapped: float) -> float:
    """Continue a continuous angle track with a new wrapped sample."""
    return prev_continuous + wrap_angle(new_wrapped - prev_continuous)


class EulerAttitude(msgspec.Struct):
    """Roll, pitch, yaw. Pitch must stay inside (-pi/2, pi/2)."""
    phi: float = 0.0
    theta: float = 0.0
    psi: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.phi, self.theta, self.psi)):
            raise GimbalLockError(f"Non-finite attitude: {self}")
        if abs(self.theta) >= HALF_PI:
            raise GimbalLockError(f"Pitch {self.theta} rad is at or beyond +/- pi/2")
        self.phi = wrap_angle(self.phi)
        self.psi = wrap_angle(self.psi)

    def as_array(self) -> np.ndarray:
        return np.array([self.phi, self.theta, self.psi])

    @classmethod
    def from_array(cls, arr) -> "EulerAttitude":
        return cls(float(arr[0]), float(arr[1]), float(arr[2]))


class Vec3(msgspec.Struct):
    """Three-component vector tagged with the frame it lives in."""
    x: float
    y: float
    z: float
    frame: Frame = Frame.BODY

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @classmethod
    def from_array(cls, arr, frame: Frame = Frame.BODY) -> "Vec3":
        return cls(float(arr[0]), float(arr[1]), float(arr[2]), frame)

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)


def rotation_body_to_ned(att: EulerAttitude) -> np.ndarray:
    """Direction cosine matrix taking body-frame vectors to NED."""
    cphi, sphi = math.cos(att.phi), math.sin(att.phi)
    cth, sth = math.cos(att.theta), math.sin(att.theta)
    cpsi, spsi = math.cos(att.psi), math.sin(att.psi)

    # NED -> body; its transpose is returned
    s_phi = np.array([
        [cpsi * cth, spsi * cth, -sth],
        [cpsi * sth * sphi - spsi * cphi, spsi * sth * sphi + cpsi * cphi, cth * sphi],
        [cpsi * sth * cphi + spsi * sphi, spsi * sth * cphi - cpsi * sphi, cth * cphi],
    ])
    return s_phi.T


def ned_to_body(att: EulerAttitude, v_ned) -> np.ndarray:
    return rotation_body_to_ned(att).T @ np.asarray(v_ned, dtype=float)


def euler_rate_matrix(att: EulerAttitude) -> np.ndarray:
    """Matrix taking body rates (p, q, r) to Euler angle rates."""
    if abs(att.theta) >= HALF_PI:
        raise GimbalLockError(f"Euler rates are undefined at pitch {att.theta} rad")
    cphi, sphi = math.cos(att.phi), math.sin(att.phi)
    cth, tth = math.cos(att.theta), math.tan(att.theta)
    return np.array([
        [1.0, sphi * tth, cphi * tth],
        [0.0, cphi, -sphi],
        [0.0, sphi / cth, cphi / cth],
    ])
