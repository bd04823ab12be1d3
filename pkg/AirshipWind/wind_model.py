"""Measurement model of the wind filters.

State chi = [V_Nw, V_Ew, c_f]. Rows of the observation function:

    z1 = c_f^2 ((V_N - V_Nw)^2 + (V_E - V_Ew)^2 + V_D^2)      (= V_pitot^2)
    z2 = (V_pitot / c_f) cos(psi) cos(theta) + V_Nw             (= V_N)
    z3 = (V_pitot / c_f) sin(psi) cos(theta) + V_Ew             (= V_E)

The hybrid variant appends chi itself, matched against the network output.
"""
import math
from typing import Optional, Union

import msgspec
import numpy as np

from .airdata import true_airspeed_from_pitot
from .exceptions import ScaleFactorError
from .frames import EulerAttitude
from .models import MeasurementVariant

CF_FLOOR = 0.05


class WindState(msgspec.Struct):
    """Horizontal wind (m/s) and Pitot scale factor."""
    v_nw: float = 0.0
    v_ew: float = 0.0
    c_f: float = 1.0

    def as_array(self) -> np.ndarray:
        return np.array([self.v_nw, self.v_ew, self.c_f])

    @classmethod
    def from_array(cls, arr) -> "WindState":
        return cls(float(arr[0]), float(arr[1]), float(arr[2]))

    @property
    def wind_speed(self) -> float:
        return math.hypot(self.v_nw, self.v_ew)

    @property
    def wind_heading(self) -> float:
        """Direction the wind velocity points to, atan2(V_Ew, V_Nw)."""
        return math.atan2(self.v_ew, self.v_nw)


class MeasurementFrame(msgspec.Struct):
    """One synchronized estimator-rate snapshot of the sensors."""
    v_pitot: float
    v_n: float
    v_e: float
    v_d: float
    att: EulerAttitude
    t: float = 0.0


StateLike = Union[WindState, np.ndarray]


def _state_array(chi: StateLike) -> np.ndarray:
    if isinstance(chi, WindState):
        return chi.as_array()
    return np.asarray(chi, dtype=float)


def _check_cf(c_f: float, cf_floor: float):
    if not c_f >= cf_floor:
        raise ScaleFactorError(f"Scale factor {c_f} is below the floor {cf_floor}")


def process_model() -> np.ndarray:
    """Random-walk transition for wind and scale factor."""
    return np.eye(3)


def measurement_vector(
    frame: MeasurementFrame,
    variant: MeasurementVariant,
    nn_out: Optional[StateLike] = None,
) -> np.ndarray:
    """Measured z for the given variant."""
    z = np.array([frame.v_pitot * frame.v_pitot, frame.v_n, frame.v_e])
    if variant == MeasurementVariant.CHO2011:
        return z[:1]
    if variant == MeasurementVariant.HYBRID:
        if nn_out is None:
            raise ValueError("Hybrid measurement needs the network output")
        return np.concatenate([z, _state_array(nn_out)])
    return z


def observe(
    chi: StateLike,
    frame: MeasurementFrame,
    variant: MeasurementVariant,
    nn_out: Optional[StateLike] = None,
    cf_floor: float = CF_FLOOR,
) -> np.ndarray:
    """Predicted measurement h(chi)."""
    x = _state_array(chi)
    v_nw, v_ew, c_f = x
    _check_cf(c_f, cf_floor)
    if variant == MeasurementVariant.HYBRID and nn_out is None:
        raise ValueError("Hybrid observation needs the network output")

    dn = frame.v_n - v_nw
    de = frame.v_e - v_ew
    z1 = c_f * c_f * (dn * dn + de * de + frame.v_d * frame.v_d)
    if variant == MeasurementVariant.CHO2011:
        return np.array([z1])

    cth = math.cos(frame.att.theta)
    v_air = true_airspeed_from_pitot(frame.v_pitot, c_f)
    z2 = v_air * math.cos(frame.att.psi) * cth + v_nw
    z3 = v_air * math.sin(frame.att.psi) * cth + v_ew
    h = np.array([z1, z2, z3])
    if variant == MeasurementVariant.HYBRID:
        return np.concatenate([h, x])
    return h


def jacobian(
    chi: StateLike,
    frame: MeasurementFrame,
    variant: MeasurementVariant,
    cf_floor: float = CF_FLOOR,
) -> np.ndarray:
    """Analytic dh/dchi, shape (variant.dim, 3)."""
    v_nw, v_ew, c_f = _state_array(chi)
    _check_cf(c_f, cf_floor)

    dn = frame.v_n - v_nw
    de = frame.v_e - v_ew
    c2 = c_f * c_f
    row1 = [-2.0 * c2 * dn, -2.0 * c2 * de, 2.0 * c_f * (dn * dn + de * de + frame.v_d * frame.v_d)]
    if variant == MeasurementVariant.CHO2011:
        return np.array([row1])

    cth = math.cos(frame.att.theta)
    k = -frame.v_pitot / c2
    H = np.array([
        row1,
        [1.0, 0.0, k * math.cos(frame.att.psi) * cth],
        [0.0, 1.0, k * math.sin(frame.att.psi) * cth],
    ])
    if variant == MeasurementVariant.HYBRID:
        return np.vstack([H, np.eye(3)])
    return H
