"""Air-data relations: airspeed, true airspeed, alpha/beta, Pitot model and scale factor."""
import math
from typing import Optional

import msgspec
import numpy as np

from .exceptions import ConfigError
from .frames import Vec3
from .models import Frame


class AirdataSample(msgspec.Struct):
    """Airspeed vector with derived true airspeed and flow angles.

    alpha and beta are None when the airspeed is zero (flow angles undefined).
    """
    v_a: Vec3
    v_t: float
    alpha: Optional[float]
    beta: Optional[float]

    @property
    def is_degenerate(self) -> bool:
        return self.alpha is None or self.beta is None


class PitotModel(msgspec.Struct):
    """One-dimensional Pitot tube with calibration factor eta."""
    eta: float = 1.0

    def __post_init__(self):
        if not self.eta > 0:
            raise ConfigError(f"Pitot calibration factor must be positive, got {self.eta}")


def airspeed(v_g: Vec3, v_w_body: Vec3) -> Vec3:
    """Velocity relative to the air mass: groundspeed minus wind, componentwise."""
    return Vec3(v_g.x - v_w_body.x, v_g.y - v_w_body.y, v_g.z - v_w_body.z, v_g.frame)


def airdata_from_airspeed(v_a: Vec3) -> AirdataSample:
    v_t = v_a.norm()
    if v_t == 0.0:
        return AirdataSample(v_a=v_a, v_t=0.0, alpha=None, beta=None)
    # atan2 keeps v_t*cos(alpha)*cos(beta) == u_a for backward flow too
    alpha = math.atan2(v_a.z, v_a.x)
    beta = math.asin(max(-1.0, min(1.0, v_a.y / v_t)))
    return AirdataSample(v_a=v_a, v_t=v_t, alpha=alpha, beta=beta)


def airspeed_from_airdata(v_t: float, alpha: float, beta: float) -> Vec3:
    """Body airspeed vector from true airspeed and flow angles."""
    cb = math.cos(beta)
    return Vec3(
        v_t * math.cos(alpha) * cb,
        v_t * math.sin(beta),
        v_t * math.sin(alpha) * cb,
        Frame.BODY,
    )


def pitot_pressure(u_a: float, model: PitotModel) -> float:
    """Dynamic pressure seen by the Pitot tube.

    The tube only sees u_a squared, so backward flow reads like forward flow.
    """
    return model.eta * u_a * u_a


def pitot_speed(delta_p: float) -> float:
    if delta_p < 0:
        raise ValueError(f"Pitot pressure must be non-negative, got {delta_p}")
    return math.sqrt(delta_p)


def scale_factor(eta: float, alpha, beta):
    """Lumped factor c_f with V_t = V_pitot / c_f; alpha and beta may be arrays."""
    if not eta > 0:
        raise ConfigError(f"Pitot calibration factor must be positive, got {eta}")
    return math.sqrt(eta) * np.cos(alpha) * np.cos(beta)


def true_airspeed_from_pitot(v_pitot: float, c_f: float) -> float:
    return v_pitot / c_f
