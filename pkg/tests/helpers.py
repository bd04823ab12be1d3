"""Frame builders shared by the tests."""
import math

from AirshipWind.frames import EulerAttitude
from AirshipWind.wind_model import MeasurementFrame


def make_frame(v_pitot=7.0, v_n=7.0, v_e=0.0, v_d=0.0, phi=0.0, theta=0.0, psi=0.0, t=0.0) -> MeasurementFrame:
    return MeasurementFrame(v_pitot, v_n, v_e, v_d, EulerAttitude(phi, theta, psi), t)


def truth_frame(v_nw: float, v_ew: float, c_f: float, psi: float, v_air: float = 7.0, t: float = 0.0) -> MeasurementFrame:
    """Noiseless level-flight frame for the given wind and scale factor."""
    return make_frame(
        v_pitot=c_f * v_air,
        v_n=v_air * math.cos(psi) + v_nw,
        v_e=v_air * math.sin(psi) + v_ew,
        psi=psi,
        t=t,
    )
