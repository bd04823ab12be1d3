"""Extended Kalman filter recursion and the three configured wind filters."""
import logging
from typing import List, Optional, Sequence, Tuple

import msgspec
from msgspec import structs
import numpy as np
import scipy.linalg

from .exceptions import ConfigError, FilterDivergenceError
from .models import MeasurementVariant
from .wind_model import (
    CF_FLOOR,
    MeasurementFrame,
    StateLike,
    WindState,
    jacobian,
    measurement_vector,
    observe,
    process_model,
)

logger = logging.getLogger(__name__)

# Innovation covariance with a larger condition number is treated as singular
SINGULAR_COND = 1e14

DEFAULT_X0 = WindState(0.0, 0.0, 1.0)
DEFAULT_P0_DIAG = [4.0, 4.0, 0.25]

# Covariances tuned for each variant
DEFAULT_DIAGONALS = {
    MeasurementVariant.CHO2011: {"q": [1e-3, 1e-4, 5e-6], "r": [163.84]},
    MeasurementVariant.THREE_EQ: {"q": [1e-4, 1e-4, 5e-7], "r": [40.96, 40.96, 40.96]},
    MeasurementVariant.HYBRID: {"q": [1e-4, 1e-4, 5e-7], "r": [10.24] * 6},
}


def _diag(values: Sequence[float]) -> List[List[float]]:
    return np.diag(np.asarray(values, dtype=float)).tolist()


class EstimatorConfig(msgspec.Struct):
    """Filter tuning: variant, Q, R, P0 and initial state."""
    variant: MeasurementVariant
    q: List[List[float]]
    r: List[List[float]]
    p0: List[List[float]]
    x0: WindState = msgspec.field(default_factory=lambda: WindState(0.0, 0.0, 1.0))
    cf_floor: float = CF_FLOOR

    def __post_init__(self):
        q, r, p0 = self.q_matrix, self.r_matrix, self.p0_matrix
        if q.shape != (3, 3) or p0.shape != (3, 3):
            raise ConfigError(f"Q and P0 must be 3x3, got {q.shape} and {p0.shape}")
        dim = self.variant.dim
        if r.shape != (dim, dim):
            raise ConfigError(f"R must be {dim}x{dim} for variant {self.variant.value}, got {r.shape}")
        for name, m in (("Q", q), ("P0", p0), ("R", r)):
            if not np.all(np.isfinite(m)):
                raise ConfigError(f"{name} has non-finite entries")
            if not np.allclose(m, m.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(m).max())):
                raise ConfigError(f"{name} is not symmetric")
            if np.linalg.eigvalsh(m).min() < -1e-12 * max(1.0, np.abs(m).max()):
                raise ConfigError(f"{name} is not positive semidefinite")
        try:
            np.linalg.cholesky(r)
        except np.linalg.LinAlgError:
            raise ConfigError("R is not positive definite")
        if not self.cf_floor > 0:
            raise ConfigError(f"cf_floor must be positive, got {self.cf_floor}")
        if self.x0.c_f < self.cf_floor:
            raise ConfigError(f"Initial c_f {self.x0.c_f} is below the floor {self.cf_floor}")

    @property
    def q_matrix(self) -> np.ndarray:
        return np.asarray(self.q, dtype=float)

    @property
    def r_matrix(self) -> np.ndarray:
        return np.asarray(self.r, dtype=float)

    @property
    def p0_matrix(self) -> np.ndarray:
        return np.asarray(self.p0, dtype=float)

    @classmethod
    def from_diagonals(
        cls,
        variant: MeasurementVariant,
        q_diag: Sequence[float],
        r_diag: Sequence[float],
        p0_diag: Sequence[float] = DEFAULT_P0_DIAG,
        x0: WindState = DEFAULT_X0,
        cf_floor: float = CF_FLOOR,
    ) -> "EstimatorConfig":
        return cls(
            variant=variant,
            q=_diag(q_diag),
            r=_diag(r_diag),
            p0=_diag(p0_diag),
            x0=x0,
            cf_floor=cf_floor,
        )


class FilterHealth(msgspec.Struct):
    """Diagnostics of one measurement update."""
    innovation: List[float]
    innovation_cov: List[List[float]]
    nis: Optional[float] = None  # normalized innovation squared
    skipped: bool = False
    reason: Optional[str] = None


def default_config(variant: MeasurementVariant) -> EstimatorConfig:
    """Tuned covariances for a variant, zero-wind unit-scale initial state."""
    variant = MeasurementVariant(variant)
    diagonals = DEFAULT_DIAGONALS[variant]
    return EstimatorConfig.from_diagonals(variant, diagonals["q"], diagonals["r"])


def config_with_scaled_rows(config: EstimatorConfig, rows: Sequence[int], factor: float) -> EstimatorConfig:
    """Copy of config with the R entries of the given measurement rows scaled."""
    r = config.r_matrix.copy()
    for i in rows:
        r[i, :] *= np.sqrt(factor)
        r[:, i] *= np.sqrt(factor)
    return structs.replace(config, r=r.tolist())


def predict(chi: StateLike, P: np.ndarray, config: EstimatorConfig) -> Tuple[np.ndarray, np.ndarray]:
    x = chi.as_array() if isinstance(chi, WindState) else np.asarray(chi, dtype=float)
    F = process_model()
    x_prior = F @ x
    P_prior = F @ P @ F.T + config.q_matrix
    P_prior = 0.5 * (P_prior + P_prior.T)
    return x_prior, P_prior


def update(
    chi_prior: StateLike,
    P_prior: np.ndarray,
    z: Optional[np.ndarray],
    frame: MeasurementFrame,
    config: EstimatorConfig,
    nn_out: Optional[StateLike] = None,
) -> Tuple[np.ndarray, np.ndarray, FilterHealth]:
    """One EKF measurement update.

    If the innovation covariance is numerically singular the update is skipped:
    the prior is returned unchanged and the health record says why.
    """
    x = chi_prior.as_array() if isinstance(chi_prior, WindState) else np.asarray(chi_prior, dtype=float)
    variant = config.variant
    if z is None:
        z = measurement_vector(frame, variant, nn_out)
    z = np.asarray(z, dtype=float)
    if z.shape != (variant.dim,):
        raise ValueError(f"Measurement has shape {z.shape}, variant {variant.value} needs ({variant.dim},)")

    # the appended hybrid rows predict chi itself, nn_out only fixes dimensions
    h = observe(x, frame, variant, nn_out=x if variant == MeasurementVariant.HYBRID else None,
                cf_floor=config.cf_floor)
    H = jacobian(x, frame, variant, cf_floor=config.cf_floor)
    x_post, P_post, health = measurement_update(x, P_prior, z - h, H, config.r_matrix)
    if not health.skipped:
        x_post[2] = max(x_post[2], config.cf_floor)
    return x_post, P_post, health


def measurement_update(
    x: np.ndarray,
    P_prior: np.ndarray,
    y: np.ndarray,
    H: np.ndarray,
    R: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, FilterHealth]:
    """Linearized Kalman update for innovation y with Jacobian H and noise R."""
    C = H @ P_prior @ H.T + R

    skip_reason = None
    if not np.all(np.isfinite(C)):
        skip_reason = "non-finite innovation covariance"
    elif np.linalg.cond(C) > SINGULAR_COND:
        skip_reason = "innovation covariance is numerically singular"
    else:
        try:
            c_factor = scipy.linalg.cho_factor(C)
        except np.linalg.LinAlgError:
            skip_reason = "innovation covariance is not positive definite"

    if skip_reason is not None:
        health = FilterHealth(innovation=y.tolist(), innovation_cov=C.tolist(), skipped=True, reason=skip_reason)
        return x.copy(), P_prior.copy(), health

    # K = P H^T C^-1, with C and P symmetric
    K = scipy.linalg.cho_solve(c_factor, H @ P_prior).T
    x_post = x + K @ y
    P_post = (np.eye(len(x)) - K @ H) @ P_prior
    P_post = 0.5 * (P_post + P_post.T)

    nis = float(y @ scipy.linalg.cho_solve(c_factor, y))
    health = FilterHealth(innovation=y.tolist(), innovation_cov=C.tolist(), nis=nis)
    return x_post, P_post, health


class WindEkf:
    """Stateful wind filter: one predict and one update per estimator tick."""

    def __init__(self, config: EstimatorConfig, name: Optional[str] = None):
        self.config = config
        self.name = name or config.variant.value
        self.x = config.x0.as_array()
        self.P = config.p0_matrix.copy()
        self.n_steps = 0
        self.n_skipped = 0
        self.last_health: Optional[FilterHealth] = None

    @property
    def state(self) -> WindState:
        return WindState.from_array(self.x)

    @property
    def covariance(self) -> np.ndarray:
        return self.P.copy()

    def reset(self):
        self.x = self.config.x0.as_array()
        self.P = self.config.p0_matrix.copy()
        self.n_steps = 0
        self.n_skipped = 0
        self.last_health = None

    def predict(self):
        self.x, self.P = predict(self.x, self.P, self.config)

    def update(self, frame: MeasurementFrame, nn_out: Optional[StateLike] = None) -> FilterHealth:
        self.x, self.P, health = update(self.x, self.P, None, frame, self.config, nn_out)
        self.last_health = health
        if health.skipped:
            self.n_skipped += 1
            if self.n_skipped == 1:
                logger.warning(f"{self.name}: update skipped at t={frame.t:.4f}: {health.reason}")
            else:
                logger.debug(f"{self.name}: update skipped at t={frame.t:.4f} ({self.n_skipped} so far)")
        self._check_finite(frame)
        return health

    def step(self, frame: MeasurementFrame, nn_out: Optional[StateLike] = None) -> WindState:
        self.predict()
        self.update(frame, nn_out)
        self.n_steps += 1
        return self.state

    def _check_finite(self, frame: MeasurementFrame):
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.P))):
            raise FilterDivergenceError(f"{self.name}: non-finite state or covariance at t={frame.t}")
