"""Feed-forward wind network, scaled conjugate gradient training and fit metrics.

Architecture: 8 inputs -> 3 sigmoid hidden layers of 24 units -> 3 linear outputs
(V_Nw, V_Ew, c_f). Inputs and targets are min-max normalized to [-1, 1] using
the training split only.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import msgspec
import numpy as np
from scipy.special import expit

from .exceptions import ConfigError
from .models import ErrorHistogram, SplitMetrics, TrainReport
from .wind_model import MeasurementFrame

logger = logging.getLogger(__name__)

N_INPUTS = 8
HIDDEN_SIZES = (24, 24, 24)
N_OUTPUTS = 3
LAYER_SIZES = (N_INPUTS,) + HIDDEN_SIZES + (N_OUTPUTS,)

INPUT_COLUMNS = [
    "v_pitot_sq",
    "v_d_sq",
    "v_n",
    "v_e",
    "v_e_sq",
    "v_n_sq",
    "v_pitot_cpsi_cth",
    "v_pitot_spsi_cth",
]
TARGET_COLUMNS = ["target_v_nw", "target_v_ew", "target_c_f"]

SPLITS = ("train", "validation", "test")
SPLIT_FRACTIONS = (0.70, 0.15, 0.15)

# Moller's defaults
SCG_SIGMA = 5e-5
SCG_LAMBDA = 1e-6

HISTOGRAM_BINS = 20


def layer_shapes(sizes: Sequence[int] = LAYER_SIZES) -> List[Tuple[int, int]]:
    """(fan_out, fan_in) for every weight matrix."""
    return [(sizes[i + 1], sizes[i]) for i in range(len(sizes) - 1)]


@dataclass
class MlpModel:
    """Weights, biases and input/output normalization of the wind network."""
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    in_shift: np.ndarray = field(default_factory=lambda: np.zeros(N_INPUTS))
    in_scale: np.ndarray = field(default_factory=lambda: np.ones(N_INPUTS))
    out_shift: np.ndarray = field(default_factory=lambda: np.zeros(N_OUTPUTS))
    out_scale: np.ndarray = field(default_factory=lambda: np.ones(N_OUTPUTS))

    def __post_init__(self):
        expected = layer_shapes()
        shapes = [w.shape for w in self.weights]
        if shapes != expected:
            raise ValueError(f"Weight shapes {shapes} do not match the architecture {expected}")
        for b, (fan_out, _) in zip(self.biases, expected):
            if b.shape != (fan_out,):
                raise ValueError(f"Bias of shape {b.shape}, expected ({fan_out},)")
        arrays = self.weights + self.biases + [self.in_shift, self.in_scale, self.out_shift, self.out_scale]
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise ValueError("Model parameters must be finite")
        if np.any(self.in_scale <= 0) or np.any(self.out_scale <= 0):
            raise ValueError("Normalization scales must be positive")

    @classmethod
    def zeros(cls) -> "MlpModel":
        shapes = layer_shapes()
        return cls(
            weights=[np.zeros(s) for s in shapes],
            biases=[np.zeros(s[0]) for s in shapes],
        )

    @classmethod
    def initialize(cls, rng: np.random.Generator) -> "MlpModel":
        """Uniform weights and biases in +/- 1/sqrt(fan_in)."""
        weights, biases = [], []
        for fan_out, fan_in in layer_shapes():
            bound = 1.0 / math.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(weights=weights, biases=biases)

    def copy(self) -> "MlpModel":
        return MlpModel(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            in_shift=self.in_shift.copy(),
            in_scale=self.in_scale.copy(),
            out_shift=self.out_shift.copy(),
            out_scale=self.out_scale.copy(),
        )

    def parameters(self) -> np.ndarray:
        """Flat parameter vector: W1, b1, W2, b2, ..."""
        return pack(self.weights, self.biases)

    def with_parameters(self, theta: np.ndarray) -> "MlpModel":
        weights, biases = unpack(theta)
        return MlpModel(
            weights=weights,
            biases=biases,
            in_shift=self.in_shift.copy(),
            in_scale=self.in_scale.copy(),
            out_shift=self.out_shift.copy(),
            out_scale=self.out_scale.copy(),
        )

    def normalize_inputs(self, x: np.ndarray) -> np.ndarray:
        return (x - self.in_shift) * self.in_scale

    def normalize_targets(self, y: np.ndarray) -> np.ndarray:
        return (y - self.out_shift) * self.out_scale

    def denormalize_outputs(self, y_n: np.ndarray) -> np.ndarray:
        return y_n / self.out_scale + self.out_shift


def pack(weights: Sequence[np.ndarray], biases: Sequence[np.ndarray]) -> np.ndarray:
    parts = []
    for w, b in zip(weights, biases):
        parts.append(w.ravel())
        parts.append(b.ravel())
    return np.concatenate(parts)


def unpack(theta: np.ndarray) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    weights, biases = [], []
    i = 0
    for fan_out, fan_in in layer_shapes():
        n = fan_out * fan_in
        weights.append(theta[i:i + n].reshape(fan_out, fan_in).copy())
        i += n
        biases.append(theta[i:i + fan_out].copy())
        i += fan_out
    if i != theta.size:
        raise ValueError(f"Parameter vector has {theta.size} entries, architecture needs {i}")
    return weights, biases


def _activations(weights, biases, x_n: np.ndarray) -> List[np.ndarray]:
    """Layer activations, input first, linear output last."""
    acts = [x_n]
    a = x_n
    last = len(weights) - 1
    for k, (w, b) in enumerate(zip(weights, biases)):
        z = a @ w.T + b
        a = z if k == last else expit(z)
        acts.append(a)
    return acts


def forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Network output for one 8-vector or an (N, 8) batch, in target units."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x_n = model.normalize_inputs(np.atleast_2d(x))
    out = model.denormalize_outputs(_activations(model.weights, model.biases, x_n)[-1])
    return out[0] if single else out


def remap_inputs(frame: MeasurementFrame) -> np.ndarray:
    """Eight network inputs built from one measurement frame."""
    vp = frame.v_pitot
    cth = math.cos(frame.att.theta)
    return np.array([
        vp * vp,
        frame.v_d * frame.v_d,
        frame.v_n,
        frame.v_e,
        frame.v_e * frame.v_e,
        frame.v_n * frame.v_n,
        vp * math.cos(frame.att.psi) * cth,
        vp * math.sin(frame.att.psi) * cth,
    ])


def mse_loss(theta: np.ndarray, x_n: np.ndarray, y_n: np.ndarray) -> float:
    weights, biases = unpack(theta)
    out = _activations(weights, biases, x_n)[-1]
    return float(np.mean((out - y_n) ** 2))


def mse_gradient(theta: np.ndarray, x_n: np.ndarray, y_n: np.ndarray) -> Tuple[float, np.ndarray]:
    """MSE over all rows and outputs and its gradient by backpropagation."""
    weights, biases = unpack(theta)
    acts = _activations(weights, biases, x_n)
    err = acts[-1] - y_n
    loss = float(np.mean(err ** 2))

    delta = 2.0 * err / err.size
    grad_w = [None] * len(weights)
    grad_b = [None] * len(weights)
    for k in range(len(weights) - 1, -1, -1):
        grad_w[k] = delta.T @ acts[k]
        grad_b[k] = delta.sum(axis=0)
        if k > 0:
            a = acts[k]
            delta = (delta @ weights[k]) * a * (1.0 - a)
    return loss, pack(grad_w, grad_b)


@dataclass
class Dataset:
    """Network inputs, targets, originating scenario and split label per row."""
    inputs: np.ndarray
    targets: np.ndarray
    scenario_id: np.ndarray
    split: Optional[np.ndarray] = None

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float).reshape(-1, N_INPUTS)
        self.targets = np.asarray(self.targets, dtype=float).reshape(-1, N_OUTPUTS)
        self.scenario_id = np.asarray(self.scenario_id, dtype=np.int64)
        if not (len(self.inputs) == len(self.targets) == len(self.scenario_id)):
            raise ValueError("inputs, targets and scenario_id must have the same number of rows")
        if self.split is not None:
            self.split = np.asarray(self.split, dtype=object)
            if len(self.split) != len(self.inputs):
                raise ValueError("split labels must cover every row")
            unknown = set(self.split) - set(SPLITS)
            if unknown:
                raise ValueError(f"Unknown split labels: {sorted(unknown)}")

    def __len__(self) -> int:
        return len(self.inputs)

    def mask(self, name: str) -> np.ndarray:
        if self.split is None:
            raise ValueError("Dataset has no split labels")
        return self.split == name

    def split_sizes(self) -> Dict[str, int]:
        return {name: int(self.mask(name).sum()) for name in SPLITS}

    def with_split(self, seed: int) -> "Dataset":
        return Dataset(self.inputs, self.targets, self.scenario_id, split_dataset(len(self), seed))


def split_dataset(n: int, seed: int) -> np.ndarray:
    """Random 70/15/15 assignment of n rows."""
    rng = np.random.default_rng(seed)
    n_train = int(round(SPLIT_FRACTIONS[0] * n))
    n_val = int(round(SPLIT_FRACTIONS[1] * n))
    n_train = min(n_train, n)
    n_val = min(n_val, n - n_train)
    labels = np.empty(n, dtype=object)
    order = rng.permutation(n)
    labels[order[:n_train]] = "train"
    labels[order[n_train:n_train + n_val]] = "validation"
    labels[order[n_train + n_val:]] = "test"
    return labels


def fit_normalization(values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Shift and scale mapping each column's [min, max] onto [-1, 1].

    Constant columns are only shifted.
    """
    lo = values.min(axis=0)
    hi = values.max(axis=0)
    span = hi - lo
    shift = 0.5 * (hi + lo)
    scale = np.where(span > 0, 2.0 / np.where(span > 0, span, 1.0), 1.0)
    return shift, scale


def pearson_r(pred: np.ndarray, target: np.ndarray) -> Optional[float]:
    """Pooled correlation of predictions and targets; None if either is constant."""
    p = np.asarray(pred, dtype=float).ravel()
    t = np.asarray(target, dtype=float).ravel()
    if p.size < 2:
        return None
    dp = p - p.mean()
    dt = t - t.mean()
    denom = math.sqrt(float(dp @ dp) * float(dt @ dt))
    if denom == 0.0:
        return None
    return float(np.clip((dp @ dt) / denom, -1.0, 1.0))


def metrics(model: MlpModel, dataset: Dataset) -> Tuple[Dict[str, SplitMetrics], Optional[ErrorHistogram]]:
    """MSE on normalized targets and pooled R per split, plus residual histogram.

    Empty splits are left out. The "all" entry covers every row.
    """
    pred_n = model.normalize_targets(forward(model, dataset.inputs)) if len(dataset) else np.empty((0, N_OUTPUTS))
    target_n = model.normalize_targets(dataset.targets)
    residuals = target_n - pred_n

    result: Dict[str, SplitMetrics] = {}
    masks = {name: dataset.mask(name) for name in SPLITS} if dataset.split is not None else {}
    masks["all"] = np.ones(len(dataset), dtype=bool)
    for name, m in masks.items():
        n = int(m.sum())
        if n == 0:
            continue
        result[name] = SplitMetrics(
            n_rows=n,
            mse=float(np.mean(residuals[m] ** 2)),
            r_value=pearson_r(pred_n[m], target_n[m]),
        )

    histogram = None
    if residuals.size:
        counts, edges = np.histogram(residuals.ravel(), bins=HISTOGRAM_BINS)
        histogram = ErrorHistogram(edges=edges.tolist(), counts=counts.tolist())
    return result, histogram


class ScgOptimizer:
    """Scaled conjugate gradient without line search.

    Curvature along the search direction is estimated from a finite difference
    of gradients and regularized by a Levenberg-Marquardt style scalar lambda.
    Steps that would increase the loss are rejected.
    """

    def __init__(self, loss_and_grad, theta: np.ndarray, sigma: float = SCG_SIGMA, lam: float = SCG_LAMBDA):
        self.loss_and_grad = loss_and_grad
        self.theta = theta.copy()
        self.sigma0 = sigma
        self.lam = lam
        self.lam_bar = 0.0
        self.loss, grad = loss_and_grad(self.theta)
        self.r = -grad
        self.p = self.r.copy()
        self.success = True
        self.delta = 0.0
        # iteration counter, advanced on accepted and rejected steps alike
        self.k = 1
        self.n = theta.size
        self.converged = False

    def step(self) -> float:
        """One SCG iteration; returns the loss at the (possibly unchanged) parameters."""
        if self.converged:
            return self.loss
        p_sq = float(self.p @ self.p)
        if p_sq == 0.0:
            self.converged = True
            return self.loss

        if self.success:
            sigma = self.sigma0 / math.sqrt(p_sq)
            _, grad_shift = self.loss_and_grad(self.theta + sigma * self.p)
            s = (grad_shift + self.r) / sigma
            self.delta = float(self.p @ s)

        delta = self.delta + (self.lam - self.lam_bar) * p_sq
        if delta <= 0:
            # make the Hessian estimate positive definite
            self.lam_bar = 2.0 * (self.lam - delta / p_sq)
            delta = -delta + self.lam * p_sq
            self.lam = self.lam_bar
        self.delta = delta

        mu = float(self.p @ self.r)
        if mu == 0.0:
            self.converged = True
            return self.loss
        alpha = mu / delta

        theta_new = self.theta + alpha * self.p
        loss_new, grad_new = self.loss_and_grad(theta_new)
        comparison = 2.0 * delta * (self.loss - loss_new) / (mu * mu)

        if comparison >= 0:
            self.theta = theta_new
            self.loss = loss_new
            r_new = -grad_new
            self.lam_bar = 0.0
            self.success = True
            if self.k % self.n == 0:
                self.p = r_new
            else:
                beta = (float(r_new @ r_new) - float(r_new @ self.r)) / mu
                self.p = r_new + beta * self.p
            self.r = r_new
            if comparison >= 0.75:
                self.lam = 0.25 * self.lam
        else:
            self.lam_bar = self.lam
            self.success = False

        if comparison < 0.25:
            self.lam = self.lam + delta * (1.0 - comparison) / p_sq

        self.k += 1
        if not np.any(self.r):
            self.converged = True
        return self.loss


def train_scg(
    dataset: Dataset,
    epochs: int,
    seed: int,
    normalize: bool = True,
    log_every: int = 100,
) -> Tuple[MlpModel, TrainReport]:
    """Train the wind network on the training split with SCG.

    The returned model holds the parameters with the lowest validation MSE
    seen over all epochs. Deterministic for a given seed.
    """
    if len(dataset) == 0:
        raise ValueError("Cannot train on an empty dataset")
    if dataset.split is None:
        dataset = dataset.with_split(seed)

    train_mask = dataset.mask("train")
    val_mask = dataset.mask("validation")
    if not train_mask.any():
        raise ValueError("Training split is empty")

    rng = np.random.default_rng(seed)
    model = MlpModel.initialize(rng)
    x_train = dataset.inputs[train_mask]
    y_train = dataset.targets[train_mask]
    if normalize:
        model.in_shift, model.in_scale = fit_normalization(x_train)
        model.out_shift, model.out_scale = fit_normalization(y_train)

    zero_variance = bool(np.all(np.ptp(dataset.targets, axis=0) == 0))
    if zero_variance:
        logger.warning("Targets have zero variance; R-values are undefined")

    x_n = model.normalize_inputs(x_train)
    y_n = model.normalize_targets(y_train)
    if val_mask.any():
        xv_n = model.normalize_inputs(dataset.inputs[val_mask])
        yv_n = model.normalize_targets(dataset.targets[val_mask])
    else:
        xv_n, yv_n = x_n, y_n

    train_curve: List[float] = []
    val_curve: List[float] = []
    best_theta = model.parameters()
    best_val = mse_loss(best_theta, xv_n, yv_n)
    best_epoch = 0

    if epochs > 0:
        optimizer = ScgOptimizer(lambda th: mse_gradient(th, x_n, y_n), best_theta)
        logger.info(f"Training {best_theta.size} parameters on {len(x_train)} rows for {epochs} epochs (seed {seed})")
        for epoch in range(1, epochs + 1):
            train_loss = optimizer.step()
            val_loss = mse_loss(optimizer.theta, xv_n, yv_n)
            train_curve.append(train_loss)
            val_curve.append(val_loss)
            if val_loss < best_val:
                best_val = val_loss
                best_theta = optimizer.theta.copy()
                best_epoch = epoch
            if log_every and epoch % log_every == 0:
                logger.info(f"epoch {epoch}: train mse {train_loss:.6g}, validation mse {val_loss:.6g}")
            else:
                logger.debug(f"epoch {epoch}: train mse {train_loss:.6g}, validation mse {val_loss:.6g}")
            if optimizer.converged:
                logger.info(f"SCG converged at epoch {epoch}")
                break

    model = model.with_parameters(best_theta)
    split_metrics, histogram = metrics(model, dataset)
    report = TrainReport(
        seed=seed,
        epochs=len(train_curve),
        train_mse=train_curve,
        validation_mse=val_curve,
        best_epoch=best_epoch,
        split_sizes=dataset.split_sizes(),
        metrics=split_metrics,
        histogram=histogram,
        zero_target_variance=zero_variance,
        normalized=normalize,
    )
    return model, report


class TrainingConfig(msgspec.Struct):
    epochs: int = 5000
    seed: int = 0
    normalize: bool = True
    log_every: int = 100

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError(f"epochs must be non-negative, got {self.epochs}")
        if self.log_every < 0:
            raise ConfigError(f"log_every must be non-negative, got {self.log_every}")
