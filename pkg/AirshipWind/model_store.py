"""Model and dataset files.

Model file: JSON Lines. The first line is a header naming the format version,
layer sizes and section order; every following line is one named section with
its shape and row-major values.
"""
import hashlib
import logging
from pathlib import Path
from typing import Dict, List, Union

import msgspec
import numpy as np
import pandas as pd

from .exceptions import DatasetFormatError, ModelFormatError
from .neural import INPUT_COLUMNS, LAYER_SIZES, TARGET_COLUMNS, Dataset, MlpModel, layer_shapes

logger = logging.getLogger(__name__)

MODEL_FORMAT = "airship-wind-mlp"
MODEL_FORMAT_VERSION = 1
DATASET_COLUMNS = INPUT_COLUMNS + TARGET_COLUMNS + ["scenario_id"]

PathLike = Union[str, Path]


class ModelHeader(msgspec.Struct):
    format: str
    format_version: int
    layers: List[int]
    sections: List[str]


class ModelSection(msgspec.Struct):
    name: str
    shape: List[int]
    values: List[float]


def section_names() -> List[str]:
    names = ["in_shift", "in_scale"]
    for k in range(1, len(LAYER_SIZES)):
        names += [f"W{k}", f"b{k}"]
    return names + ["out_shift", "out_scale"]


def _expected_shapes() -> Dict[str, tuple]:
    shapes = {
        "in_shift": (LAYER_SIZES[0],),
        "in_scale": (LAYER_SIZES[0],),
        "out_shift": (LAYER_SIZES[-1],),
        "out_scale": (LAYER_SIZES[-1],),
    }
    for k, (fan_out, fan_in) in enumerate(layer_shapes(), start=1):
        shapes[f"W{k}"] = (fan_out, fan_in)
        shapes[f"b{k}"] = (fan_out,)
    return shapes


def _model_arrays(model: MlpModel) -> Dict[str, np.ndarray]:
    arrays = {
        "in_shift": model.in_shift,
        "in_scale": model.in_scale,
        "out_shift": model.out_shift,
        "out_scale": model.out_scale,
    }
    for k, (w, b) in enumerate(zip(model.weights, model.biases), start=1):
        arrays[f"W{k}"] = w
        arrays[f"b{k}"] = b
    return arrays


def save_model(model: MlpModel, path: PathLike):
    encoder = msgspec.json.Encoder()
    arrays = _model_arrays(model)
    names = section_names()
    header = ModelHeader(MODEL_FORMAT, MODEL_FORMAT_VERSION, list(LAYER_SIZES), names)
    with open(path, "wb") as f:
        f.write(encoder.encode(header) + b"\n")
        for name in names:
            arr = np.asarray(arrays[name], dtype=float)
            section = ModelSection(name, list(arr.shape), arr.ravel().tolist())
            f.write(encoder.encode(section) + b"\n")
    logger.info(f"Saved model to {path}")


def load_model(path: PathLike) -> MlpModel:
    try:
        with open(path, "rb") as f:
            lines = [line for line in f.read().splitlines() if line.strip()]
    except FileNotFoundError:
        raise ModelFormatError(f"Model file not found: {path}")
    if not lines:
        raise ModelFormatError(f"Model file {path} is empty: missing header")

    try:
        header = msgspec.json.decode(lines[0], type=ModelHeader)
    except msgspec.DecodeError as e:
        raise ModelFormatError(f"Model file {path} has an unreadable header: {e}")
    if header.format != MODEL_FORMAT:
        raise ModelFormatError(f"{path} is not a model file (format {header.format!r})")
    if header.format_version != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"Model format version {header.format_version} is not supported (expected {MODEL_FORMAT_VERSION})"
        )
    if header.layers != list(LAYER_SIZES):
        for k, (got, want) in enumerate(zip(header.layers, LAYER_SIZES)):
            if got != want:
                raise ModelFormatError(f"Layer {k} has width {got}, expected {want}")
        raise ModelFormatError(f"Model has {len(header.layers)} layers, expected {len(LAYER_SIZES)}")

    expected = _expected_shapes()
    decoder = msgspec.json.Decoder(ModelSection)
    arrays: Dict[str, np.ndarray] = {}
    for i, name in enumerate(section_names(), start=1):
        if i >= len(lines):
            raise ModelFormatError(f"Model file {path} is truncated: missing section {name}")
        try:
            section = decoder.decode(lines[i])
        except msgspec.DecodeError:
            raise ModelFormatError(f"Model file {path} is truncated or corrupt at section {name}")
        if section.name != name:
            raise ModelFormatError(f"Expected section {name}, found {section.name}")
        shape = tuple(section.shape)
        if shape != expected[name]:
            raise ModelFormatError(f"Section {name} has shape {shape}, expected {expected[name]}")
        values = np.asarray(section.values, dtype=float)
        if values.size != int(np.prod(shape)):
            raise ModelFormatError(f"Section {name} has {values.size} values for shape {shape}")
        arrays[name] = values.reshape(shape)

    n_layers = len(LAYER_SIZES) - 1
    try:
        return MlpModel(
            weights=[arrays[f"W{k}"] for k in range(1, n_layers + 1)],
            biases=[arrays[f"b{k}"] for k in range(1, n_layers + 1)],
            in_shift=arrays["in_shift"],
            in_scale=arrays["in_scale"],
            out_shift=arrays["out_shift"],
            out_scale=arrays["out_scale"],
        )
    except ValueError as e:
        raise ModelFormatError(f"Model file {path} holds an invalid model: {e}")


def file_sha256(path: PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def dataset_frame(dataset: Dataset) -> pd.DataFrame:
    df = pd.DataFrame(dataset.inputs, columns=INPUT_COLUMNS)
    for i, col in enumerate(TARGET_COLUMNS):
        df[col] = dataset.targets[:, i]
    df["scenario_id"] = dataset.scenario_id
    return df


def save_dataset(dataset: Dataset, path: PathLike):
    dataset_frame(dataset).to_csv(path, index=False)
    logger.info(f"Wrote {len(dataset)} dataset rows to {path}")


def load_dataset(path: PathLike) -> Dataset:
    """Read a dataset CSV. Row numbers in errors are file line numbers, header is line 1."""
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError:
        raise DatasetFormatError(f"Dataset file not found: {path}")
    except pd.errors.EmptyDataError:
        raise DatasetFormatError(f"Dataset file {path} is empty", row=1)
    except pd.errors.ParserError as e:
        raise DatasetFormatError(f"Dataset file {path} could not be parsed: {e}")

    columns = list(df.columns)
    if columns != DATASET_COLUMNS:
        missing = [c for c in DATASET_COLUMNS if c not in columns]
        raise DatasetFormatError(f"Unexpected header {columns}; missing {missing}", row=1)

    numeric = df.apply(pd.to_numeric, errors="coerce")
    values = numeric.to_numpy(dtype=float)
    bad = ~np.all(np.isfinite(values), axis=1)
    if bad.any():
        i = int(np.argmax(bad))
        bad_cols = [c for c, ok in zip(DATASET_COLUMNS, np.isfinite(values[i])) if not ok]
        raise DatasetFormatError(f"non-numeric or missing values in {bad_cols}", row=i + 2)
    scenario = values[:, -1]
    if np.any(scenario != np.round(scenario)):
        i = int(np.argmax(scenario != np.round(scenario)))
        raise DatasetFormatError("scenario_id must be an integer", row=i + 2)

    n_in = len(INPUT_COLUMNS)
    n_out = len(TARGET_COLUMNS)
    logger.info(f"Loaded {len(df)} dataset rows from {path}")
    return Dataset(
        inputs=values[:, :n_in],
        targets=values[:, n_in:n_in + n_out],
        scenario_id=scenario.astype(np.int64),
    )
