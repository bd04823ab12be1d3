"""Tests for model and dataset files."""
import msgspec
import numpy as np
import pytest

from AirshipWind.exceptions import DatasetFormatError, ModelFormatError
from AirshipWind.model_store import (
    DATASET_COLUMNS,
    ModelHeader,
    file_sha256,
    load_dataset,
    load_model,
    save_dataset,
    save_model,
    section_names,
)
from AirshipWind.neural import N_INPUTS, Dataset, MlpModel, forward


@pytest.fixture
def model(rng):
    m = MlpModel.initialize(rng)
    m.in_shift = rng.normal(size=N_INPUTS)
    m.in_scale = rng.uniform(0.1, 2.0, size=N_INPUTS)
    m.out_shift = np.array([0.5, -0.5, 1.0])
    m.out_scale = np.array([0.4, 0.4, 10.0])
    return m


@pytest.fixture
def model_path(tmp_path, model):
    path = tmp_path / "wind.mlp.jsonl"
    save_model(model, path)
    return path


def _lines(path):
    return path.read_bytes().splitlines()


def test_section_order():
    assert section_names() == [
        "in_shift", "in_scale",
        "W1", "b1", "W2", "b2", "W3", "b3", "W4", "b4",
        "out_shift", "out_scale",
    ]


def test_model_round_trip(model, model_path, rng):
    loaded = load_model(model_path)
    np.testing.assert_array_equal(loaded.parameters(), model.parameters())
    np.testing.assert_array_equal(loaded.in_scale, model.in_scale)
    np.testing.assert_array_equal(loaded.out_shift, model.out_shift)
    x = rng.normal(size=(10, N_INPUTS))
    np.testing.assert_array_equal(forward(loaded, x), forward(model, x))


def test_header_line(model_path):
    header = msgspec.json.decode(_lines(model_path)[0], type=ModelHeader)
    assert header.format_version == 1
    assert header.layers == [8, 24, 24, 24, 3]
    assert len(_lines(model_path)) == 1 + len(section_names())


def test_truncated_file(model_path):
    lines = _lines(model_path)
    model_path.write_bytes(b"\n".join(lines[:5]) + b"\n")
    with pytest.raises(ModelFormatError, match="missing section b2"):
        load_model(model_path)


def test_cut_mid_section(model_path):
    data = model_path.read_bytes()
    model_path.write_bytes(data[: len(data) // 2])
    with pytest.raises(ModelFormatError):
        load_model(model_path)


def test_wrong_layer_width(model_path):
    lines = _lines(model_path)
    header = msgspec.json.decode(lines[0], type=ModelHeader)
    header.layers = [8, 24, 25, 24, 3]
    lines[0] = msgspec.json.encode(header)
    model_path.write_bytes(b"\n".join(lines) + b"\n")
    with pytest.raises(ModelFormatError, match="Layer 2 has width 25, expected 24"):
        load_model(model_path)


def test_unsupported_version(model_path):
    lines = _lines(model_path)
    header = msgspec.json.decode(lines[0], type=ModelHeader)
    header.format_version = 2
    lines[0] = msgspec.json.encode(header)
    model_path.write_bytes(b"\n".join(lines) + b"\n")
    with pytest.raises(ModelFormatError, match="version 2"):
        load_model(model_path)


def test_missing_and_empty_files(tmp_path):
    with pytest.raises(ModelFormatError):
        load_model(tmp_path / "absent.jsonl")
    empty = tmp_path / "empty.jsonl"
    empty.write_bytes(b"")
    with pytest.raises(ModelFormatError, match="missing header"):
        load_model(empty)


def test_sha256_tracks_content(tmp_path, model, model_path):
    other = tmp_path / "copy.jsonl"
    other.write_bytes(model_path.read_bytes())
    assert file_sha256(model_path) == file_sha256(other)
    model.out_shift = model.out_shift + 1.0
    save_model(model, other)
    assert file_sha256(model_path) != file_sha256(other)


@pytest.fixture
def dataset(rng):
    return Dataset(rng.normal(size=(25, N_INPUTS)), rng.normal(size=(25, 3)), np.repeat(np.arange(5), 5))


def test_dataset_round_trip(tmp_path, dataset):
    path = tmp_path / "dataset.csv"
    save_dataset(dataset, path)
    assert path.read_text().splitlines()[0] == ",".join(DATASET_COLUMNS)
    loaded = load_dataset(path)
    np.testing.assert_allclose(loaded.inputs, dataset.inputs, rtol=1e-15)
    np.testing.assert_allclose(loaded.targets, dataset.targets, rtol=1e-15)
    np.testing.assert_array_equal(loaded.scenario_id, dataset.scenario_id)


def test_dataset_bad_row_is_reported_by_line(tmp_path, dataset):
    path = tmp_path / "dataset.csv"
    save_dataset(dataset, path)
    lines = path.read_text().splitlines()
    fields = lines[3].split(",")
    fields[2] = "abc"
    lines[3] = ",".join(fields)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DatasetFormatError) as info:
        load_dataset(path)
    assert info.value.row == 4
    assert "v_n" in str(info.value)


def test_dataset_wrong_header(tmp_path):
    path = tmp_path / "dataset.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(DatasetFormatError) as info:
        load_dataset(path)
    assert info.value.row == 1


def test_dataset_fractional_scenario_id(tmp_path, dataset):
    path = tmp_path / "dataset.csv"
    save_dataset(dataset, path)
    lines = path.read_text().splitlines()
    lines[1] = lines[1].rsplit(",", 1)[0] + ",0.5"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DatasetFormatError) as info:
        load_dataset(path)
    assert info.value.row == 2
