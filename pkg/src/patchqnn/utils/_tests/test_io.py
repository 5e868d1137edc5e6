import os

import h5py
import numpy as np
import pytest

from patchqnn.system.data import PreparedDataset
from patchqnn.system.model import ModelParams
from patchqnn.utils.exceptions import DataFormatError
from patchqnn.utils.io import (RunPaths, _load_checkpoint, _load_prepared,
                               _load_trajectory, _read_json,
                               _read_prepared_attrs, _save_checkpoint,
                               _save_prepared, _save_trajectory, _write_json,
                               arrays_sha256, file_sha256)


@pytest.fixture
def dataset():
    rng = np.random.default_rng(0)
    return PreparedDataset(rng.uniform(0, np.pi / 4, (5, 3, 3)), np.array([0, 3, 9, 1, 1]))


def test_prepared_dataset_file(tmp_path, dataset):
    path = str(tmp_path / "sub" / "train.h5")
    checksum = _save_prepared(dataset, path, "abc")
    loaded, attrs = _load_prepared(path)
    np.testing.assert_array_equal(loaded.images, dataset.images)
    np.testing.assert_array_equal(loaded.labels, dataset.labels)
    assert attrs["checksum"] == checksum
    assert attrs["source_checksum"] == "abc"
    assert _read_prepared_attrs(path)["checksum"] == checksum


def test_corrupted_dataset_is_rejected(tmp_path, dataset):
    path = str(tmp_path / "train.h5")
    _save_prepared(dataset, path, "abc")
    with h5py.File(path, "r+") as f:
        f["images"][0, 0, 0] = 0.5
    with pytest.raises(DataFormatError, match="Checksum mismatch"):
        _load_prepared(path)


def test_wrong_record_class(tmp_path):
    path = str(tmp_path / "traj.h5")
    _save_trajectory(np.zeros((3, 2)), path, "h")
    with pytest.raises(DataFormatError, match="expected 'PreparedDataset'"):
        _load_prepared(path)
    with pytest.raises(FileNotFoundError):
        _load_prepared(str(tmp_path / "missing.h5"))


def test_checkpoint_and_trajectory(tmp_path):
    params = ModelParams(np.arange(6.0).reshape(2, 3), np.eye(2))
    path = str(tmp_path / "checkpoints" / "final.h5")
    _save_checkpoint(params, path, {"epoch": 4, "config_hash": "h"})
    loaded, meta = _load_checkpoint(path)
    np.testing.assert_array_equal(loaded.phis, params.phis)
    np.testing.assert_array_equal(loaded.bias, params.bias)
    assert meta["epoch"] == 4 and isinstance(meta["epoch"], int)
    assert meta["config_hash"] == "h"

    Q = np.random.default_rng(1).normal(size=(4, 6))
    _save_trajectory(Q, str(tmp_path / "trajectory.h5"), "h")
    loaded_q, meta = _load_trajectory(str(tmp_path / "trajectory.h5"))
    np.testing.assert_array_equal(loaded_q, Q)
    assert meta["config_hash"] == "h"


def test_checksums(tmp_path):
    a = tmp_path / "a.bin"
    b = tmp_path / "b.bin"
    a.write_bytes(b"12")
    b.write_bytes(b"34")
    whole = tmp_path / "ab.bin"
    whole.write_bytes(b"1234")
    assert file_sha256(str(a), str(b)) == file_sha256(str(whole))
    x = np.arange(4)
    assert arrays_sha256(x) != arrays_sha256(x.astype(np.float64))
    assert arrays_sha256(x) != arrays_sha256(x.reshape(2, 2))


def test_json_and_run_paths(tmp_path):
    path = str(tmp_path / "deep" / "summary.json")
    _write_json({"b": 1, "a": [1, 2]}, path)
    assert _read_json(path) == {"a": [1, 2], "b": 1}
    paths = RunPaths(str(tmp_path))
    assert paths.checkpoint("min_loss").endswith(os.path.join("checkpoints", "min_loss.h5"))
    assert os.path.basename(paths.metrics) == "metrics.csv"
    with pytest.raises(ValueError):
        paths.checkpoint("best")
