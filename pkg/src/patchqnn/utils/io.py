from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Tuple

import h5py
import numpy as np

from patchqnn.utils.exceptions import DataFormatError

if TYPE_CHECKING:
    from patchqnn.system.data import PreparedDataset
    from patchqnn.system.model import ModelParams

FORMAT_VERSION = "1.0"


def _ensure_dir(path: str) -> None:
    os.makedirs(path, exist_ok=True)


def _ensure_parent(filepath: str) -> None:
    _ensure_dir(os.path.dirname(os.path.abspath(filepath)))


def _write_dataset(group: h5py.Group, name: str, data: Optional[np.ndarray], *, compression: str = "gzip", level: int = 4) -> None:
    if data is None:
        return
    group.create_dataset(name, data=np.asarray(data), compression=compression, compression_opts=level)


def _check_class(f: h5py.File, expected: str, filepath: str) -> None:
    cls_name = f.attrs.get("class", "<unknown>")
    if cls_name != expected:
        raise DataFormatError(f"holds a {cls_name!r} record, expected {expected!r}", path=filepath)


def file_sha256(*paths: str) -> str:
    """SHA-256 over the concatenated bytes of *paths*."""
    h = hashlib.sha256()
    for path in paths:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
    return h.hexdigest()


def arrays_sha256(*arrays: np.ndarray) -> str:
    """SHA-256 over dtype, shape and C-ordered bytes of each array."""
    h = hashlib.sha256()
    for arr in arrays:
        arr = np.ascontiguousarray(arr)
        h.update(str(arr.dtype).encode())
        h.update(str(arr.shape).encode())
        h.update(arr.tobytes())
    return h.hexdigest()


def _save_prepared(dataset: "PreparedDataset", filepath: str, source_checksum: str, *, compression: str = "gzip", level: int = 4) -> str:
    checksum = arrays_sha256(dataset.images, dataset.labels)
    _ensure_parent(filepath)
    with h5py.File(filepath, "w") as f:
        f.attrs["class"] = "PreparedDataset"
        f.attrs["format_version"] = FORMAT_VERSION
        f.attrs["source_checksum"] = source_checksum
        f.attrs["checksum"] = checksum
        _write_dataset(f, "images", dataset.images, compression=compression, level=level)
        _write_dataset(f, "labels", dataset.labels.astype(np.uint8), compression=compression, level=level)
    return checksum


def _read_prepared_attrs(filepath: str) -> dict:
    with h5py.File(filepath, "r") as f:
        _check_class(f, "PreparedDataset", filepath)
        return {k: f.attrs[k] for k in ("source_checksum", "checksum", "format_version")}


def _load_prepared(filepath: str) -> Tuple["PreparedDataset", dict]:
    from patchqnn.system.data import PreparedDataset

    if not os.path.exists(filepath):
        raise FileNotFoundError(f"Prepared dataset not found: {filepath}")
    with h5py.File(filepath, "r") as f:
        _check_class(f, "PreparedDataset", filepath)
        images = f["images"][()]
        labels = f["labels"][()]
        attrs = {k: f.attrs[k] for k in ("source_checksum", "checksum", "format_version")}
    if arrays_sha256(images, labels.astype(np.int64)) != attrs["checksum"]:
        raise DataFormatError("Checksum mismatch; the file is corrupted", path=filepath)
    return PreparedDataset(images, labels), attrs


def _save_checkpoint(params: "ModelParams", filepath: str, meta: dict, *, compression: str = "gzip", level: int = 4) -> None:
    _ensure_parent(filepath)
    with h5py.File(filepath, "w") as f:
        f.attrs["class"] = "ModelParams"
        f.attrs["format_version"] = FORMAT_VERSION
        for key, value in meta.items():
            f.attrs[key] = value
        _write_dataset(f, "phis", params.phis, compression=compression, level=level)
        _write_dataset(f, "bias", params.bias, compression=compression, level=level)


def _load_checkpoint(filepath: str) -> Tuple["ModelParams", dict]:
    from patchqnn.system.model import ModelParams

    if not os.path.exists(filepath):
        raise FileNotFoundError(f"Checkpoint not found: {filepath}")
    with h5py.File(filepath, "r") as f:
        _check_class(f, "ModelParams", filepath)
        params = ModelParams(f["phis"][()], f["bias"][()])
        meta = {k: _plain(v) for k, v in f.attrs.items()}
    return params, meta


def _save_trajectory(Q: np.ndarray, filepath: str, config_hash: str, *, compression: str = "gzip", level: int = 4) -> None:
    _ensure_parent(filepath)
    with h5py.File(filepath, "w") as f:
        f.attrs["class"] = "Trajectory"
        f.attrs["format_version"] = FORMAT_VERSION
        f.attrs["config_hash"] = config_hash
        _write_dataset(f, "q", Q, compression=compression, level=level)


def _load_trajectory(filepath: str) -> Tuple[np.ndarray, dict]:
    if not os.path.exists(filepath):
        raise FileNotFoundError(f"Trajectory file not found: {filepath}")
    with h5py.File(filepath, "r") as f:
        _check_class(f, "Trajectory", filepath)
        Q = f["q"][()]
        meta = {k: _plain(v) for k, v in f.attrs.items()}
    return Q, meta


def _plain(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, bytes):
        return value.decode()
    return value


def _write_json(obj: dict, filepath: str) -> None:
    _ensure_parent(filepath)
    with open(filepath, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_json(filepath: str) -> dict:
    if not os.path.exists(filepath):
        raise FileNotFoundError(f"JSON file not found: {filepath}")
    with open(filepath, "r", encoding="utf-8") as fh:
        return json.load(fh)


@dataclass(frozen=True)
class RunPaths:
    """File layout of one run directory."""
    root: str

    @property
    def config(self) -> str:
        return os.path.join(self.root, "config.json")

    @property
    def metrics(self) -> str:
        return os.path.join(self.root, "metrics.csv")

    @property
    def trajectory(self) -> str:
        return os.path.join(self.root, "trajectory.h5")

    @property
    def summary(self) -> str:
        return os.path.join(self.root, "summary.json")

    @property
    def landscape_csv(self) -> str:
        return os.path.join(self.root, "landscape.csv")

    @property
    def landscape_json(self) -> str:
        return os.path.join(self.root, "landscape.json")

    @property
    def hessian_json(self) -> str:
        return os.path.join(self.root, "hessian.json")

    @property
    def logs(self) -> str:
        return os.path.join(self.root, "logs")

    def checkpoint(self, tag: str) -> str:
        if tag not in ("init", "min_loss", "final"):
            raise ValueError(f"Unknown checkpoint tag {tag!r}")
        return os.path.join(self.root, "checkpoints", f"{tag}.h5")
