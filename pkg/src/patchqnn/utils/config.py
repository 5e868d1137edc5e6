r"""
patchqnn.utils.config
=====================

JSON run configuration.

A run document has the sections ``data``, ``model``, ``train``,
``landscape`` and ``hessian`` plus the top-level ``output_dir``. Every
experimental constant has a default, so the smallest valid document is::

    {
      "data":  {"train": "data/train.h5", "test": "data/test.h5"},
      "model": {"n_qc": 4, "d": 50}
    }

Unknown keys are rejected at every level and all problems are reported
together in one :pyclass:`~patchqnn.utils.exceptions.ConfigError`.

:pyattr:`RunConfig.config_hash` fingerprints the fully defaulted
configuration (without ``output_dir``) and is stamped on every artifact of
a run.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from patchqnn.utils.constants import Constants
from patchqnn.utils.exceptions import ConfigError


@dataclass(frozen=True)
class DataSection:
    train: str = ""
    test: str = ""
    train_subset: Optional[int] = None
    test_subset: Optional[int] = None


@dataclass(frozen=True)
class ModelSection:
    d: int = 0
    n_qc: Optional[int] = None
    stride: Optional[int] = None
    n_qubits: int = Constants.N_QUBITS
    M: int = Constants.IMAGE_SIDE
    P: int = Constants.PATCH_SIDE
    c: float = Constants.SOFTMAX_SCALE
    n_class: int = Constants.N_CLASS
    observables: Tuple[str, ...] = tuple(f"{a}{q}" for a, q in Constants.OBSERVABLES)
    feature_map: str = "strict"
    encoding_cz_per_sequence: bool = False


@dataclass(frozen=True)
class TrainSection:
    epochs: int = Constants.EPOCHS
    batch_size: int = Constants.BATCH_SIZE
    seed: int = 0
    lr: Optional[float] = None
    lr_min: float = Constants.LR_MIN
    restart_period: Optional[int] = None
    train_eval_subset: Optional[int] = None


@dataclass(frozen=True)
class LandscapeSection:
    resolution: int = 20
    margin_frac: float = 0.1
    default_half_width: float = 1.0
    eval_subset: Optional[int] = None
    workers: int = 1


@dataclass(frozen=True)
class HessianSection:
    scope: str = "angles_and_bias"
    tol: float = 1e-3
    max_iter: int = 100
    seed: int = 0
    batch_size: Optional[int] = 10_000
    eps: Optional[float] = None
    max_restarts: int = 3


_SECTIONS = {
    "data": DataSection,
    "model": ModelSection,
    "train": TrainSection,
    "landscape": LandscapeSection,
    "hessian": HessianSection,
}


def _stride_for(n_qc: int, M: int, P: int) -> Optional[int]:
    L = math.isqrt(n_qc)
    if L * L != n_qc or L < 1:
        return None
    if L == 1:
        return 1 if M == P else None
    if (M - P) % (L - 1):
        return None
    return (M - P) // (L - 1)


def _coerce(name: str, value: Any, default: Any, violations: List[str]) -> Any:
    # Light type checks driven by the default value.
    if isinstance(default, str):
        if not isinstance(value, str):
            violations.append(f"{name}: expected a string, got {value!r}")
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            violations.append(f"{name}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            violations.append(f"{name}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            violations.append(f"{name}: expected a number, got {value!r}")
            return value
        return float(value)
    if isinstance(default, tuple):
        if not isinstance(value, list):
            violations.append(f"{name}: expected a list, got {value!r}")
            return value
        return tuple(value)
    return value


@dataclass(frozen=True)
class RunConfig:
    """
    Validated run configuration.

    Build it with :pymeth:`from_dict` or :pymeth:`from_file`; the
    constructor itself performs no validation.
    """
    data: DataSection = field(default_factory=DataSection)
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainSection = field(default_factory=TrainSection)
    landscape: LandscapeSection = field(default_factory=LandscapeSection)
    hessian: HessianSection = field(default_factory=HessianSection)
    output_dir: str = "runs"

    @classmethod
    def from_dict(cls, doc: Dict[str, Any], check_files: bool = True) -> "RunConfig":
        """
        Validate *doc* and fill in defaults.

        Raises
        ------
        ConfigError
            Listing every unknown key, type error, missing field and
            inconsistent value.
        """
        violations: List[str] = []
        if not isinstance(doc, dict):
            raise ConfigError([f"top level: expected an object, got {type(doc).__name__}"])

        for key in doc:
            if key not in _SECTIONS and key != "output_dir":
                violations.append(f"unknown top-level key {key!r}")

        sections = {}
        for name, section_cls in _SECTIONS.items():
            raw = doc.get(name, {})
            if not isinstance(raw, dict):
                violations.append(f"{name}: expected an object")
                raw = {}
            defaults = {f.name: f.default for f in dataclasses.fields(section_cls)}
            values = {}
            for key, value in raw.items():
                if key not in defaults:
                    violations.append(f"unknown key {name}.{key}")
                    continue
                if value is None:
                    values[key] = None
                    continue
                default = defaults[key]
                if default is None:
                    default = 1.0 if key in ("lr", "eps") else 1
                values[key] = _coerce(f"{name}.{key}", value, default, violations)
            sections[name] = section_cls(**values)

        output_dir = doc.get("output_dir", "runs")
        if not isinstance(output_dir, str) or not output_dir:
            violations.append("output_dir: expected a non-empty string")
            output_dir = "runs"

        cfg = cls(output_dir=output_dir, **sections)
        try:
            cfg, more = cfg._resolved(check_files)
            violations += more
        except TypeError:
            # mistyped values, already reported above
            pass
        if violations:
            raise ConfigError(violations)
        return cfg

    @classmethod
    def from_file(cls, filepath: str, check_files: bool = True) -> "RunConfig":
        """Load a JSON document; malformed JSON is reported as a configuration error."""
        if not os.path.exists(filepath):
            raise ConfigError([f"configuration file not found: {filepath}"])
        with open(filepath, "r", encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError([f"{filepath}: invalid JSON ({exc})"]) from exc
        return cls.from_dict(doc, check_files=check_files)

    def _resolved(self, check_files: bool) -> Tuple["RunConfig", List[str]]:
        v: List[str] = []
        d, m, t = self.data, self.model, self.train

        for key in ("train", "test"):
            path = getattr(d, key)
            if not path:
                v.append(f"data.{key} is required")
            elif check_files and not os.path.exists(path):
                v.append(f"data.{key}: file not found: {path}")

        for key in ("train_subset", "test_subset"):
            n = getattr(d, key)
            if n is not None and n < 1:
                v.append(f"data.{key} must be >= 1 (got {n})")

        if m.d < 1:
            v.append(f"model.d must be >= 1 (got {m.d})")
        if m.n_qubits < 1:
            v.append(f"model.n_qubits must be >= 1 (got {m.n_qubits})")
        if m.M < 1 or m.P < 1 or m.P > m.M:
            v.append(f"model.M and model.P must satisfy 1 <= P <= M (got M={m.M}, P={m.P})")

        stride = m.stride
        if m.n_qc is None and stride is None:
            v.append("model.n_qc or model.stride is required")
        elif stride is None and m.n_qc < 1:
            v.append(f"model.n_qc must be >= 1 (got {m.n_qc})")
        elif stride is None:
            stride = _stride_for(m.n_qc, m.M, m.P)
            if stride is None:
                v.append(f"model.n_qc={m.n_qc} is not reachable with M={m.M}, P={m.P}")
        if stride is not None:
            if stride < 1 or (m.M - m.P) % stride:
                v.append(f"model.stride={stride} does not divide M-P={m.M - m.P}")
            else:
                L = (m.M - m.P) // stride + 1
                if m.n_qc is not None and m.n_qc != L * L:
                    v.append(f"model.n_qc={m.n_qc} is inconsistent with stride {stride} (gives {L * L})")

        if len(m.observables) != m.n_class:
            v.append(f"model.observables has {len(m.observables)} entries, n_class={m.n_class}")
        for label in m.observables:
            if not (isinstance(label, str) and len(label) >= 2 and label[0] in "XZ" and label[1:].isdigit()):
                v.append(f"model.observables: cannot parse {label!r} (expected e.g. 'X0')")
            elif int(label[1:]) >= m.n_qubits:
                v.append(f"model.observables: {label} acts outside {m.n_qubits} qubits")
        if m.feature_map not in ("strict", "cyclic"):
            v.append(f"model.feature_map must be 'strict' or 'cyclic' (got {m.feature_map!r})")
        elif m.feature_map == "strict" and 8 * m.n_qubits != m.P * m.P:
            v.append(
                f"model: {8 * m.n_qubits} encoding slots for n_qubits={m.n_qubits} "
                f"but P^2={m.P * m.P} patch features"
            )

        if t.epochs < 1:
            v.append(f"train.epochs must be >= 1 (got {t.epochs})")
        if t.batch_size < 1:
            v.append(f"train.batch_size must be >= 1 (got {t.batch_size})")
        lr = t.lr
        if lr is None:
            if m.d in Constants.LR_BY_DEPTH:
                lr = Constants.get_learning_rate(m.d)
            elif m.d >= 1:
                v.append(f"train.lr is required for d={m.d} (defaults exist for {sorted(Constants.LR_BY_DEPTH)})")
        if lr is not None and not (lr > t.lr_min >= 0):
            v.append(f"train.lr must exceed train.lr_min >= 0 (got lr={lr}, lr_min={t.lr_min})")
        if t.restart_period is not None and t.restart_period < 1:
            v.append(f"train.restart_period must be >= 1 (got {t.restart_period})")

        try:
            self.landscape_config()
        except ValueError as exc:
            v.append(f"landscape: {exc}")
        try:
            self.hessian_config()
        except ValueError as exc:
            v.append(f"hessian: {exc}")

        resolved = dataclasses.replace(
            self,
            model=dataclasses.replace(m, stride=stride,
                                      n_qc=None if stride is None or v else ((m.M - m.P) // stride + 1) ** 2),
            train=dataclasses.replace(t, lr=lr),
        )
        return resolved, v

    def with_overrides(self, **changes) -> "RunConfig":
        """
        Copy with dotted-key overrides (``{"train.seed": 3}``), re-validated.
        """
        doc = self.to_dict()
        for dotted, value in changes.items():
            if value is None:
                continue
            section, key = dotted.split(".") if "." in dotted else (None, dotted)
            if section is None:
                doc[key] = value
            else:
                doc[section][key] = value
        return RunConfig.from_dict(doc, check_files=False)

    def to_dict(self) -> Dict[str, Any]:
        doc = {name: dataclasses.asdict(getattr(self, name)) for name in _SECTIONS}
        doc["model"]["observables"] = list(self.model.observables)
        doc["output_dir"] = self.output_dir
        return doc

    @property
    def config_hash(self) -> str:
        doc = self.to_dict()
        doc.pop("output_dir")
        canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    @property
    def run_name(self) -> str:
        return f"nqc{self.model.n_qc}_d{self.model.d}_s{self.train.seed}"

    # Library objects

    def patch_config(self):
        from patchqnn.system.data import PatchConfig
        return PatchConfig(self.model.M, self.model.P, self.model.stride)

    def model_config(self):
        from patchqnn.algorithms.simulator.base import Observable
        from patchqnn.system.model import build_model_config
        m = self.model
        observables = [Observable(label[0], int(label[1:])) for label in m.observables]
        return build_model_config(
            m.n_qubits, m.d, self.patch_config(), observables,
            n_class=m.n_class, c=m.c, feature_map=m.feature_map,
            encoding_cz_per_sequence=m.encoding_cz_per_sequence,
        )

    def train_config(self, model_cfg=None, show_progress: bool = True):
        from patchqnn.algorithms.optim.schedule import LrSchedule
        from patchqnn.system.trainer import TrainConfig
        t = self.train
        schedule = LrSchedule(t.lr, t.lr_min, t.epochs, t.restart_period)
        return TrainConfig(model_cfg or self.model_config(), t.epochs, t.batch_size, t.seed,
                           schedule, t.train_eval_subset, show_progress)

    def landscape_config(self):
        from patchqnn.algorithms.landscape.grid import LandscapeConfig
        return LandscapeConfig(**dataclasses.asdict(self.landscape))

    def hessian_config(self):
        from patchqnn.algorithms.hessian.power import HessianConfig
        return HessianConfig(**dataclasses.asdict(self.hessian))
