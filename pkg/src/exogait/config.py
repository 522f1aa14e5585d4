"""Run configuration: model hyperparameters, exoskeleton fit and gait defaults.

Serialized as JSON with a version field.  The defaults reproduce the
configuration used throughout the experiments: 10 mixture components with
kernel decay 3, mean regularizer 20 and covariance regularizer 1 for the
swing-foot model; 5 components with decay 1, regularizers 30 and 2 for the
support leg; reference databases of 10 points from 6 demonstrated steps.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import FormatError
from .kinematics import ExoModel

__all__ = ["ModelHyper", "GaitDefaults", "RunConfig", "load_config", "save_config"]

CONFIG_VERSION = 1


@dataclass(frozen=True)
class ModelHyper:
    """Hyperparameters of one trajectory model."""

    n_components: int
    kernel_decay: float
    mean_reg: float
    cov_reg: float

    def __post_init__(self):
        if self.n_components < 1:
            raise ValueError("n_components must be >= 1")
        if min(self.kernel_decay, self.mean_reg, self.cov_reg) <= 0:
            raise ValueError("hyperparameters must be positive")


@dataclass(frozen=True)
class GaitDefaults:
    mean_step_length: float = 0.5
    step_duration: float = 2.0
    n_out: int = 100
    default_step_height: float = 0.10
    clearance: float = 0.05  # extra lift above terrain rises
    reference_points: int = 10


@dataclass(frozen=True)
class RunConfig:
    exo: ExoModel = field(default_factory=ExoModel)
    foot: ModelHyper = field(default_factory=lambda: ModelHyper(10, 3.0, 20.0, 1.0))
    supp: ModelHyper = field(default_factory=lambda: ModelHyper(5, 1.0, 30.0, 2.0))
    gait: GaitDefaults = field(default_factory=GaitDefaults)
    camera_to_com: tuple[float, float, float] = (0.0, 0.0, 0.0)
    seed: int = 0


def _to_dict(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: _to_dict(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, tuple):
        return list(obj)
    return obj


def save_config(path, config: RunConfig) -> None:
    payload = {"version": CONFIG_VERSION, **_to_dict(config)}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_config(path) -> RunConfig:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    if payload.get("version") != CONFIG_VERSION:
        raise FormatError(f"{path}: unsupported config version {payload.get('version')!r}")
    try:
        exo_raw = dict(payload.get("exo", {}))
        for key in ("hip_range", "knee_range"):
            if key in exo_raw:
                exo_raw[key] = tuple(exo_raw[key])
        return RunConfig(
            exo=ExoModel(**exo_raw),
            foot=ModelHyper(**payload.get("foot", _to_dict(RunConfig().foot))),
            supp=ModelHyper(**payload.get("supp", _to_dict(RunConfig().supp))),
            gait=GaitDefaults(**payload.get("gait", {})),
            camera_to_com=tuple(payload.get("camera_to_com", (0.0, 0.0, 0.0))),
            seed=int(payload.get("seed", 0)),
        )
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{path}: bad config field: {exc}") from exc
