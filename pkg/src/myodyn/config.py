"""Model and training configuration loading.

Configs are YAML documents with units spelled out in the key names
(f_max_n, l_opt_m, ...). Two models ship with the package: knee5.cfg (five
knee flexors) and elbow5.cfg (elbow flexor/extensor set); both load by name
or by path. Unknown keys are rejected so typos fail loudly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError
from .mechanics import JointModel, MuscleParams, MusclePath, musculotendon_length

_MUSCLE_KEYS = {"name", "f_max_n", "l_opt_m", "phi_opt_rad", "l_slack_m",
                "v_max_lopt_per_s", "path_coeffs_m"}
_JOINT_KEYS = {"inertia_kg_m2", "mass_kg", "com_dist_m", "gravity_sign",
               "damping_nms_per_rad"}
_MODEL_KEYS = {"name", "joint", "q_range_rad", "muscles"}


@dataclass(frozen=True)
class ModelConfig:
    name: str
    joint: JointModel
    muscles: tuple

    @property
    def muscle_names(self):
        return [m.name for m in self.muscles]

    @property
    def f_max(self) -> np.ndarray:
        return np.array([m.f_max for m in self.muscles])


def bundled_model_path(protocol: str) -> Path:
    path = resources.files("myodyn.configs") / f"{protocol}5.cfg"
    if not path.is_file():
        raise ConfigError(f"no bundled model for protocol '{protocol}'")
    return Path(str(path))


def load_model_config(source) -> ModelConfig:
    """Load a model config from a path, or by bundled protocol name."""
    path = Path(source)
    if not path.is_file():
        path = bundled_model_path(str(source))
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    _reject_unknown(doc, _MODEL_KEYS, str(path))
    try:
        q_lo, q_hi = (float(v) for v in doc["q_range_rad"])
        jraw = dict(doc["joint"])
        _reject_unknown(jraw, _JOINT_KEYS, f"{path}:joint")
        joint = JointModel(inertia=float(jraw["inertia_kg_m2"]),
                           mass=float(jraw["mass_kg"]),
                           com_dist=float(jraw["com_dist_m"]),
                           gravity_sign=float(jraw["gravity_sign"]),
                           damping=float(jraw.get("damping_nms_per_rad", 0.0)))
        muscles = []
        for mraw in doc["muscles"]:
            _reject_unknown(mraw, _MUSCLE_KEYS, f"{path}:{mraw.get('name', '?')}")
            muscles.append(MuscleParams(
                name=str(mraw["name"]),
                f_max=float(mraw["f_max_n"]),
                l_opt=float(mraw["l_opt_m"]),
                phi_opt=float(mraw["phi_opt_rad"]),
                l_slack=float(mraw["l_slack_m"]),
                v_max=float(mraw["v_max_lopt_per_s"]),
                path=MusclePath(coeffs=tuple(float(c) for c in mraw["path_coeffs_m"]),
                                q_min=q_lo, q_max=q_hi)))
    except KeyError as exc:
        raise ConfigError(f"{path}: missing key {exc}") from None
    if not muscles:
        raise ConfigError(f"{path}: no muscles defined")
    _check_paths(muscles, path)
    return ModelConfig(name=str(doc.get("name", path.stem)), joint=joint,
                       muscles=tuple(muscles))


def _reject_unknown(raw: dict, allowed: set, where: str):
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def _check_paths(muscles, path):
    # the rigid-tendon geometry must stay resolvable over the whole range
    for m in muscles:
        grid = np.linspace(m.path.q_min, m.path.q_max, 201)
        l_mt = musculotendon_length(m.path, grid)
        if np.any(l_mt <= m.l_slack):
            q_bad = grid[np.argmin(l_mt - m.l_slack)]
            raise ConfigError(
                f"{path}: muscle {m.name} path length does not exceed tendon slack "
                f"length near q={q_bad:.3f}")


@dataclass
class TrainConfig:
    """Hyperparameters of one training run."""

    lr: float = 5e-4
    batch_size: int = 64
    max_iters: int = 2000
    omega: float = 100.0
    beta: int = 2
    window: int = 25
    stride: int = 2
    split: float = 0.8
    seed: int = 0
    loss_mode: str = "knowledge"     # knowledge | supervised
    enabled_losses: str = "mfpb"     # subset of m, f, p, b
    eval_every: int = 100
    hidden_size: int = 64
    fc_size: int = 128
    dropout: float = 0.3

    def __post_init__(self):
        if not 0.0 < self.split < 1.0:
            raise ConfigError(f"split must be in (0, 1), got {self.split}")
        if self.window < 2:
            raise ConfigError(f"window must be >= 2, got {self.window}")
        if self.stride < 1:
            raise ConfigError(f"stride must be >= 1, got {self.stride}")
        if self.omega < 0:
            raise ConfigError(f"omega must be nonnegative, got {self.omega}")
        if self.beta < 1:
            raise ConfigError(f"beta must be a positive integer, got {self.beta}")
        if self.loss_mode not in ("knowledge", "supervised"):
            raise ConfigError(f"unknown loss_mode '{self.loss_mode}'")
        if set(self.enabled_losses) - set("mfpb"):
            raise ConfigError(f"enabled_losses must be a subset of 'mfpb', "
                              f"got '{self.enabled_losses}'")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")


def load_train_config(path) -> TrainConfig:
    with open(path) as fh:
        doc = yaml.safe_load(fh) or {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a mapping")
    allowed = {f.name for f in fields(TrainConfig)}
    _reject_unknown(doc, allowed, str(path))
    return TrainConfig(**doc)


def config_digest(*objs) -> str:
    """Stable hash over config content, for checkpoint provenance."""
    def canon(o):
        if isinstance(o, (ModelConfig, TrainConfig)):
            return canon(o.__dict__)
        if isinstance(o, (JointModel, MuscleParams, MusclePath)):
            return canon(o.__dict__)
        if isinstance(o, dict):
            return {k: canon(v) for k, v in sorted(o.items())}
        if isinstance(o, (list, tuple)):
            return [canon(v) for v in o]
        if isinstance(o, np.ndarray):
            return o.tolist()
        return o
    blob = json.dumps([canon(o) for o in objs], sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
