"""Run configuration: a nested YAML key-value tree with strict validation.

Every section maps onto one parameter dataclass.  Omitted keys take the
dataclass defaults (the reference airframe); unknown keys and invalid
values are rejected with the dotted key path, e.g. ``inertial.mass``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from .actuation import RotorParams
from .disturbance import DisturbanceParams
from .environment import EnvConfig
from .ppo import PpoConfig
from .rate_controller import RateCtrlParams
from .rigid_body import InertialParams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EnvSection:
    p_r: tuple[float, float, float] = (0.0, 0.0, 0.0)
    episode_steps: int = 1000
    dt: float = 0.01
    H: int = 0
    alpha: float = 0.5
    k_u: float = 0.01
    c: float = 10.0
    e_m: float = 3.0
    init_pos_range: float = 1.0
    init_att_range: float = 0.2
    init_vel_range: float = 0.5
    max_rate: float = 6.0


@dataclass(frozen=True)
class EvalSettings:
    n_episodes: int = 8
    init_pos_range: float = 0.0
    init_att_range: float = 0.0
    init_vel_range: float = 0.0
    workers: int = 1
    literal_metric: bool = False

    def __post_init__(self):
        if self.n_episodes < 1:
            raise ValueError("n_episodes must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if min(self.init_pos_range, self.init_att_range, self.init_vel_range) < 0:
            raise ValueError("randomization ranges must be non-negative")


SECTIONS = {
    "inertial": InertialParams,
    "rotor": RotorParams,
    "disturbance": DisturbanceParams,
    "rate_ctrl": RateCtrlParams,
    "env": EnvSection,
    "ppo": PpoConfig,
    "eval": EvalSettings,
}


@dataclass(frozen=True)
class RunConfig:
    inertial: InertialParams = field(default_factory=InertialParams)
    rotor: RotorParams = field(default_factory=RotorParams)
    disturbance: DisturbanceParams = field(default_factory=DisturbanceParams)
    rate_ctrl: RateCtrlParams = field(default_factory=RateCtrlParams)
    env: EnvSection = field(default_factory=EnvSection)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    eval: EvalSettings = field(default_factory=EvalSettings)
    output_dir: str = "runs"
    seeds: tuple[int, ...] = (0,)

    def env_config(self, **overrides) -> EnvConfig:
        """Training environment (disturbance and trigger flags set per variant)."""
        kw = dataclasses.asdict(self.env)
        kw["p_r"] = tuple(kw["p_r"])
        kw.update(
            gamma=self.ppo.gamma,
            disturbance=self.disturbance,
            inertial=self.inertial,
            rotor=self.rotor,
            rate_ctrl=self.rate_ctrl,
        )
        kw.update(overrides)
        return EnvConfig(**kw)

    def eval_env_config(self, **overrides) -> EnvConfig:
        e = self.eval
        return self.env_config(
            init_pos_range=e.init_pos_range,
            init_att_range=e.init_att_range,
            init_vel_range=e.init_vel_range,
            **overrides,
        )

    def to_dict(self) -> dict:
        out = {}
        for name in SECTIONS:
            obj = getattr(self, name)
            out[name] = {f.name: _plain(getattr(obj, f.name)) for f in fields(obj) if f.init}
        out["output_dir"] = self.output_dir
        out["seeds"] = list(self.seeds)
        return out

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    return v


def _coerce(path: str, value, default):
    """Check ``value`` against the type of the field default."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        proto = default[0] if default else 0.0
        if len(default) and len(value) != len(default) and path.split(".")[-1] in ("p_r", "kp"):
            raise ConfigError(f"{path}: expected {len(default)} entries, got {len(value)}")
        return tuple(_coerce(f"{path}[{i}]", x, proto) for i, x in enumerate(value))
    return value


def _build_section(name: str, cls, raw) -> object:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected a mapping, got {raw!r}")
    defaults = cls()
    known = {f.name: f for f in fields(cls) if f.init}
    kw = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"{name}.{key}: unknown key")
        kw[key] = _coerce(f"{name}.{key}", value, getattr(defaults, key))
    try:
        return cls(**kw)
    except ValueError as exc:
        # locate the offending key by applying the overrides one at a time
        for key, value in kw.items():
            try:
                cls(**{key: value})
            except ValueError as single:
                raise ConfigError(f"{name}.{key}: {single}") from exc
        raise ConfigError(f"{name}: {exc}") from exc


def config_from_dict(doc: dict | None) -> RunConfig:
    doc = doc or {}
    if not isinstance(doc, dict):
        raise ConfigError("top level: expected a mapping")
    kw = {}
    for key, value in doc.items():
        if key in SECTIONS:
            kw[key] = _build_section(key, SECTIONS[key], value)
        elif key == "output_dir":
            kw[key] = _coerce(key, value, "")
        elif key == "seeds":
            seeds = _coerce(key, value, (0,))
            if not seeds:
                raise ConfigError("seeds: expected at least one seed")
            kw[key] = seeds
        else:
            raise ConfigError(f"{key}: unknown key")
    return RunConfig(**kw)


def load_config(path) -> RunConfig:
    text = Path(path).read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: parse error: {exc}") from exc
    return config_from_dict(doc)


def dump_config(config: RunConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(config.to_dict(), sort_keys=False))


def with_overrides(config: RunConfig, section: str, **kw) -> RunConfig:
    return replace(config, **{section: replace(getattr(config, section), **kw)})
