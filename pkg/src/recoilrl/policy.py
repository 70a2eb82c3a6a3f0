"""Gaussian actor-critic policy, running normalizers and checkpoint files."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mlp import Mlp

LOG_STD_MIN, LOG_STD_MAX = -5.0, 2.0
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
CHECKPOINT_VERSION = 1


class RunningMeanStd:
    """Streaming mean/variance (parallel-merge form) with frozen mode."""

    def __init__(self, shape, epsilon: float = 1e-4):
        self.mean = np.zeros(shape, dtype=np.float64)
        self.var = np.ones(shape, dtype=np.float64)
        self.count = float(epsilon)

    def update(self, x: np.ndarray) -> None:
        x = np.asarray(x, dtype=np.float64).reshape((-1,) + self.mean.shape)
        b_mean = x.mean(axis=0)
        b_var = x.var(axis=0)
        b_count = x.shape[0]
        delta = b_mean - self.mean
        tot = self.count + b_count
        self.mean = self.mean + delta * b_count / tot
        m2 = self.var * self.count + b_var * b_count + delta**2 * self.count * b_count / tot
        self.var = m2 / tot
        self.count = tot

    def normalize(self, x: np.ndarray, clip: float = 5.0) -> np.ndarray:
        y = (x - self.mean) / np.sqrt(self.var + 1e-5)
        return np.clip(y, -clip, clip)

    def denormalize(self, y: np.ndarray) -> np.ndarray:
        return y * np.sqrt(self.var + 1e-5) + self.mean

    def state_dict(self) -> dict:
        return {"mean": np.atleast_1d(self.mean).tolist(), "var": np.atleast_1d(self.var).tolist(), "count": self.count}

    @classmethod
    def from_state(cls, d: dict, shape) -> "RunningMeanStd":
        out = cls(shape)
        out.mean = np.array(d["mean"], dtype=np.float64).reshape(shape)
        out.var = np.array(d["var"], dtype=np.float64).reshape(shape)
        out.count = float(d["count"])
        return out


@dataclass
class ActorCritic:
    actor: Mlp
    critic: Mlp
    log_std: np.ndarray
    obs_norm: RunningMeanStd | None = None
    value_norm: RunningMeanStd | None = None
    meta: dict = field(default_factory=dict)

    @classmethod
    def init(
        cls,
        obs_dim: int,
        rng: np.random.Generator,
        hidden: tuple[int, ...] = (256, 256, 256),
        act_dim: int = 3,
        init_log_std: float = -1.0,
        dtype=np.float32,
        normalize_obs: bool = True,
        normalize_value: bool = True,
    ) -> "ActorCritic":
        actor = Mlp.init([obs_dim, *hidden, act_dim], rng, dtype=dtype)
        critic = Mlp.init([obs_dim, *hidden, 1], rng, dtype=dtype)
        log_std = np.full(act_dim, init_log_std, dtype=dtype)
        return cls(
            actor,
            critic,
            log_std,
            RunningMeanStd(obs_dim) if normalize_obs else None,
            RunningMeanStd(()) if normalize_value else None,
        )

    @property
    def obs_dim(self) -> int:
        return self.actor.weights[0].shape[0]

    @property
    def dtype(self):
        return self.actor.dtype

    def params(self) -> list[np.ndarray]:
        return self.actor.params() + self.critic.params() + [self.log_std]

    def preprocess(self, obs: np.ndarray) -> np.ndarray:
        if obs.shape[-1] != self.obs_dim:
            raise ValueError(f"observation width mismatch: expected {self.obs_dim}, found {obs.shape[-1]}")
        if self.obs_norm is not None:
            obs = self.obs_norm.normalize(obs)
        return obs.astype(self.dtype)

    def value(self, obs_n: np.ndarray) -> np.ndarray:
        """Critic output in return units for already-preprocessed observations."""
        v = self.critic(obs_n)[:, 0].astype(np.float64)
        if self.value_norm is not None:
            v = self.value_norm.denormalize(v)
        return v

    def act_deterministic(self, obs: np.ndarray) -> np.ndarray:
        mean, _, _ = forward_actor(self, self.preprocess(np.atleast_2d(obs)))
        return mean.astype(np.float64)


def forward_actor(policy: ActorCritic, obs_n: np.ndarray):
    """Squashed action mean, log-std and the cache for backprop."""
    z, cache = policy.actor.forward(obs_n)
    mean = np.tanh(z)
    return mean, policy.log_std, cache


def gaussian_log_prob(x, mean, log_std):
    std = np.exp(log_std)
    return np.sum(-0.5 * ((x - mean) / std) ** 2 - log_std - HALF_LOG_2PI, axis=-1)


def sample_action(mean, log_std, rng: np.random.Generator):
    """Diagonal Gaussian sample.

    Returns ``(action, raw, log_prob)``: ``raw`` is the unclipped sample the
    log-probability refers to and ``action`` is ``raw`` clipped to [-1, 1].
    """
    noise = rng.standard_normal(np.shape(mean)).astype(np.asarray(mean).dtype)
    raw = mean + np.exp(log_std) * noise
    return np.clip(raw, -1.0, 1.0), raw, gaussian_log_prob(raw, mean, log_std)


def _arr(a: np.ndarray) -> dict:
    return {"shape": list(a.shape), "data": a.astype(np.float64).ravel().tolist()}


def _unarr(d: dict, dtype) -> np.ndarray:
    return np.array(d["data"], dtype=np.float64).reshape(d["shape"]).astype(dtype)


def save_checkpoint(policy: ActorCritic, path, config_echo: dict | None = None) -> None:
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "architecture": {
            "obs_dim": policy.obs_dim,
            "actor_sizes": policy.actor.sizes,
            "critic_sizes": policy.critic.sizes,
            "activation": "elu",
            "output_squash": "tanh",
            "dtype": np.dtype(policy.dtype).name,
        },
        "actor": [{"W": _arr(W), "b": _arr(b)} for W, b in zip(policy.actor.weights, policy.actor.biases)],
        "critic": [{"W": _arr(W), "b": _arr(b)} for W, b in zip(policy.critic.weights, policy.critic.biases)],
        "log_std": _arr(policy.log_std),
        "normalization": {
            "obs": policy.obs_norm.state_dict() if policy.obs_norm is not None else None,
            "value": policy.value_norm.state_dict() if policy.value_norm is not None else None,
        },
        "meta": policy.meta,
        "config": config_echo or {},
    }
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path) -> tuple[ActorCritic, dict]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('format_version')!r}")
    arch = doc["architecture"]
    dtype = np.dtype(arch["dtype"])
    actor = Mlp([_unarr(l["W"], dtype) for l in doc["actor"]], [_unarr(l["b"], dtype) for l in doc["actor"]])
    critic = Mlp([_unarr(l["W"], dtype) for l in doc["critic"]], [_unarr(l["b"], dtype) for l in doc["critic"]])
    norm = doc["normalization"]
    policy = ActorCritic(
        actor,
        critic,
        _unarr(doc["log_std"], dtype),
        RunningMeanStd.from_state(norm["obs"], arch["obs_dim"]) if norm["obs"] else None,
        RunningMeanStd.from_state(norm["value"], ()) if norm["value"] else None,
        meta=doc.get("meta", {}),
    )
    return policy, doc.get("config", {})
