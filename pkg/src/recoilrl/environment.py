"""Batched quadrotor hover environment with impulse disturbance and trigger.

One :class:`QuadrotorEnv` holds ``num_envs`` independent episodes.  Each
episode owns its own random stream, so stepping a batch is bitwise
identical to stepping its members one by one with the same seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .actuation import RotorParams, rotor_speeds_to_wrench
from .disturbance import (
    DisturbanceEvent,
    DisturbanceParams,
    disturbance_force,
    impulse_active,
    sample_event,
    trigger_value,
)
from .rate_controller import RateCtrlParams, compute_rotor_commands
from .rigid_body import InertialParams, RigidBodyState, integrate_step, matmul

FRAME_WIDTH = 19
ACTION_DIM = 3


class EpisodeFinishedError(RuntimeError):
    pass


@dataclass(frozen=True)
class EnvConfig:
    p_r: tuple[float, float, float] = (0.0, 0.0, 0.0)
    episode_steps: int = 1000
    dt: float = 0.01
    H: int = 0
    alpha: float = 0.5
    k_u: float = 0.01
    c: float = 10.0
    e_m: float = 3.0
    gamma: float = 0.99
    init_pos_range: float = 1.0
    init_att_range: float = 0.2
    init_vel_range: float = 0.5
    max_rate: float = 6.0
    enable_disturbance: bool = True
    enable_trigger_obs: bool = True
    disturbance: DisturbanceParams = field(default_factory=DisturbanceParams)
    inertial: InertialParams = field(default_factory=InertialParams)
    rotor: RotorParams = field(default_factory=RotorParams)
    rate_ctrl: RateCtrlParams = field(default_factory=RateCtrlParams)

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.e_m > 0:
            raise ValueError("e_m must be positive")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.H < 0:
            raise ValueError("H must be non-negative")
        if self.episode_steps <= 0:
            raise ValueError("episode_steps must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        for name in ("init_pos_range", "init_att_range", "init_vel_range"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def obs_dim(self) -> int:
        return FRAME_WIDTH * (self.H + 1)

    @property
    def episode_length(self) -> float:
        return self.episode_steps * self.dt


@dataclass
class StepResult:
    observation: np.ndarray
    reward: np.ndarray
    terminated: np.ndarray
    truncated: np.ndarray
    info: dict

    @property
    def done(self) -> np.ndarray:
        return self.terminated | self.truncated


def compute_reward(e_p, u, config: EnvConfig):
    """Shaped hover reward; ``-c`` once the error leaves the ``e_m`` ball."""
    e_p = np.asarray(e_p, dtype=float)
    u = np.asarray(u, dtype=float)
    r_axis = np.maximum(0.0, 1.0 - config.alpha * np.abs(e_p))
    r_e = (r_axis[..., 0] * r_axis[..., 1] * r_axis[..., 2]) ** 2
    r_u = -np.sum(u * u, axis=-1)
    inside = np.linalg.norm(e_p, axis=-1) < config.e_m
    return np.where(inside, r_e + config.k_u * r_u, -config.c)


def make_frame(e_p, v, R, w, o_t) -> np.ndarray:
    R = np.asarray(R)
    flat_R = R.reshape(R.shape[:-2] + (9,))
    o_t = np.asarray(o_t, dtype=float)[..., None]
    return np.concatenate([e_p, v, flat_R, w, o_t], axis=-1)


def build_observation(history: np.ndarray, frame: np.ndarray) -> np.ndarray:
    """Push ``frame`` into ``history`` (newest last, in place) and flatten.

    ``history`` has shape ``(..., H + 1, FRAME_WIDTH)``.
    """
    history[..., :-1, :] = history[..., 1:, :]
    history[..., -1, :] = frame
    return history.reshape(history.shape[:-2] + (-1,)).copy()


def euler_to_rotation(roll, pitch, yaw) -> np.ndarray:
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    one, zero = np.ones_like(cr), np.zeros_like(cr)
    Rx = np.stack([np.stack([one, zero, zero], -1), np.stack([zero, cr, -sr], -1), np.stack([zero, sr, cr], -1)], -2)
    Ry = np.stack([np.stack([cp, zero, sp], -1), np.stack([zero, one, zero], -1), np.stack([-sp, zero, cp], -1)], -2)
    Rz = np.stack([np.stack([cy, -sy, zero], -1), np.stack([sy, cy, zero], -1), np.stack([zero, zero, one], -1)], -2)
    return matmul(Rz, matmul(Ry, Rx))


class QuadrotorEnv:
    """``num_envs`` independent hover episodes stepped as one batch.

    Actions are normalized to ``[-1, 1]``: the first entry scales the
    thrust delta to ``+-m g``, the other two the commanded roll/pitch rates
    to ``+-max_rate``.  Finished episodes must be ``reset`` before the batch
    can step again.
    """

    def __init__(
        self,
        config: EnvConfig,
        num_envs: int = 1,
        seeds: Sequence[int] | None = None,
        rngs: Sequence[np.random.Generator] | None = None,
    ):
        self.config = config
        self.num_envs = num_envs
        if rngs is None:
            if seeds is None:
                seeds = range(num_envs)
            rngs = [np.random.default_rng(s) for s in seeds]
        if len(rngs) != num_envs:
            raise ValueError("need one random stream per environment")
        self.rngs = list(rngs)
        self.state = RigidBodyState.hover(num_envs)
        self.steps = np.zeros(num_envs, dtype=np.int64)
        self.done = np.ones(num_envs, dtype=bool)
        self.events: list[DisturbanceEvent | None] = [None] * num_envs
        self.history = np.zeros((num_envs, config.H + 1, FRAME_WIDTH))
        self._p_r = np.asarray(config.p_r, dtype=float)
        self._hooks: list[Callable[[dict], None]] = []

    def add_step_hook(self, fn: Callable[[dict], None]) -> None:
        """Register ``fn``; it receives a dict of per-env arrays after every step."""
        self._hooks.append(fn)

    @property
    def obs_dim(self) -> int:
        return self.config.obs_dim

    def time(self) -> np.ndarray:
        return self.steps * self.config.dt

    def _trigger(self, i: int, t: float) -> int:
        ev = self.events[i]
        return 0 if ev is None else trigger_value(ev, t)

    def _observed_trigger(self, trig: np.ndarray) -> np.ndarray:
        if not self.config.enable_trigger_obs:
            return np.zeros_like(trig)
        return trig

    def reset(self, indices=None) -> np.ndarray:
        """Reset the given episodes (all by default); returns every observation."""
        cfg = self.config
        if indices is None:
            indices = range(self.num_envs)
        for i in indices:
            rng = self.rngs[i]
            dp = rng.uniform(-cfg.init_pos_range, cfg.init_pos_range, 3)
            angles = rng.uniform(-cfg.init_att_range, cfg.init_att_range, 3)
            v = rng.uniform(-cfg.init_vel_range, cfg.init_vel_range, 3)
            self.state.p[i] = self._p_r + dp
            self.state.R[i] = euler_to_rotation(*angles)
            self.state.v[i] = v
            self.state.w[i] = 0.0
            self.events[i] = (
                sample_event(cfg.disturbance, cfg.episode_length, rng, cfg.dt)
                if cfg.enable_disturbance
                else None
            )
            self.steps[i] = 0
            self.done[i] = False
            o_t = self._observed_trigger(np.array(self._trigger(i, 0.0)))
            frame = make_frame(self.state.p[i] - self._p_r, v, self.state.R[i], self.state.w[i], o_t)
            self.history[i] = frame
        return self.history.reshape(self.num_envs, -1).copy()

    def observation(self) -> np.ndarray:
        return self.history.reshape(self.num_envs, -1).copy()

    def denormalize(self, u: np.ndarray) -> np.ndarray:
        cfg = self.config
        scale = np.array([cfg.inertial.hover_thrust, cfg.max_rate, cfg.max_rate])
        return u * scale

    def step(self, action) -> StepResult:
        cfg = self.config
        if self.done.any():
            raise EpisodeFinishedError("episode finished")
        u = np.clip(np.asarray(action, dtype=float).reshape(self.num_envs, ACTION_DIM), -1.0, 1.0)
        t_now = self.time()

        omegas, saturated = compute_rotor_commands(
            self.denormalize(u), 0.0, self.state, cfg.inertial, cfg.rotor, cfg.rate_ctrl
        )
        wrench = rotor_speeds_to_wrench(omegas, cfg.rotor)

        f_d = np.zeros((self.num_envs, 3))
        for i, ev in enumerate(self.events):
            if ev is not None and impulse_active(ev, t_now[i]):
                f_d[i] = disturbance_force(ev, t_now[i], self.rngs[i])

        self.state = integrate_step(self.state, wrench.f_a, wrench.tau_a, f_d, cfg.inertial, cfg.dt)
        self.steps += 1
        t_new = self.time()

        trig = np.array([self._trigger(i, t_new[i]) for i in range(self.num_envs)], dtype=float)
        e_p = self.state.p - self._p_r
        reward = compute_reward(e_p, u, cfg)
        terminated = np.linalg.norm(e_p, axis=-1) >= cfg.e_m
        truncated = (self.steps >= cfg.episode_steps) & ~terminated
        self.done = terminated | truncated

        frame = make_frame(e_p, self.state.v, self.state.R, self.state.w, self._observed_trigger(trig))
        obs = build_observation(self.history, frame)
        info = {
            "t": t_new,
            "e_p": e_p,
            "f_d": f_d,
            "o_t": trig,
            "saturated": saturated,
            "action": u,
        }
        if self._hooks:
            row = dict(info, p=self.state.p.copy(), v=self.state.v.copy(), w=self.state.w.copy(), reward=reward)
            for hook in self._hooks:
                hook(row)
        return StepResult(obs, reward, terminated, truncated, info)
