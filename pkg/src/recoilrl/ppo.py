"""Proximal policy optimization on top of the hand-written MLP.

The trainer collects fixed-horizon rollouts from a batched
:class:`~recoilrl.environment.QuadrotorEnv`, computes GAE advantages and
runs clipped-surrogate updates with Adam and a KL-adaptive learning rate.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .environment import EnvConfig, QuadrotorEnv
from .policy import (
    HALF_LOG_2PI,
    LOG_STD_MAX,
    LOG_STD_MIN,
    ActorCritic,
    forward_actor,
    gaussian_log_prob,
    sample_action,
)

log = logging.getLogger(__name__)

VARIANTS = {
    "nominal": (False, False),
    "i": (True, False),
    "it": (True, True),
}
CURVE_COLUMNS = ["epoch", "mean_return", "mean_episode_len", "policy_loss", "value_loss", "approx_kl", "lr"]
LR_MIN, LR_MAX = 1e-6, 1e-2


class TrainingDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class PpoConfig:
    learning_rate: float = 1e-4
    lr_schedule: str = "adaptive"
    kl_target: float = 0.008
    clip_eps: float = 0.2
    gamma: float = 0.99
    gae_lambda: float = 0.95
    horizon: int = 32
    num_minibatches: int = 4
    mini_epochs: int = 4
    num_envs: int = 1024
    max_epochs: int = 1000
    seed: int = 0
    entropy_coef: float = 0.0
    value_coef: float = 1.0
    max_grad_norm: float = 1.0
    hidden: tuple[int, ...] = (256, 256, 256)
    init_log_std: float = -1.0
    normalize_obs: bool = True
    normalize_value: bool = True
    dtype: str = "float32"

    def __post_init__(self):
        if not 0 < self.clip_eps < 1:
            raise ValueError("clip_eps must lie in (0, 1)")
        if not 0 <= self.gamma <= 1 or not 0 <= self.gae_lambda <= 1:
            raise ValueError("gamma and gae_lambda must lie in [0, 1]")
        if self.num_envs < 1:
            raise ValueError("num_envs must be at least 1")
        if self.lr_schedule not in ("adaptive", "fixed"):
            raise ValueError("lr_schedule must be 'adaptive' or 'fixed'")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")
        if (self.horizon * self.num_envs) % self.num_minibatches:
            raise ValueError("horizon * num_envs must be divisible by num_minibatches")


def variant_env_config(env_config: EnvConfig, variant: str) -> EnvConfig:
    if variant not in VARIANTS:
        raise ValueError(f"unknown policy variant {variant!r}; expected one of {sorted(VARIANTS)}")
    dist, trig = VARIANTS[variant]
    return replace(env_config, enable_disturbance=dist, enable_trigger_obs=trig)


class RolloutBuffer:
    """Fixed-capacity ``(horizon, num_envs)`` storage for one rollout."""

    def __init__(self, horizon: int, num_envs: int, obs_dim: int, act_dim: int = 3, dtype=np.float32):
        self.horizon, self.num_envs = horizon, num_envs
        self.obs = np.zeros((horizon, num_envs, obs_dim), dtype=dtype)
        self.raw_actions = np.zeros((horizon, num_envs, act_dim), dtype=dtype)
        self.means = np.zeros((horizon, num_envs, act_dim), dtype=dtype)
        self.log_probs = np.zeros((horizon, num_envs), dtype=dtype)
        self.rewards = np.zeros((horizon, num_envs))
        self.values = np.zeros((horizon, num_envs))
        self.dones = np.zeros((horizon, num_envs))
        self.log_std = np.zeros(act_dim, dtype=dtype)
        self.advantages: np.ndarray | None = None
        self.returns: np.ndarray | None = None

    @property
    def capacity(self) -> int:
        return self.horizon * self.num_envs

    def flat(self) -> dict[str, np.ndarray]:
        if self.advantages is None:
            raise RuntimeError("advantages must be computed before the buffer is read")
        n = self.capacity
        return {
            "obs": self.obs.reshape(n, -1),
            "raw_actions": self.raw_actions.reshape(n, -1),
            "old_means": self.means.reshape(n, -1),
            "old_log_probs": self.log_probs.reshape(n),
            "advantages": self.advantages.reshape(n),
            "returns": self.returns.reshape(n),
            "values": self.values.reshape(n),
        }


def gae_advantages(rewards, values, dones, last_values, gamma: float, lam: float):
    """GAE over a ``(T, n)`` rollout.

    ``dones[t]`` marks that the episode ended with step ``t``; the recursion
    does not bootstrap across it.  Returns ``(advantages, returns)``.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    T = rewards.shape[0]
    adv = np.zeros_like(rewards)
    last = np.zeros_like(rewards[0])
    next_values = np.asarray(last_values, dtype=np.float64)
    for t in reversed(range(T)):
        nonterminal = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_values * nonterminal - values[t]
        last = delta + gamma * lam * nonterminal * last
        adv[t] = last
        next_values = values[t]
    return adv, adv + values


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    adv = np.asarray(adv, dtype=np.float64)
    return (adv - adv.mean()) / (adv.std() + 1e-8)


def adapt_lr(lr: float, kl: float, kl_target: float) -> float:
    if kl > 2.0 * kl_target:
        lr = lr / 1.5
    elif kl < 0.5 * kl_target:
        lr = lr * 1.5
    return min(max(lr, LR_MIN), LR_MAX)


def gaussian_kl(mean_old, log_std_old, mean_new, log_std_new) -> np.ndarray:
    var_old = np.exp(2.0 * log_std_old)
    var_new = np.exp(2.0 * log_std_new)
    return np.sum(
        log_std_new - log_std_old + (var_old + (mean_old - mean_new) ** 2) / (2.0 * var_new) - 0.5,
        axis=-1,
    )


def ppo_loss_and_grads(
    policy: ActorCritic,
    obs: np.ndarray,
    raw_actions: np.ndarray,
    old_log_probs: np.ndarray,
    advantages: np.ndarray,
    value_targets: np.ndarray,
    clip_eps: float = 0.2,
    entropy_coef: float = 0.0,
    value_coef: float = 1.0,
):
    """Total PPO loss, its gradient (aligned with ``policy.params()``) and stats.

    ``value_targets`` are in the critic's output units (normalized returns
    when value normalization is on).
    """
    B = obs.shape[0]
    mean, log_std, a_cache = forward_actor(policy, obs)
    logp = gaussian_log_prob(raw_actions, mean, log_std)
    ratio = np.exp(logp - old_log_probs)
    surr1 = ratio * advantages
    surr2 = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    use_unclipped = surr1 <= surr2
    policy_loss = -np.mean(np.minimum(surr1, surr2))

    dlogp = np.where(use_unclipped, -surr1 / B, 0.0).astype(mean.dtype)
    inv_var = np.exp(-2.0 * log_std)
    diff = raw_actions - mean
    dmean = dlogp[:, None] * diff * inv_var
    dlog_std = np.sum(dlogp[:, None] * (diff * diff * inv_var - 1.0), axis=0)
    entropy = float(np.sum(log_std + 0.5 + HALF_LOG_2PI))
    dlog_std = dlog_std - entropy_coef
    actor_grads = policy.actor.backward(a_cache, dmean * (1.0 - mean * mean))

    v, c_cache = policy.critic.forward(obs)
    err = v[:, 0] - value_targets
    value_loss = 0.5 * np.mean(err * err)
    critic_grads = policy.critic.backward(c_cache, (value_coef * err / B)[:, None].astype(v.dtype))

    total = float(policy_loss + value_coef * value_loss - entropy_coef * entropy)
    grads = actor_grads + critic_grads + [dlog_std.astype(policy.log_std.dtype)]
    stats = {
        "loss": total,
        "policy_loss": float(policy_loss),
        "value_loss": float(value_loss),
        "entropy": entropy,
        "clip_frac": float(np.mean(np.abs(ratio - 1.0) > clip_eps)),
        "ratio": ratio,
        "means": mean,
    }
    return total, grads, stats


class Adam:
    def __init__(self, params: list[np.ndarray], beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray], lr: float) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= (lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(p.dtype)


def clip_grad_norm(grads: list[np.ndarray], max_norm: float) -> tuple[list[np.ndarray], float]:
    norm = math.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads))
    if norm > max_norm:
        scale = max_norm / (norm + 1e-6)
        grads = [g * np.asarray(scale, dtype=g.dtype) for g in grads]
    return grads, norm


def ppo_update(
    policy: ActorCritic,
    optimizer: Adam,
    buffer: RolloutBuffer,
    config: PpoConfig,
    lr: float,
    rng: np.random.Generator,
    epoch: int = 0,
) -> tuple[float, dict]:
    """Run the mini-epochs over ``buffer``; returns the new learning rate and stats."""
    data = buffer.flat()
    dtype = policy.dtype
    adv = normalize_advantages(data["advantages"]).astype(dtype)
    targets = data["returns"]
    if policy.value_norm is not None:
        policy.value_norm.update(targets)
        targets = (targets - policy.value_norm.mean) / np.sqrt(policy.value_norm.var + 1e-5)
    targets = targets.astype(dtype)
    old_log_std = buffer.log_std

    n = buffer.capacity
    mb = n // config.num_minibatches
    params = policy.params()
    p_losses, v_losses, kls = [], [], []
    for _ in range(config.mini_epochs):
        perm = rng.permutation(n)
        epoch_kls = []
        for k in range(config.num_minibatches):
            idx = perm[k * mb : (k + 1) * mb]
            loss, grads, st = ppo_loss_and_grads(
                policy,
                data["obs"][idx],
                data["raw_actions"][idx],
                data["old_log_probs"][idx],
                adv[idx],
                targets[idx],
                config.clip_eps,
                config.entropy_coef,
                config.value_coef,
            )
            if not math.isfinite(loss) or not all(np.isfinite(g).all() for g in grads):
                raise TrainingDivergedError(f"training diverged at epoch {epoch}")
            kl = float(np.mean(gaussian_kl(data["old_means"][idx], old_log_std, st["means"], policy.log_std)))
            grads, _ = clip_grad_norm(grads, config.max_grad_norm)
            optimizer.step(params, grads, lr)
            np.clip(policy.log_std, LOG_STD_MIN, LOG_STD_MAX, out=policy.log_std)
            p_losses.append(st["policy_loss"])
            v_losses.append(st["value_loss"])
            epoch_kls.append(kl)
        kl = float(np.mean(epoch_kls))
        kls.append(kl)
        if config.lr_schedule == "adaptive":
            lr = adapt_lr(lr, kl, config.kl_target)
        if kl > 1.5 * config.kl_target:
            break
    return lr, {
        "policy_loss": float(np.mean(p_losses)),
        "value_loss": float(np.mean(v_losses)),
        "approx_kl": float(np.mean(kls)),
    }


@dataclass
class TrainResult:
    policy: ActorCritic
    curve: list[dict] = field(default_factory=list)

    @property
    def final_episode_len(self) -> float:
        for row in reversed(self.curve):
            if not math.isnan(row["mean_episode_len"]):
                return row["mean_episode_len"]
        return float("nan")


def spawn_streams(seed: int, num_envs: int):
    """Independent streams for (env instances, policy sampling, minibatching, init)."""
    ss = np.random.SeedSequence(seed)
    env_ss, act_ss, mb_ss, init_ss = ss.spawn(4)
    env_rngs = [np.random.default_rng(s) for s in env_ss.spawn(num_envs)]
    return env_rngs, np.random.default_rng(act_ss), np.random.default_rng(mb_ss), np.random.default_rng(init_ss)


def train(
    env_config: EnvConfig,
    ppo_config: PpoConfig,
    variant: str = "it",
    seed: int | None = None,
    on_epoch: Callable[[dict], None] | None = None,
) -> TrainResult:
    """Train one policy variant; deterministic for a given seed."""
    seed = ppo_config.seed if seed is None else seed
    cfg = variant_env_config(env_config, variant)
    n_envs = ppo_config.num_envs
    env_rngs, act_rng, mb_rng, init_rng = spawn_streams(seed, n_envs)
    env = QuadrotorEnv(cfg, n_envs, rngs=env_rngs)
    dtype = np.dtype(ppo_config.dtype)
    policy = ActorCritic.init(
        cfg.obs_dim,
        init_rng,
        hidden=ppo_config.hidden,
        init_log_std=ppo_config.init_log_std,
        dtype=dtype,
        normalize_obs=ppo_config.normalize_obs,
        normalize_value=ppo_config.normalize_value,
    )
    policy.meta = {
        "variant": variant,
        "H": cfg.H,
        "enable_trigger_obs": cfg.enable_trigger_obs,
        "enable_disturbance": cfg.enable_disturbance,
        "seed": seed,
    }
    optimizer = Adam(policy.params())
    buffer = RolloutBuffer(ppo_config.horizon, n_envs, cfg.obs_dim, dtype=dtype)
    lr = ppo_config.learning_rate
    gamma = ppo_config.gamma

    obs = env.reset()
    ep_return = np.zeros(n_envs)
    ep_len = np.zeros(n_envs, dtype=np.int64)
    finished_returns: deque = deque(maxlen=100)
    finished_lens: deque = deque(maxlen=100)
    result = TrainResult(policy)

    for epoch in range(ppo_config.max_epochs):
        buffer.advantages = buffer.returns = None
        buffer.log_std[:] = policy.log_std
        for t in range(ppo_config.horizon):
            if policy.obs_norm is not None:
                policy.obs_norm.update(obs)
            obs_n = policy.preprocess(obs)
            mean, log_std, _ = forward_actor(policy, obs_n)
            value = policy.value(obs_n)
            action, raw, logp = sample_action(mean, log_std, act_rng)
            res = env.step(action)
            reward = res.reward.copy()
            ep_return += res.reward
            ep_len += 1
            if res.truncated.any():
                # time-limit ends are not failures: bootstrap from the last state
                idx = np.flatnonzero(res.truncated)
                reward[idx] += gamma * policy.value(policy.preprocess(res.observation[idx]))
            buffer.obs[t] = obs_n
            buffer.raw_actions[t] = raw
            buffer.means[t] = mean
            buffer.log_probs[t] = logp
            buffer.rewards[t] = reward
            buffer.values[t] = value
            buffer.dones[t] = res.done
            obs = res.observation
            if res.done.any():
                idx = np.flatnonzero(res.done)
                for i in idx:
                    finished_returns.append(ep_return[i])
                    finished_lens.append(ep_len[i])
                ep_return[idx] = 0.0
                ep_len[idx] = 0
                obs = env.reset(idx)
        last_values = policy.value(policy.preprocess(obs))
        buffer.advantages, buffer.returns = gae_advantages(
            buffer.rewards, buffer.values, buffer.dones, last_values, gamma, ppo_config.gae_lambda
        )
        lr, stats = ppo_update(policy, optimizer, buffer, ppo_config, lr, mb_rng, epoch)
        row = {
            "epoch": epoch,
            "mean_return": float(np.mean(finished_returns)) if finished_returns else float("nan"),
            "mean_episode_len": float(np.mean(finished_lens)) if finished_lens else float("nan"),
            **stats,
            "lr": lr,
        }
        result.curve.append(row)
        if on_epoch is not None:
            on_epoch(row)
        if epoch % 25 == 0 or epoch == ppo_config.max_epochs - 1:
            log.info(
                "epoch %d return %.2f len %.1f kl %.4f lr %.2e",
                epoch, row["mean_return"], row["mean_episode_len"], row["approx_kl"], lr,
            )
    return result
