"""Evaluation protocol: deterministic rollouts, RMSE / control-effort metrics,
three-agent comparison and the history-length x trigger-duration sweep."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .environment import EnvConfig, QuadrotorEnv
from .policy import ActorCritic
from .ppo import PpoConfig, train

log = logging.getLogger(__name__)

AGENTS = ("nominal", "i", "it")


class ArchitectureMismatchError(ValueError):
    pass


@dataclass
class EpisodeMetrics:
    p_x: float
    p_y: float
    p_z: float
    p_norm: float
    sigma_u: float
    n_episodes: int
    failures: int = 0

    def as_dict(self) -> dict:
        return {
            "p_x": self.p_x,
            "p_y": self.p_y,
            "p_z": self.p_z,
            "p_norm": self.p_norm,
            "sigma_u": self.sigma_u,
            "n_episodes": self.n_episodes,
            "failures": self.failures,
        }


@dataclass
class Trace:
    """Per-step record of one evaluation episode (row k is after step k)."""

    t: np.ndarray
    p: np.ndarray
    e_p: np.ndarray
    v: np.ndarray
    w: np.ndarray
    u: np.ndarray
    o_t: np.ndarray
    f_d: np.ndarray
    reward: np.ndarray
    terminated: bool = False
    t_trigger_start: float = math.nan
    t_impulse: float = math.nan

    def __len__(self) -> int:
        return len(self.t)


@dataclass
class EvalResult:
    metrics: EpisodeMetrics
    traces: list[Trace] = field(default_factory=list)


def episode_rmse(e_p: np.ndarray, literal: bool = False) -> np.ndarray:
    """Per-axis position error over one episode.

    The default is the root mean square.  ``literal=True`` evaluates the
    sum-of-roots form ``sum_k sqrt(e_k**2 / M)`` instead.
    """
    e_p = np.asarray(e_p, dtype=float)
    M = e_p.shape[0]
    if M == 0:
        return np.zeros(3)
    if literal:
        return np.sum(np.sqrt(e_p**2 / M), axis=0)
    return np.sqrt(np.mean(e_p**2, axis=0))


def control_effort(u: np.ndarray) -> float:
    return float(np.sum(np.linalg.norm(np.asarray(u, dtype=float), axis=-1)))


def metrics_from_traces(traces: list[Trace], literal: bool = False) -> EpisodeMetrics:
    per_axis = np.array([episode_rmse(tr.e_p, literal) for tr in traces])
    p = per_axis.mean(axis=0)
    sigma_u = float(np.mean([control_effort(tr.u) for tr in traces]))
    return EpisodeMetrics(
        p_x=float(p[0]),
        p_y=float(p[1]),
        p_z=float(p[2]),
        p_norm=float(np.sqrt(p[0] ** 2 + p[1] ** 2 + p[2] ** 2)),
        sigma_u=sigma_u,
        n_episodes=len(traces),
        failures=sum(tr.terminated for tr in traces),
    )


def policy_env_config(policy: ActorCritic, env_config: EnvConfig) -> EnvConfig:
    """Adopt the history length and trigger visibility the policy was trained with."""
    meta = policy.meta or {}
    cfg = env_config
    if "H" in meta:
        cfg = replace(cfg, H=int(meta["H"]))
    if "enable_trigger_obs" in meta:
        cfg = replace(cfg, enable_trigger_obs=bool(meta["enable_trigger_obs"]))
    return cfg


def check_architecture(policy: ActorCritic, cfg: EnvConfig) -> None:
    if policy.obs_dim != cfg.obs_dim:
        raise ArchitectureMismatchError(
            f"checkpoint input width mismatch: expected {cfg.obs_dim} (H={cfg.H}), found {policy.obs_dim}"
        )


def episode_streams(seed: int, n_episodes: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_episodes)]


def rollout_episode(policy: ActorCritic, cfg: EnvConfig, rng: np.random.Generator) -> Trace:
    env = QuadrotorEnv(cfg, 1, rngs=[rng])
    obs = env.reset()
    event = env.events[0]
    rows: dict[str, list] = {k: [] for k in ("t", "p", "e_p", "v", "w", "u", "o_t", "f_d", "reward")}
    terminated = False
    while True:
        u = policy.act_deterministic(obs)
        res = env.step(u)
        info = res.info
        rows["t"].append(info["t"][0])
        rows["p"].append(env.state.p[0].copy())
        rows["e_p"].append(info["e_p"][0])
        rows["v"].append(env.state.v[0].copy())
        rows["w"].append(env.state.w[0].copy())
        rows["u"].append(info["action"][0])
        rows["o_t"].append(info["o_t"][0])
        rows["f_d"].append(info["f_d"][0])
        rows["reward"].append(res.reward[0])
        obs = res.observation
        if res.done[0]:
            terminated = bool(res.terminated[0])
            break
    arrays = {k: np.array(v) for k, v in rows.items()}
    return Trace(
        **arrays,
        terminated=terminated,
        t_trigger_start=event.t_trigger_start if event is not None else math.nan,
        t_impulse=event.t_impulse if event is not None else math.nan,
    )


def run_eval(
    policy: ActorCritic,
    env_config: EnvConfig,
    n_episodes: int = 8,
    seed: int = 0,
    workers: int = 1,
    literal_metric: bool = False,
    match_policy: bool = True,
) -> EvalResult:
    """Evaluate the policy mean over ``n_episodes`` seeded episodes.

    Episode ``k`` draws its initial state and disturbance from the ``k``-th
    child of ``seed``, so any agent evaluated with the same seed faces the
    same conditions.  With ``workers > 1`` episodes run on a thread pool;
    the reduction order is fixed, so metrics do not depend on ``workers``.
    """
    cfg = policy_env_config(policy, env_config) if match_policy else env_config
    check_architecture(policy, cfg)
    rngs = episode_streams(seed, n_episodes)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(lambda r: rollout_episode(policy, cfg, r), rngs))
    else:
        traces = [rollout_episode(policy, cfg, r) for r in rngs]
    return EvalResult(metrics_from_traces(traces, literal_metric), traces)


def compare_policies(
    policies: dict[str, ActorCritic],
    env_config: EnvConfig,
    seed: int = 0,
    n_episodes: int = 8,
    workers: int = 1,
    literal_metric: bool = False,
) -> dict[str, EvalResult]:
    """Evaluate every agent under one shared disturbance schedule.

    The disturbance and trigger are always generated; agents trained
    without the trigger simply do not see it.
    """
    cfg = replace(env_config, enable_disturbance=True)
    out = {}
    for name, policy in policies.items():
        out[name] = run_eval(policy, cfg, n_episodes, seed, workers, literal_metric)
    return out


@dataclass
class SweepCell:
    H: int
    T_t: float
    stable: bool
    p_norm: float
    sigma_u: float
    final_episode_len: float
    error: str = ""

    def as_dict(self) -> dict:
        return {
            "H": self.H,
            "T_t": self.T_t,
            "stable": self.stable,
            "p_norm": self.p_norm,
            "sigma_u": self.sigma_u,
            "final_episode_len": self.final_episode_len,
            "error": self.error,
        }


def sweep_h_tt(
    h_values,
    tt_values,
    env_config: EnvConfig,
    ppo_config: PpoConfig,
    eval_config: EnvConfig | None = None,
    seed: int = 0,
    n_episodes: int = 8,
) -> list[SweepCell]:
    """Train and evaluate an IT agent for every (H, T_t) pair.

    A cell is unstable when the mean training episode length at the end of
    training is below half the step budget; failures inside a cell are
    recorded on the cell rather than raised.
    """
    h_values, tt_values = list(h_values), list(tt_values)
    if not h_values or not tt_values:
        raise ValueError("sweep grids must be non-empty")
    eval_config = env_config if eval_config is None else eval_config
    cells = []
    for H in h_values:
        for T_t in tt_values:
            dist = replace(env_config.disturbance, T_t=float(T_t))
            tcfg = replace(env_config, H=int(H), disturbance=dist)
            ecfg = replace(eval_config, H=int(H), disturbance=replace(eval_config.disturbance, T_t=float(T_t)))
            try:
                result = train(tcfg, ppo_config, "it", seed)
                ep_len = result.final_episode_len
                stable = bool(ep_len >= 0.5 * tcfg.episode_steps)
                m = run_eval(result.policy, replace(ecfg, enable_disturbance=True), n_episodes, seed).metrics
                cells.append(SweepCell(int(H), float(T_t), stable, m.p_norm, m.sigma_u, ep_len))
            except Exception as exc:  # noqa: BLE001 - recorded per cell
                log.warning("sweep cell H=%s T_t=%s failed: %s", H, T_t, exc)
                cells.append(SweepCell(int(H), float(T_t), False, math.nan, math.nan, math.nan, str(exc)))
    return cells
