"""Impulse recoil force schedule and the binary warning trigger."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

JITTER_BOUND = 0.05
# boundary slack for half-open windows evaluated on a float time grid
_EPS = 1e-9


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class DisturbanceParams:
    f_x_min: float = -1050.0
    f_x_max: float = -950.0
    T_t: float = 0.5
    impulse_duration: float = 0.01
    noise_std: float = 25.0
    earliest_trigger: float = 1.0
    recovery_time: float = 3.0

    def __post_init__(self):
        if self.f_x_min > self.f_x_max:
            raise ValueError("f_x_min must not exceed f_x_max")
        if not self.T_t > 0:
            raise ValueError("T_t must be positive")
        if not self.impulse_duration > 0:
            raise ValueError("impulse_duration must be positive")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")


@dataclass(frozen=True)
class DisturbanceEvent:
    t_trigger_start: float
    T_t: float
    delta: float
    f_peak: np.ndarray
    impulse_duration: float
    noise_std: float = 0.0

    @property
    def t_impulse(self) -> float:
        return self.t_trigger_start + self.T_t - self.delta

    @classmethod
    def make(
        cls,
        t_trigger_start: float,
        T_t: float,
        delta: float,
        f_x: float,
        impulse_duration: float = 0.01,
        noise_std: float = 0.0,
    ) -> "DisturbanceEvent":
        if abs(delta) > JITTER_BOUND:
            raise ValueError("|delta| must not exceed 0.05 s")
        return cls(
            t_trigger_start, T_t, delta, np.array([f_x, 0.0, 0.0]), impulse_duration, noise_std
        )


def sample_event(
    params: DisturbanceParams, episode_length: float, rng: np.random.Generator, dt: float = 0.01
) -> DisturbanceEvent:
    """Draw one event; the trigger start lies on the ``dt`` grid.

    The start window is ``[earliest_trigger, episode_length - recovery_time
    - latest impulse end]`` so at least ``recovery_time`` seconds remain
    after the impulse.
    """
    latest_end = params.T_t + JITTER_BOUND + params.impulse_duration
    hi = episode_length - params.recovery_time - latest_end
    k_lo = int(np.ceil(params.earliest_trigger / dt - _EPS))
    k_hi = int(np.floor(hi / dt + _EPS))
    if k_hi < k_lo:
        raise ScheduleError("schedule infeasible")
    k0 = int(rng.integers(k_lo, k_hi + 1))
    delta = float(rng.uniform(-JITTER_BOUND, JITTER_BOUND))
    f_x = float(rng.uniform(params.f_x_min, params.f_x_max))
    return DisturbanceEvent(
        t_trigger_start=k0 * dt,
        T_t=params.T_t,
        delta=delta,
        f_peak=np.array([f_x, 0.0, 0.0]),
        impulse_duration=params.impulse_duration,
        noise_std=params.noise_std,
    )


def _in_window(t: float, start: float, length: float) -> bool:
    return start - _EPS <= t < start + length - _EPS


def trigger_value(event: DisturbanceEvent, t: float) -> int:
    return int(_in_window(t, event.t_trigger_start, event.T_t))


def impulse_active(event: DisturbanceEvent, t: float) -> bool:
    return _in_window(t, event.t_impulse, event.impulse_duration)


def disturbance_force(
    event: DisturbanceEvent, t: float, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Body-frame force at time ``t``; Gaussian noise is added on x only."""
    if not impulse_active(event, t):
        return np.zeros(3)
    f = np.array(event.f_peak, dtype=float)
    if event.noise_std > 0:
        if rng is None:
            raise ValueError("a random stream is required when noise_std > 0")
        f[0] += event.noise_std * rng.standard_normal()
    return f
