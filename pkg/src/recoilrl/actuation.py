"""Rotor allocation: rotor speeds <-> collective thrust and body torques."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class RotorSpeedError(ValueError):
    pass


@dataclass(frozen=True)
class RotorParams:
    c_f: float = 2.5e-5
    c_t: float = 50.0
    arm_length: float = 0.28
    omega_max: float = 800.0
    _A: np.ndarray = field(init=False, repr=False, compare=False)
    _A_inv: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.c_f > 0:
            raise ValueError("c_f must be positive")
        if not self.arm_length > 0:
            raise ValueError("arm_length must be positive")
        if not self.omega_max > 0:
            raise ValueError("omega_max must be positive")
        A = allocation_matrix(self.arm_length, self.c_t)
        object.__setattr__(self, "_A", A)
        object.__setattr__(self, "_A_inv", np.linalg.inv(A))

    @property
    def d45(self) -> float:
        return self.arm_length * math.cos(math.radians(45.0))

    @property
    def A(self) -> np.ndarray:
        return self._A

    @property
    def A_inv(self) -> np.ndarray:
        return self._A_inv

    @property
    def max_rotor_thrust(self) -> float:
        return self.c_f * self.omega_max**2


@dataclass
class Wrench:
    f_a: np.ndarray
    tau_a: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([np.asarray(self.f_a)[..., None], self.tau_a], axis=-1)

    @classmethod
    def from_vector(cls, w) -> "Wrench":
        w = np.asarray(w, dtype=float)
        return cls(w[..., 0].copy(), w[..., 1:4].copy())


def allocation_matrix(arm_length: float, c_t: float) -> np.ndarray:
    d = arm_length * math.cos(math.radians(45.0))
    return np.array(
        [
            [1.0, 1.0, 1.0, 1.0],
            [d, d, -d, -d],
            [-d, d, d, -d],
            [c_t, -c_t, c_t, -c_t],
        ]
    )


def _apply(M: np.ndarray, x: np.ndarray) -> np.ndarray:
    # explicit sum keeps batched and single evaluations bitwise equal
    out = M[:, 0] * x[..., None, 0]
    for j in range(1, 4):
        out = out + M[:, j] * x[..., None, j]
    return out


def rotor_speeds_to_wrench(omegas, params: RotorParams) -> Wrench:
    omegas = np.asarray(omegas, dtype=float)
    if np.any(omegas < 0) or np.any(omegas > params.omega_max) or not np.isfinite(omegas).all():
        raise RotorSpeedError("rotor speed out of range")
    thrusts = params.c_f * omegas**2
    return Wrench.from_vector(_apply(params.A, thrusts))


def wrench_to_rotor_speeds(w: Wrench, params: RotorParams) -> tuple[np.ndarray, np.ndarray]:
    """Invert the allocation, clamping per-rotor thrust to its feasible range.

    Returns ``(omegas, saturated)`` where ``saturated`` is true wherever at
    least one rotor thrust had to be clamped.
    """
    thrusts = _apply(params.A_inv, w.as_vector())
    t_max = params.max_rotor_thrust
    clamped = np.clip(thrusts, 0.0, t_max)
    saturated = np.any(clamped != thrusts, axis=-1)
    omegas = np.sqrt(clamped / params.c_f)
    # guard against sqrt rounding pushing the top speed past omega_max
    omegas = np.minimum(omegas, params.omega_max)
    return omegas, saturated
