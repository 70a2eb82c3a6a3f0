"""Inner-loop body-rate controller with tilt-compensated gravity feedforward."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .actuation import RotorParams, Wrench, wrench_to_rotor_speeds
from .rigid_body import InertialParams, RigidBodyState, cross


@dataclass(frozen=True)
class RateCtrlParams:
    kp: tuple[float, float, float] = (20.0, 20.0, 8.0)
    max_tilt_comp: float = math.radians(60.0)

    def __post_init__(self):
        if len(self.kp) != 3 or any(not k > 0 for k in self.kp):
            raise ValueError("kp must hold three positive gains")
        if not 0 < self.max_tilt_comp < math.pi / 2:
            raise ValueError("max_tilt_comp must lie in (0, pi/2)")


def gravity_compensation(R: np.ndarray, inertial: InertialParams, ctrl: RateCtrlParams):
    # R[2, 2] is the cosine of the angle between body z and world z
    cos_tilt = np.maximum(R[..., 2, 2], math.cos(ctrl.max_tilt_comp))
    return inertial.mass * inertial.g / cos_tilt


def compute_wrench(
    u,
    w_rz,
    state: RigidBodyState,
    inertial: InertialParams,
    ctrl: RateCtrlParams,
) -> Wrench:
    """Wrench requested by the controller before allocation.

    ``u`` is the physical action ``(f_a [N], w_rx, w_ry [rad/s])`` with
    ``f_a`` a thrust delta on top of gravity compensation.
    """
    u = np.asarray(u, dtype=float)
    w_ref = np.stack([u[..., 1], u[..., 2], np.broadcast_to(w_rz, u[..., 0].shape)], axis=-1)
    J = inertial.J
    kp = np.asarray(ctrl.kp, dtype=float)
    tau = J * (kp * (w_ref - state.w)) + cross(state.w, J * state.w)
    f_total = u[..., 0] + gravity_compensation(state.R, inertial, ctrl)
    return Wrench(f_total, tau)


def desaturate(wrench: Wrench, rotor: RotorParams) -> tuple[Wrench, np.ndarray]:
    """Fit the requested wrench into the feasible rotor-thrust box.

    Torques have priority: they are scaled by a common factor only when
    their per-rotor thrust spread exceeds the rotor range, and the
    collective thrust is then clamped into whatever room remains.  Torque
    direction is preserved, so saturation cannot turn a roll/pitch demand
    into a yaw torque (the yaw coefficient is large).  Returns the feasible
    wrench and a flag marking entries that had to be modified.
    """
    t_max = rotor.max_rotor_thrust
    A_inv = rotor.A_inv
    tau = wrench.tau_a
    spread = A_inv[:, 1] * tau[..., None, 0] + A_inv[:, 2] * tau[..., None, 1] + A_inv[:, 3] * tau[..., None, 2]
    width = spread.max(axis=-1) - spread.min(axis=-1)
    over = width > t_max
    scale = np.where(over, t_max / np.where(over, width, 1.0), 1.0)
    spread = spread * scale[..., None]
    # A_inv[:, 0] is 1/4 for every rotor
    f_lo = -4.0 * spread.min(axis=-1)
    f_hi = 4.0 * (t_max - spread.max(axis=-1))
    f = np.clip(wrench.f_a, f_lo, f_hi)
    modified = (scale < 1.0) | (f != wrench.f_a)
    return Wrench(f, tau * scale[..., None]), modified


def compute_rotor_commands(
    u,
    w_rz,
    state: RigidBodyState,
    inertial: InertialParams,
    rotor: RotorParams,
    ctrl: RateCtrlParams,
) -> tuple[np.ndarray, np.ndarray]:
    """Rotor speeds for action ``u``; returns ``(omegas, saturated)``."""
    feasible, modified = desaturate(compute_wrench(u, w_rz, state, inertial, ctrl), rotor)
    omegas, clamped = wrench_to_rotor_speeds(feasible, rotor)
    return omegas, modified | clamped
