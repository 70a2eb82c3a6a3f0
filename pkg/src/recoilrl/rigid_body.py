"""Quadrotor rigid-body dynamics and RK4 integration.

All functions accept either a single state (``p`` of shape ``(3,)``) or a
batch (``p`` of shape ``(n, 3)``).  Matrix products are written out
element-wise so that a batched call is bitwise identical to the same
states integrated one at a time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GRAVITY = 9.81


class InvalidStateError(ValueError):
    pass


@dataclass(frozen=True)
class InertialParams:
    mass: float = 3.1
    Jxx: float = 0.039
    Jyy: float = 0.039
    Jzz: float = 0.061
    g: float = GRAVITY

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if not (self.Jxx > 0 and self.Jyy > 0 and self.Jzz > 0):
            raise ValueError("inertia diagonal entries must be positive")
        if not self.g > 0:
            raise ValueError("g must be positive")

    @property
    def J(self) -> np.ndarray:
        return np.array([self.Jxx, self.Jyy, self.Jzz])

    @property
    def hover_thrust(self) -> float:
        return self.mass * self.g


@dataclass
class RigidBodyState:
    """Position, velocity (world), rotation body->world, body angular rate."""

    p: np.ndarray
    v: np.ndarray
    R: np.ndarray
    w: np.ndarray

    @classmethod
    def hover(cls, n: int | None = None, p=None) -> "RigidBodyState":
        shape = () if n is None else (n,)
        p0 = np.zeros(shape + (3,)) if p is None else np.array(p, dtype=float) * np.ones(shape + (3,))
        R = np.broadcast_to(np.eye(3), shape + (3, 3)).copy()
        return cls(p0, np.zeros(shape + (3,)), R, np.zeros(shape + (3,)))

    def copy(self) -> "RigidBodyState":
        return RigidBodyState(self.p.copy(), self.v.copy(), self.R.copy(), self.w.copy())

    def is_finite(self) -> bool:
        return bool(
            np.isfinite(self.p).all()
            and np.isfinite(self.v).all()
            and np.isfinite(self.R).all()
            and np.isfinite(self.w).all()
        )

    def __getitem__(self, idx) -> "RigidBodyState":
        return RigidBodyState(self.p[idx], self.v[idx], self.R[idx], self.w[idx])

    def __setitem__(self, idx, other: "RigidBodyState") -> None:
        self.p[idx] = other.p
        self.v[idx] = other.v
        self.R[idx] = other.R
        self.w[idx] = other.w


def matvec(M: np.ndarray, x: np.ndarray) -> np.ndarray:
    return (
        M[..., :, 0] * x[..., None, 0]
        + M[..., :, 1] * x[..., None, 1]
        + M[..., :, 2] * x[..., None, 2]
    )


def matmul(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return (
        A[..., :, 0, None] * B[..., None, 0, :]
        + A[..., :, 1, None] * B[..., None, 1, :]
        + A[..., :, 2, None] * B[..., None, 2, :]
    )


def cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.stack(
        [
            a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
            a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
            a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
        ],
        axis=-1,
    )


def hat(w: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix with ``hat(w) @ x == cross(w, x)``."""
    z = np.zeros_like(w[..., 0])
    wx, wy, wz = w[..., 0], w[..., 1], w[..., 2]
    return np.stack(
        [
            np.stack([z, -wz, wy], axis=-1),
            np.stack([wz, z, -wx], axis=-1),
            np.stack([-wy, wx, z], axis=-1),
        ],
        axis=-2,
    )


def dynamics_derivative(
    state: RigidBodyState,
    f_a,
    tau_a: np.ndarray,
    f_d: np.ndarray,
    params: InertialParams,
) -> RigidBodyState:
    """Newton-Euler time derivative of ``state``.

    Gravity acts along -z of the world frame; ``f_a`` acts along +z of the
    body frame and ``f_d`` is a body-frame force.  The returned object
    reuses :class:`RigidBodyState` to hold (p_dot, v_dot, R_dot, w_dot).
    """
    f_a = np.asarray(f_a, dtype=float)
    tau_a = np.asarray(tau_a, dtype=float)
    f_d = np.asarray(f_d, dtype=float)
    if not (
        state.is_finite()
        and np.isfinite(f_a).all()
        and np.isfinite(tau_a).all()
        and np.isfinite(f_d).all()
    ):
        raise InvalidStateError("invalid state")

    body_force = f_d + np.stack(
        [np.zeros_like(f_a), np.zeros_like(f_a), f_a], axis=-1
    )
    v_dot = matvec(state.R, body_force) / params.mass
    v_dot[..., 2] -= params.g

    R_dot = matmul(state.R, hat(state.w))

    J = params.J
    Jw = state.w * J
    w_dot = (tau_a - cross(state.w, Jw)) / J

    return RigidBodyState(state.v.copy(), v_dot, R_dot, w_dot)


def _add(state: RigidBodyState, d: RigidBodyState, h: float) -> RigidBodyState:
    return RigidBodyState(
        state.p + h * d.p, state.v + h * d.v, state.R + h * d.R, state.w + h * d.w
    )


def orthonormalize(R: np.ndarray) -> np.ndarray:
    """Project ``R`` onto SO(3) via the polar decomposition."""
    R = np.asarray(R, dtype=float)
    if np.any(np.linalg.det(R) <= 0):
        raise InvalidStateError("degenerate rotation")
    U, _, Vt = np.linalg.svd(R)
    return U @ Vt


def integrate_step(
    state: RigidBodyState,
    f_a,
    tau_a: np.ndarray,
    f_d: np.ndarray,
    params: InertialParams,
    dt: float,
) -> RigidBodyState:
    """One classical RK4 step with inputs held constant over ``dt``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    k1 = dynamics_derivative(state, f_a, tau_a, f_d, params)
    k2 = dynamics_derivative(_add(state, k1, 0.5 * dt), f_a, tau_a, f_d, params)
    k3 = dynamics_derivative(_add(state, k2, 0.5 * dt), f_a, tau_a, f_d, params)
    k4 = dynamics_derivative(_add(state, k3, dt), f_a, tau_a, f_d, params)
    h = dt / 6.0
    out = RigidBodyState(
        state.p + h * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p),
        state.v + h * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v),
        state.R + h * (k1.R + 2.0 * k2.R + 2.0 * k3.R + k4.R),
        state.w + h * (k1.w + 2.0 * k2.w + 2.0 * k3.w + k4.w),
    )
    if not out.is_finite():
        raise InvalidStateError("invalid state")
    out.R = orthonormalize(out.R)
    return out
