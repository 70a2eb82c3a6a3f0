import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from recoilrl.rigid_body import (
    InertialParams,
    InvalidStateError,
    RigidBodyState,
    dynamics_derivative,
    integrate_step,
    orthonormalize,
)

P = InertialParams()
ZERO3 = np.zeros(3)


def rot_x(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def rot_z(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def test_hover_derivative_is_exactly_zero():
    d = dynamics_derivative(RigidBodyState.hover(), P.mass * P.g, ZERO3, ZERO3, P)
    for arr in (d.p, d.v, d.R, d.w):
        assert np.all(arr == 0.0)


def test_free_fall_acceleration():
    d = dynamics_derivative(RigidBodyState.hover(), 0.0, ZERO3, ZERO3, P)
    np.testing.assert_array_equal(d.v, [0.0, 0.0, -9.81])


def test_recoil_acceleration_hand_value():
    d = dynamics_derivative(RigidBodyState.hover(), 0.0, ZERO3, np.array([-1000.0, 0, 0]), P)
    np.testing.assert_allclose(d.v, [-1000.0 / 3.1, 0.0, -9.81], rtol=0, atol=1e-12)
    assert d.v[0] == pytest.approx(-322.58, abs=5e-3)


def test_non_finite_input_rejected():
    s = RigidBodyState.hover()
    s.v[0] = np.nan
    with pytest.raises(InvalidStateError, match="invalid state"):
        dynamics_derivative(s, 0.0, ZERO3, ZERO3, P)
    with pytest.raises(InvalidStateError, match="invalid state"):
        dynamics_derivative(RigidBodyState.hover(), np.inf, ZERO3, ZERO3, P)


def test_free_fall_matches_ballistic_solution():
    s = RigidBodyState.hover()
    for _ in range(100):
        s = integrate_step(s, 0.0, ZERO3, ZERO3, P, 0.01)
    assert s.p[2] == pytest.approx(-0.5 * 9.81, abs=1e-5)
    assert s.v[2] == pytest.approx(-9.81, abs=1e-9)


def test_hover_step_leaves_state_unchanged():
    s0 = RigidBodyState.hover(p=[0.3, -0.2, 1.0])
    s = s0
    for _ in range(50):
        s = integrate_step(s, P.mass * P.g, ZERO3, ZERO3, P, 0.01)
        assert np.max(np.abs(s.p - s0.p)) < 1e-9
        assert np.max(np.abs(s.R - s0.R)) < 1e-9


def test_constant_yaw_rate_full_turn():
    n = 628
    dt = 2 * math.pi / n
    s = RigidBodyState.hover()
    s.w[:] = [0.0, 0.0, 1.0]
    for _ in range(n):
        s = integrate_step(s, 0.0, ZERO3, ZERO3, P, dt)
    assert np.max(np.abs(s.R - np.eye(3))) < 1e-4


def test_quarter_turn_matches_exact_rotation():
    n = 200
    dt = (math.pi / 2) / n
    s = RigidBodyState.hover()
    s.w[:] = [0.0, 0.0, 1.0]
    for _ in range(n):
        s = integrate_step(s, 0.0, ZERO3, ZERO3, P, dt)
    np.testing.assert_allclose(s.R, rot_z(math.pi / 2), atol=1e-9)


def test_free_fall_energy_conserved():
    s = RigidBodyState.hover()
    s.v[:] = [1.0, -0.5, 2.0]

    def energy(st):
        return 0.5 * P.mass * float(st.v @ st.v) + P.mass * P.g * st.p[2]

    e0 = energy(s)
    for _ in range(100):
        s = integrate_step(s, 0.0, ZERO3, ZERO3, P, 0.01)
    assert abs(energy(s) - e0) < 1e-6


def _rolling_thrust_solution(t, f, m, g, om):
    # thrust along body z while the body rolls about x at rate om
    a = f / m
    py = -a * (t / om - math.sin(om * t) / om**2)
    pz = -0.5 * g * t**2 + a * (1 - math.cos(om * t)) / om**2
    return np.array([0.0, py, pz])


def _rolling_thrust_error(dt):
    f, om, T = 20.0, 2.0, 1.0
    s = RigidBodyState.hover()
    s.w[:] = [om, 0.0, 0.0]
    for _ in range(int(round(T / dt))):
        s = integrate_step(s, f, ZERO3, ZERO3, P, dt)
    return np.linalg.norm(s.p - _rolling_thrust_solution(T, f, P.mass, P.g, om))


def test_rk4_fourth_order_convergence():
    ratio = _rolling_thrust_error(0.04) / _rolling_thrust_error(0.02)
    assert 8.0 <= ratio <= 32.0


def test_rotation_stays_valid_under_random_inputs():
    rng = np.random.default_rng(7)
    n = 100
    s = RigidBodyState.hover(n)
    s.w[:] = rng.normal(0, 1, (n, 3))
    for _ in range(1000):
        f_a = rng.uniform(0, 60, n)
        tau = rng.normal(0, 0.05, (n, 3)) - 0.02 * s.w
        f_d = rng.normal(0, 5, (n, 3))
        s = integrate_step(s, f_a, tau, f_d, P, 0.01)
    assert s.is_finite()
    RtR = np.einsum("nji,njk->nik", s.R, s.R)
    assert np.max(np.abs(RtR - np.eye(3))) < 1e-8


def test_batched_step_is_bitwise_equal_to_single():
    rng = np.random.default_rng(3)
    n = 16
    s = RigidBodyState.hover(n)
    s.p[:] = rng.normal(size=(n, 3))
    s.w[:] = rng.normal(size=(n, 3))
    f_a = rng.uniform(10, 40, n)
    tau = rng.normal(0, 0.1, (n, 3))
    f_d = rng.normal(0, 10, (n, 3))
    batched = integrate_step(s, f_a, tau, f_d, P, 0.01)
    for i in range(n):
        single = integrate_step(s[i], f_a[i], tau[i], f_d[i], P, 0.01)
        assert np.array_equal(single.p, batched.p[i])
        assert np.array_equal(single.R, batched.R[i])
        assert np.array_equal(single.w, batched.w[i])


def test_orthonormalize_identity():
    np.testing.assert_allclose(orthonormalize(np.eye(3)), np.eye(3), atol=1e-15)


def test_orthonormalize_recovers_scaled_rotation():
    R = orthonormalize(1.001 * rot_x(0.3))
    np.testing.assert_allclose(R, rot_x(0.3), atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(R, axis=0), 1.0, atol=1e-12)


def test_orthonormalize_rejects_reflection():
    with pytest.raises(InvalidStateError, match="degenerate rotation"):
        orthonormalize(np.diag([1.0, 1.0, -1.0]))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_orthonormalize_projection_and_idempotence(seed):
    rng = np.random.default_rng(seed)
    R = np.eye(3) + 1e-6 * rng.normal(size=(3, 3))
    Q = orthonormalize(R)
    assert np.max(np.abs(Q.T @ Q - np.eye(3))) < 1e-12
    assert np.linalg.det(Q) > 0
    assert np.max(np.abs(orthonormalize(Q) - Q)) < 1e-12


def test_inertial_params_validation():
    with pytest.raises(ValueError):
        InertialParams(mass=-1.0)
    with pytest.raises(ValueError):
        InertialParams(Jzz=0.0)
