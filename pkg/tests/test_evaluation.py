import math
from dataclasses import replace

import numpy as np
import pytest

from recoilrl.disturbance import DisturbanceParams
from recoilrl.environment import EnvConfig
from recoilrl.evaluation import (
    ArchitectureMismatchError,
    Trace,
    compare_policies,
    control_effort,
    episode_rmse,
    metrics_from_traces,
    run_eval,
    sweep_h_tt,
)
from recoilrl.policy import ActorCritic
from recoilrl.ppo import PpoConfig, train

SHORT_ENV = EnvConfig(
    episode_steps=60,
    init_pos_range=0.0,
    init_att_range=0.0,
    init_vel_range=0.0,
    enable_disturbance=True,
    disturbance=DisturbanceParams(T_t=0.1, earliest_trigger=0.05, recovery_time=0.05),
)
TINY = PpoConfig(num_envs=4, horizon=8, max_epochs=2, num_minibatches=2, mini_epochs=2, hidden=(16, 16, 16))


def make_trace(e_p, u):
    M = len(e_p)
    z = np.zeros((M, 3))
    return Trace(t=np.arange(1, M + 1) * 0.01, p=np.asarray(e_p, float), e_p=np.asarray(e_p, float), v=z, w=z,
                 u=np.asarray(u, float), o_t=np.zeros(M), f_d=z, reward=np.zeros(M))


def tiny_policy(seed, H=0, trigger=False, variant="it"):
    cfg = replace(SHORT_ENV, H=H, enable_trigger_obs=trigger)
    pol = ActorCritic.init(cfg.obs_dim, np.random.default_rng(seed), hidden=(8, 8), dtype=np.float64,
                           normalize_obs=False, normalize_value=False)
    pol.meta = {"variant": variant, "H": H, "enable_trigger_obs": trigger}
    return pol


# --- metric arithmetic -----------------------------------------------------

def test_perfect_hover_has_zero_metrics():
    m = metrics_from_traces([make_trace(np.zeros((100, 3)), np.zeros((100, 3)))])
    assert (m.p_x, m.p_y, m.p_z, m.p_norm, m.sigma_u) == (0.0, 0.0, 0.0, 0.0, 0.0)


def test_constant_error_rmse():
    e = np.zeros((250, 3))
    e[:, 0] = 0.5
    assert episode_rmse(e)[0] == pytest.approx(0.5, abs=1e-15)


def test_literal_form_is_sum_of_roots():
    e = np.zeros((100, 3))
    e[:, 0] = 0.5
    # sum_k sqrt(0.25/100) = 100 * 0.05
    assert episode_rmse(e, literal=True)[0] == pytest.approx(5.0, rel=1e-12)


def test_episode_mean_of_per_episode_values():
    a = make_trace(np.full((10, 3), 0.2), np.zeros((10, 3)))
    b = make_trace(np.full((40, 3), 0.6), np.zeros((40, 3)))
    m = metrics_from_traces([a, b])
    assert m.p_x == pytest.approx(0.4, abs=1e-12)
    assert m.n_episodes == 2


def test_norm_identity_and_effort_additivity():
    rng = np.random.default_rng(3)
    traces = [make_trace(rng.normal(size=(50, 3)), rng.uniform(-1, 1, size=(50, 3))) for _ in range(4)]
    m = metrics_from_traces(traces)
    assert m.p_norm**2 == pytest.approx(m.p_x**2 + m.p_y**2 + m.p_z**2, abs=1e-12)
    for tr in traces:
        manual = sum(math.sqrt(float(x @ x)) for x in tr.u)
        assert control_effort(tr.u) == pytest.approx(manual, abs=1e-9)
    assert min(m.p_x, m.p_y, m.p_z, m.sigma_u) >= 0


# --- rollouts --------------------------------------------------------------

def test_repeat_evaluation_is_bitwise_identical():
    pol = tiny_policy(0)
    a = run_eval(pol, SHORT_ENV, n_episodes=3, seed=11)
    b = run_eval(pol, SHORT_ENV, n_episodes=3, seed=11)
    assert a.metrics.as_dict() == b.metrics.as_dict()


def test_threaded_matches_single_thread():
    pol = tiny_policy(1)
    a = run_eval(pol, SHORT_ENV, n_episodes=6, seed=4, workers=1)
    b = run_eval(pol, SHORT_ENV, n_episodes=6, seed=4, workers=3)
    assert a.metrics.as_dict() == b.metrics.as_dict()
    for ta, tb in zip(a.traces, b.traces):
        assert np.array_equal(ta.e_p, tb.e_p)


def test_agents_face_identical_events():
    pols = {"nominal": tiny_policy(0, variant="nominal"), "i": tiny_policy(1, variant="i"),
            "it": tiny_policy(2, trigger=True)}
    res = compare_policies(pols, SHORT_ENV, seed=5, n_episodes=4)
    starts = {k: [tr.t_trigger_start for tr in r.traces] for k, r in res.items()}
    impulses = {k: [tr.t_impulse for tr in r.traces] for k, r in res.items()}
    assert starts["nominal"] == starts["i"] == starts["it"]
    assert impulses["nominal"] == impulses["i"] == impulses["it"]
    assert len(set(starts["it"])) > 1  # episodes differ from each other


def test_identical_checkpoints_give_identical_rows():
    pol = tiny_policy(7)
    res = compare_policies({"nominal": pol, "i": pol, "it": pol}, SHORT_ENV, seed=2, n_episodes=2)
    rows = [r.metrics.as_dict() for r in res.values()]
    assert rows[0] == rows[1] == rows[2]


def test_translation_invariance():
    pol = tiny_policy(8)
    a = run_eval(pol, SHORT_ENV, n_episodes=2, seed=9).metrics
    b = run_eval(pol, replace(SHORT_ENV, p_r=(12.0, -3.0, 40.0)), n_episodes=2, seed=9).metrics
    for k in ("p_x", "p_y", "p_z", "p_norm", "sigma_u"):
        assert getattr(a, k) == pytest.approx(getattr(b, k), abs=1e-9)


def test_early_termination_counts_realized_steps():
    pol = tiny_policy(0)
    pol.actor.biases[-1][:] = [-20.0, 0.0, 0.0]  # zero collective thrust, free fall
    res = run_eval(pol, replace(SHORT_ENV, episode_steps=200, enable_disturbance=False), n_episodes=1, seed=0)
    tr = res.traces[0]
    assert tr.terminated and res.metrics.failures == 1
    assert len(tr) < 200
    assert res.metrics.p_z == pytest.approx(float(np.sqrt(np.mean(tr.e_p[:, 2] ** 2))), abs=1e-15)


def test_architecture_mismatch_names_widths():
    pol = tiny_policy(0, H=0)
    with pytest.raises(ArchitectureMismatchError, match="expected 209 .*found 19"):
        run_eval(pol, replace(SHORT_ENV, H=10), n_episodes=1, match_policy=False)


def test_policy_meta_selects_history_length():
    pol = tiny_policy(0, H=2)
    res = run_eval(pol, SHORT_ENV, n_episodes=1, seed=0)
    assert res.metrics.n_episodes == 1


# --- sweep -----------------------------------------------------------------

def test_single_cell_sweep_equals_direct_run():
    env = replace(SHORT_ENV, init_pos_range=0.5, init_att_range=0.1, init_vel_range=0.2)
    cells = sweep_h_tt([1], [0.1], env, TINY, eval_config=SHORT_ENV, seed=3, n_episodes=2)
    assert len(cells) == 1
    direct = train(replace(env, H=1), TINY, "it", 3)
    m = run_eval(direct.policy, replace(SHORT_ENV, H=1), 2, 3).metrics
    c = cells[0]
    assert (c.H, c.T_t) == (1, 0.1)
    assert c.p_norm == m.p_norm and c.sigma_u == m.sigma_u
    np.testing.assert_equal(c.final_episode_len, direct.final_episode_len)


def test_sweep_records_cell_failures():
    # T_t too long for a 60-step episode: the schedule is infeasible
    cells = sweep_h_tt([0], [5.0], SHORT_ENV, TINY, seed=0, n_episodes=1)
    assert not cells[0].stable
    assert "schedule infeasible" in cells[0].error
    assert math.isnan(cells[0].p_norm)


def test_sweep_rejects_empty_grid():
    with pytest.raises(ValueError):
        sweep_h_tt([], [0.5], SHORT_ENV, TINY)
