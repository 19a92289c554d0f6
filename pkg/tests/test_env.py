import numpy as np
import pytest

from magin import association as assoc
from magin.config import ScenarioConfig, toy_scenario
from magin.env import (MaginEnv, action_dims, agent_counts, collision_penalty, global_state,
                       reward_haps, reward_iotd, reward_uav, scale_action, state_width)


def random_actions(cfg, rng):
    d, c = action_dims(cfg), agent_counts(cfg)
    return {k: rng.random((c[k], d[k])) for k in d}


def constant_actions(cfg, value):
    d, c = action_dims(cfg), agent_counts(cfg)
    return {k: np.full((c[k], d[k]), float(value)) for k in d}


def run(cfg, seed, policy, slots=None):
    env = MaginEnv(cfg, seed)
    env.reset()
    out = []
    for _ in range(slots or cfg.episode_length):
        out.append(env.step(policy(env)))
    return env, out


# shapes and reset

def test_reset_is_deterministic():
    cfg = ScenarioConfig()
    a, b = MaginEnv(cfg, 5), MaginEnv(cfg, 5)
    oa, sa = a.reset()
    ob, sb = b.reset()
    assert np.array_equal(sa, sb)
    assert np.array_equal(a.world.iotd.position, b.world.iotd.position)
    assert np.array_equal(a.world.tasks.size, b.world.tasks.size)
    assert np.array_equal(a.world.f_local, b.world.f_local)


def test_reset_seed_restarts_dynamics():
    env = MaginEnv(toy_scenario(), 0)
    s0 = env.reset(seed=3)[1]
    env.reset()
    assert np.array_equal(env.reset(seed=3)[1], s0)


def test_default_starts_and_widths():
    cfg = ScenarioConfig()
    env = MaginEnv(cfg, 0)
    obs, state = env.reset()
    np.testing.assert_array_equal(env.world.uav.position, [[100, 800], [200, 100], [500, 800]])
    assert obs["iotd"].shape == (70, 5)
    assert obs["uav"].shape == (3, 6 * 10 + 6)
    assert obs["haps"].shape == (1, 5 * 70)
    assert state.shape == (state_width(cfg),)
    assert np.all(env.world.queues.backlog["local"] == 0) and env.world.slot == 0


def test_hotspot_placement():
    cfg = ScenarioConfig()
    env = MaginEnv(cfg, 1)
    env.reset()
    member = assoc.hotspot_membership(env.world.iotd.position, env.hotspot_centers, cfg.hotspot_radius)
    d = np.linalg.norm(env.world.iotd.position[:, None] - env.hotspot_centers[None], axis=-1).min(axis=1)
    assert (d <= cfg.hotspot_radius + 1e-9).sum() >= 56  # 80% of 70
    assert (member >= 0).sum() >= 56


def test_global_state_order(rng):
    obs = {"iotd": rng.random((2, 5)), "uav": rng.random((1, 4)), "haps": rng.random((1, 10))}
    s = global_state(obs)
    np.testing.assert_array_equal(s[:10], obs["iotd"].reshape(-1))
    np.testing.assert_array_equal(s[-10:], obs["haps"][0])


# action scaling

def test_scale_zero_is_lower_bounds():
    cfg = toy_scenario()
    uav = scale_action(np.zeros((1, cfg.uav_capacity + 2)), "uav", cfg)
    assert uav.heading[0] == 0 and uav.distance[0] == 0 and np.all(uav.f_alloc == 0)
    assert scale_action(np.zeros((3, 1)), "iotd", cfg).alpha.tolist() == [0, 0, 0]


def test_scale_full_haps_normalizes():
    cfg = ScenarioConfig(n_iotds=4)
    a = scale_action(np.ones((1, 4)), "haps", cfg)
    np.testing.assert_allclose(a.f_alloc, cfg.f_haps_max / 4)


def test_scale_uav_fractions_direct():
    cfg = ScenarioConfig(uav_capacity=2)
    a = scale_action(np.array([[0.5, 1.0, 0.2, 0.3]]), "uav", cfg, f_max=[20e9])
    np.testing.assert_allclose(a.f_alloc[0], [4e9, 6e9])
    assert a.heading[0] == pytest.approx(np.pi) and a.distance[0] == cfg.d_max


def test_scale_rejects_out_of_range():
    with pytest.raises(ValueError):
        scale_action(np.array([[1.5]]), "iotd", toy_scenario())
    with pytest.raises(ValueError):
        scale_action(np.array([[0.5]]), "satellite", toy_scenario())


# rewards

def test_reward_iotd_terms():
    cfg = ScenarioConfig()
    e = np.array([0.2, 0.3])
    serving = np.array([0, -1])
    traj = np.array([100.0])
    r, p = reward_iotd(e, serving, traj, np.array([0.0, cfg.q_max_local + 0.01]), np.zeros(2), cfg)
    assert r[0] == pytest.approx(-(0.2 + cfg.omega * 100.0))
    assert p[1] == pytest.approx(0.1)
    assert r[1] == pytest.approx(-(0.3 + 0.1))  # HAPS-served: no trajectory term


def test_reward_uav_idle_and_guide():
    cfg = ScenarioConfig()
    traj = np.array([336.98])
    ground = np.full((10, 1), 50.0)
    r, parts = reward_uav(np.zeros(10), np.full(10, -1), traj, np.zeros(10), np.zeros(1), np.array([[500.0, 500]]),
                          ground, cfg)
    assert parts["r_guide"][0] == pytest.approx(cfg.mu_guide)
    assert r[0] == pytest.approx(-cfg.omega * 336.98 + cfg.mu_guide)
    assert parts["p_delay"][0] == parts["p_flyout"][0] == parts["p_collision"][0] == 0


def test_collision_penalty_half_intrusion():
    cfg = ScenarioConfig()
    pos = np.array([[0.0, 0.0], [cfg.d_min / 2, 0.0]])
    np.testing.assert_allclose(collision_penalty(pos, cfg), [0.5, 0.5])
    assert np.all(collision_penalty(np.array([[0.0, 0.0], [100.0, 0.0]]), cfg) == 0)


def test_reward_haps_examples():
    cfg = ScenarioConfig()
    serving = np.array([-1, 0])
    relay = np.zeros(2, bool)
    assert reward_haps(np.array([0.0, 1.0]), np.array([0, 0]), relay, np.zeros(2), cfg)[0] == 0.0
    assert reward_haps(np.array([0.4, 1.0]), serving, relay, np.zeros(2), cfg)[0] == pytest.approx(-0.4)
    qe = np.array([cfg.q_max_edge + 0.02, 0.0])
    assert reward_haps(np.array([0.4, 1.0]), serving, relay, qe, cfg)[0] == pytest.approx(-0.6)


# dynamics

def test_action_shape_mismatch_names_agent():
    cfg = toy_scenario()
    env = MaginEnv(cfg, 0)
    env.reset()
    acts = constant_actions(cfg, 0.5)
    acts["uav"] = np.zeros((1, 3))
    with pytest.raises(ValueError, match="'uav'"):
        env.step(acts)


def test_step_before_reset_and_after_end():
    cfg = toy_scenario(episode_length=2)
    env = MaginEnv(cfg, 0)
    with pytest.raises(RuntimeError):
        env.step(constant_actions(cfg, 0.5))
    env.reset()
    env.step(constant_actions(cfg, 0.5))
    env.step(constant_actions(cfg, 0.5))
    assert env.done
    with pytest.raises(RuntimeError):
        env.step(constant_actions(cfg, 0.5))


def test_zero_action_slot_rewards():
    cfg = toy_scenario()
    env = MaginEnv(cfg, 0)
    env.reset()
    res = env.step(constant_actions(cfg, 0.0))
    rep = res.info["energy"]
    assert np.all(rep.offload_tx == 0) and np.all(rep.edge == 0) and np.all(rep.relay_edge == 0)
    serving = res.info["serving"]
    traj = np.where(serving >= 0, rep.traj[np.maximum(serving, 0)], 0.0)
    np.testing.assert_allclose(res.rewards["iotd"], -(rep.local + cfg.omega * traj + res.info["p_iotd"]))
    assert rep.fly[0] == 0 and rep.hover[0] == pytest.approx(2 * 168.49)
    assert res.rewards["haps"][0] == pytest.approx(-rep.local[serving < 0].sum() - res.info["p_haps"])


def test_reward_energy_reconciles_with_report(rng):
    cfg = toy_scenario(n_iotds=30, n_uavs=2, uav_starts=((400.0, 400.0), (600.0, 600.0)))
    env = MaginEnv(cfg, 2)
    env.reset()
    for _ in range(20):
        res = env.step(random_actions(cfg, rng))
        rep, serving = res.info["energy"], res.info["serving"]
        traj = np.where(serving >= 0, rep.traj[np.maximum(serving, 0)], 0.0)
        np.testing.assert_allclose(-res.rewards["iotd"] - res.info["p_iotd"] - cfg.omega * traj, rep.com2,
                                   rtol=1e-12, atol=1e-12)
        served = np.array([rep.com2[serving == u].sum() for u in range(2)])
        penalties = res.info["p_delay"] + res.info["p_flyout"] + res.info["p_collision"] - res.info["r_guide"]
        np.testing.assert_allclose(-res.rewards["uav"] - penalties - cfg.omega * rep.traj, served, atol=1e-9)
        assert res.metrics["e_all"] == pytest.approx(rep.com2.sum() + cfg.omega * rep.traj.sum(), rel=1e-12)


def test_wall_overshoot_is_penalized():
    cfg = toy_scenario(uav_starts=((990.0, 500.0),))
    env = MaginEnv(cfg, 0)
    env.reset()
    acts = constant_actions(cfg, 0.0)
    acts["uav"][0, 1] = 1.0  # heading 0, full 50 m
    res = env.step(acts)
    assert res.info["boundary_violation"][0] == pytest.approx(40.0)
    assert res.info["p_flyout"][0] == pytest.approx(cfg.mu_flyout * 40.0)
    assert env.world.uav.position[0, 0] == 1000.0
    assert res.metrics["boundary_violations"] == 1


def test_step_determinism(rng):
    cfg = toy_scenario()
    seq = [random_actions(cfg, rng) for _ in range(10)]
    outs = []
    for _ in range(2):
        env = MaginEnv(cfg, 4)
        env.reset()
        outs.append([env.step(a).state for a in seq])
    for a, b in zip(*outs):
        assert np.array_equal(a, b)


def test_observation_invariants(rng):
    cfg = toy_scenario(n_iotds=20, n_uavs=2, uav_starts=((100.0, 800.0), (200.0, 100.0)))
    env = MaginEnv(cfg, 0)
    obs, _ = env.reset()
    widths = {k: v.shape for k, v in obs.items()}
    for _ in range(cfg.episode_length):
        res = env.step(random_actions(cfg, rng))
        for k, v in res.obs.items():
            assert v.shape == widths[k]
            assert np.all(np.isfinite(v)) and v.min() >= 0 and v.max() <= 1
        assert res.state.shape == (state_width(cfg),)


def test_constraints_by_construction(rng):
    cfg = toy_scenario(n_iotds=40, n_uavs=2, uav_capacity=6, uav_starts=((300.0, 300.0), (700.0, 700.0)))
    env = MaginEnv(cfg, 3)
    env.reset()
    for _ in range(cfg.episode_length):
        res = env.step(random_actions(cfg, rng))
        serving = res.info["serving"]
        for u in range(2):
            assert res.info["f_uav"][serving == u].sum() <= env.world.uav_f_max[u]
        assert res.info["f_haps"].sum() <= cfg.f_haps_max * (1 + 1e-12)
        assert np.all(assoc.beta_matrix(serving, 2).sum(axis=1) == 1)
        assert np.all((env.world.uav.position >= 0) & (env.world.uav.position <= cfg.area_width))
        d = res.info["delays"]
        for part in (d.local, d.offload, d.edge, d.relay, d.relay_edge):
            assert np.all(part <= cfg.slot_duration)


def test_no_offloading_keeps_remote_queues_empty(rng):
    cfg = toy_scenario()
    env = MaginEnv(cfg, 0)
    env.reset()
    for _ in range(cfg.episode_length):
        acts = random_actions(cfg, rng)
        acts["iotd"][:] = 0.0
        env.step(acts)
        for name in ("offload", "edge", "relay", "relay_edge"):
            assert np.all(env.world.queues.backlog[name] == 0)


def test_conservation_over_an_episode(rng):
    cfg = toy_scenario(n_iotds=20, n_uavs=2, uav_capacity=3, uav_starts=((400.0, 400.0), (600.0, 600.0)))
    env = MaginEnv(cfg, 1)
    env.reset()
    for _ in range(cfg.episode_length):
        env.step(random_actions(cfg, rng))
    assert max(env.world.queues.conservation_error().values()) < 1e-9


def test_relaying_happens_when_uav_is_oversubscribed(rng):
    cfg = toy_scenario(n_iotds=30, n_hotspots=1, hotspot_fraction=1.0, uav_starts=((500.0, 500.0),))
    env = MaginEnv(cfg, 0)
    env.hotspot_centers[:] = [[500.0, 500.0]]
    env.reset()
    relayed = 0
    for _ in range(10):
        acts = constant_actions(cfg, 1.0)
        acts["uav"][0, :2] = 0.0
        res = env.step(acts)
        relayed += res.metrics["n_relayed"]
        assert np.all(res.info["f_edge"][res.info["relay"]] == 0)
    assert relayed > 0
    assert env.world.queues.backlog["relay_edge"].sum() + env.world.queues.departed["relay_edge"].sum() > 0


def test_metrics_row_keys():
    cfg = toy_scenario()
    env = MaginEnv(cfg, 0)
    env.reset()
    m = env.step(constant_actions(cfg, 0.5)).metrics
    for key in ("slot", "reward_iotd", "reward_uav", "reward_haps", "e_all", "mean_alpha", "mean_f_alloc",
                "mean_delay", "fairness", "deadline_violations", "queue_violations", "boundary_violations",
                "collisions"):
        assert key in m
    assert m["mean_alpha"] == 0.5 and m["slot"] == 1
