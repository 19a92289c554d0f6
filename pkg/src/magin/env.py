"""Heterogeneous multi-agent environment: IoTD, UAV and HAPS agents acting on one shared slot.

Agents act on unit-interval samples; :func:`scale_action` maps them to physical
ranges. Observations, actions and rewards are dicts keyed by agent type:

* ``"iotd"``: (N, 5) observations, (N, 1) actions, (N,) rewards
* ``"uav"``: (M, 6*N_max + 2*M) observations, (M, N_max + 2) actions, (M,) rewards
* ``"haps"``: (1, 5*N) observations, (1, N) actions, (1,) rewards
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import association as assoc
from . import channel, energy, mobility, queues
from .config import ScenarioConfig, dbm_to_watts, make_rng

AGENT_TYPES = ("iotd", "uav", "haps")
IOTD_OBS = 5
# RNG stream ids derived from the environment seed
_LAYOUT_STREAM = 0
_DYNAMICS_STREAM = 1


def obs_widths(cfg: ScenarioConfig) -> dict:
    n_max = cfg.uav_capacity
    return {"iotd": IOTD_OBS, "uav": 6 * n_max + 2 * cfg.n_uavs, "haps": 5 * cfg.n_iotds}


def action_dims(cfg: ScenarioConfig) -> dict:
    return {"iotd": 1, "uav": cfg.uav_capacity + 2, "haps": cfg.n_iotds}


def agent_counts(cfg: ScenarioConfig) -> dict:
    return {"iotd": cfg.n_iotds, "uav": cfg.n_uavs, "haps": 1}


def state_width(cfg: ScenarioConfig) -> int:
    w, c = obs_widths(cfg), agent_counts(cfg)
    return sum(w[k] * c[k] for k in AGENT_TYPES)


@dataclass
class ScaledAction:
    """Physical action of one agent type; unused fields stay ``None``."""

    alpha: np.ndarray | None = None  # (N,)
    heading: np.ndarray | None = None  # (M,) rad
    distance: np.ndarray | None = None  # (M,) m
    f_requested: np.ndarray | None = None  # Hz, fraction times capacity
    f_alloc: np.ndarray | None = None  # Hz, after max(1, sum) normalization


def _normalized_alloc(frac, f_max):
    frac = np.asarray(frac, dtype=float)
    total = np.maximum(1.0, frac.sum(axis=-1, keepdims=True))
    return frac * np.asarray(f_max, dtype=float).reshape(-1, 1) / total


def scale_action(u, agent: str, cfg: ScenarioConfig, f_max=None) -> ScaledAction:
    """Affine map of unit samples to physical actions.

    ``f_max`` is the per-UAV capacity (M,) for ``"uav"`` and defaults to the
    HAPS capacity for ``"haps"``.
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    if np.any(u < 0.0) or np.any(u > 1.0):
        raise ValueError(f"unit actions for agent '{agent}' must lie in [0, 1]")
    if agent == "iotd":
        return ScaledAction(alpha=u[:, 0].copy())
    if agent == "uav":
        if f_max is None:
            f_max = np.full(u.shape[0], cfg.f_uav_max[1])
        f_max = np.asarray(f_max, dtype=float).reshape(-1)
        frac = u[:, 2:]
        return ScaledAction(heading=2.0 * np.pi * u[:, 0], distance=cfg.d_max * u[:, 1],
                            f_requested=frac * f_max[:, None], f_alloc=_normalized_alloc(frac, f_max))
    if agent == "haps":
        cap = cfg.f_haps_max if f_max is None else float(f_max)
        frac = u[0]
        return ScaledAction(f_requested=frac * cap, f_alloc=_normalized_alloc(frac[None, :], [cap])[0])
    raise ValueError(f"unknown agent type '{agent}'")


# rewards

def relu(x):
    return np.maximum(np.asarray(x, dtype=float), 0.0)


def reward_iotd(e_com2, serving, traj, qbar_local, qbar_offload, cfg: ScenarioConfig):
    """Per-IoTD reward and its delay penalty."""
    on_uav = serving >= 0
    traj_term = np.where(on_uav, np.asarray(traj)[np.where(on_uav, serving, 0)], 0.0)
    penalty = cfg.psi1 * relu(qbar_local - cfg.q_max_local) + cfg.psi2 * relu(qbar_offload - cfg.q_max_offload)
    return -(e_com2 + cfg.omega * traj_term + penalty), penalty


def collision_penalty(uav_pos, cfg: ScenarioConfig):
    """Per-UAV mu_c * sum_j |min((dist - d_min) / d_min, 0)| over the other UAVs."""
    dist = mobility.uav_pair_distances(uav_pos)
    intrusion = np.abs(np.minimum((dist - cfg.d_min) / cfg.d_min, 0.0))
    np.fill_diagonal(intrusion, 0.0)
    return cfg.mu_collision * intrusion.sum(axis=1)


def coverage_counts(ground_dist, cfg: ScenarioConfig):
    """IoTDs within each UAV's coverage radius, capped at N_max."""
    return np.minimum((ground_dist <= cfg.uav_coverage_radius).sum(axis=0), cfg.uav_capacity)


def reward_uav(e_com2, serving, traj, qbar_edge, boundary_violation, uav_pos, ground_dist,
               cfg: ScenarioConfig):
    """Per-UAV reward and penalty breakdown (all penalties non-negative)."""
    m = traj.shape[0]
    served_energy = np.zeros(m)
    delay_excess = np.zeros(m)
    on_uav = serving >= 0
    np.add.at(served_energy, serving[on_uav], e_com2[on_uav])
    np.add.at(delay_excess, serving[on_uav], relu(qbar_edge - cfg.q_max_edge)[on_uav])
    p_delay = cfg.psi3 * delay_excess
    p_flyout = cfg.mu_flyout * np.asarray(boundary_violation, dtype=float)
    p_collision = collision_penalty(uav_pos, cfg)
    r_guide = cfg.mu_guide * coverage_counts(ground_dist, cfg) / cfg.uav_capacity
    reward = -(served_energy + cfg.omega * traj + p_delay + p_flyout + p_collision) + r_guide
    return reward, {"p_delay": p_delay, "p_flyout": p_flyout, "p_collision": p_collision, "r_guide": r_guide}


def reward_haps(e_com2, serving, relay_pipeline, qbar_edge, cfg: ScenarioConfig):
    """HAPS reward: energy of its associated IoTDs plus edge-delay penalties over direct and relayed queues."""
    on_haps = serving == assoc.HAPS
    handled = on_haps | relay_pipeline
    penalty = cfg.psi4 * relu(qbar_edge - cfg.q_max_edge)[handled].sum()
    return -(float(e_com2[on_haps].sum()) + penalty), penalty


# world state

@dataclass
class WorldState:
    slot: int
    iotd: mobility.IotdKinematics
    uav: mobility.UavKinematics
    tasks: queues.TaskSet
    queues: queues.QueueSet
    f_local: np.ndarray  # (N,) Hz
    tx_power_w: np.ndarray  # (N,)
    uav_bandwidth: np.ndarray  # (M,)
    uav_f_max: np.ndarray  # (M,)
    serving: np.ndarray  # (N,) last association
    relay_owner: np.ndarray  # (N,) UAV whose relay buffer holds the IoTD's bits, -1 if none
    candidates: np.ndarray  # (M, N_max) IoTD indices behind each UAV's observation/action slots
    alpha_prev: np.ndarray
    qbar_local: np.ndarray
    qbar_offload: np.ndarray
    qbar_edge: np.ndarray
    iotd_drain: np.ndarray
    uav_drain: np.ndarray
    served_counts: np.ndarray  # (H, M) cumulative
    totals: dict = field(default_factory=dict)


@dataclass
class StepResult:
    obs: dict
    rewards: dict
    state: np.ndarray
    metrics: dict
    info: dict


class MaginEnv:
    """One episode of ``cfg.episode_length`` slots.

    Hotspot centres are drawn once from ``seed`` at construction; IoTD
    placement, per-device hardware draws, tasks and mobility come from a
    separate dynamics stream that ``reset(seed)`` re-seeds.
    """

    def __init__(self, cfg: ScenarioConfig, seed: int = 0):
        cfg.validate()
        self.cfg = cfg
        self.seed = int(seed)
        layout = make_rng(self.seed, _LAYOUT_STREAM)
        w, r = cfg.area_width, cfg.hotspot_radius
        lo, hi = min(r, w / 2), max(w - r, w / 2)
        self.hotspot_centers = layout.uniform(lo, hi, (cfg.n_hotspots, 2))
        starts = [tuple(s) for s in cfg.uav_starts[:cfg.n_uavs]]
        while len(starts) < cfg.n_uavs:
            starts.append(tuple(layout.uniform(0.0, w, 2)))
        self.uav_starts = np.asarray(starts, dtype=float)
        self.rng = make_rng(self.seed, _DYNAMICS_STREAM)
        self.world: WorldState | None = None

    # spaces
    @property
    def obs_widths(self) -> dict:
        return obs_widths(self.cfg)

    @property
    def action_dims(self) -> dict:
        return action_dims(self.cfg)

    @property
    def agent_counts(self) -> dict:
        return agent_counts(self.cfg)

    @property
    def state_width(self) -> int:
        return state_width(self.cfg)

    # episode control
    def _place_iotds(self) -> np.ndarray:
        cfg, rng = self.cfg, self.rng
        n = cfg.n_iotds
        n_hot = int(round(cfg.hotspot_fraction * n))
        which = rng.integers(0, cfg.n_hotspots, n_hot)
        radius = cfg.hotspot_radius * np.sqrt(rng.random(n_hot))
        angle = rng.uniform(0.0, 2.0 * np.pi, n_hot)
        hot = self.hotspot_centers[which] + radius[:, None] * np.stack([np.cos(angle), np.sin(angle)], axis=1)
        background = rng.uniform(0.0, cfg.area_width, (n - n_hot, 2))
        return np.clip(np.vstack([hot, background]), 0.0, cfg.area_width)

    def reset(self, seed: int | None = None):
        """Start a new episode; returns ``(observations, global_state)``."""
        if seed is not None:
            self.rng = make_rng(int(seed), _DYNAMICS_STREAM)
        cfg, rng = self.cfg, self.rng
        n, m = cfg.n_iotds, cfg.n_uavs
        pos = self._place_iotds()
        mean_heading = rng.uniform(0.0, 2.0 * np.pi, n)
        iotd = mobility.IotdKinematics(pos, np.full(n, cfg.mean_speed), mean_heading.copy(), mean_heading)
        uav = mobility.UavKinematics(self.uav_starts.copy(), np.zeros(m), np.zeros(m))
        f_local = rng.uniform(*cfg.f_local, n)
        tx_power = dbm_to_watts(rng.uniform(*cfg.tx_power_iotd_dbm, n))
        bandwidth = rng.uniform(*cfg.bandwidth_uav, m)
        f_max = rng.uniform(*cfg.f_uav_max, m)
        tasks = queues.generate_tasks(rng, cfg)
        z = np.zeros(n)
        self.world = WorldState(
            slot=0, iotd=iotd, uav=uav, tasks=tasks, queues=queues.QueueSet(n),
            f_local=f_local, tx_power_w=tx_power, uav_bandwidth=bandwidth, uav_f_max=f_max,
            serving=np.full(n, assoc.HAPS), relay_owner=np.full(n, -1),
            candidates=np.full((m, cfg.uav_capacity), -1), alpha_prev=z.copy(),
            qbar_local=z.copy(), qbar_offload=z.copy(), qbar_edge=z.copy(),
            iotd_drain=z.copy(), uav_drain=np.zeros(m), served_counts=np.zeros((cfg.n_hotspots, m)),
        )
        self._update_candidates()
        obs = self.observe()
        return obs, global_state(obs)

    @property
    def done(self) -> bool:
        return self.world is not None and self.world.slot >= self.cfg.episode_length

    # observations
    def _update_candidates(self) -> None:
        w, cfg = self.world, self.cfg
        ground = mobility.horizontal_distances(w.iotd.position, w.uav.position)
        for u in range(cfg.n_uavs):
            # served IoTDs first, then the nearest others
            order = np.lexsort((np.arange(cfg.n_iotds), ground[:, u], w.serving != u))
            take = order[:cfg.uav_capacity]
            w.candidates[u] = -1
            w.candidates[u, :take.size] = take

    def observe(self) -> dict:
        w, cfg = self.world, self.cfg
        t = w.tasks
        j_n = _unit(t.size, cfg.task_size[1])
        s_n = _unit(t.cycles_per_bit, cfg.cycles_per_bit[1])
        tm_n = _unit(t.t_max, cfg.t_max[1])
        ql = _unit(w.qbar_local, 2.0 * cfg.q_max_local)
        qo = _unit(w.qbar_offload, 2.0 * cfg.q_max_offload)
        qe = _unit(w.qbar_edge, 2.0 * cfg.q_max_edge)
        iotd_obs = np.stack([j_n, s_n, tm_n, ql, qo], axis=1)

        ground = mobility.horizontal_distances(w.iotd.position, w.uav.position)
        diag = cfg.area_width * np.sqrt(2.0)
        upos = w.uav.position / cfg.area_width
        per_iotd = np.stack([w.alpha_prev, j_n, s_n, tm_n, qe], axis=1)  # (N, 5)
        uav_obs = np.zeros((cfg.n_uavs, obs_widths(cfg)["uav"]))
        k = cfg.uav_capacity
        for u in range(cfg.n_uavs):
            cand = w.candidates[u]
            ok = cand >= 0
            d = np.zeros(k)
            d[ok] = np.clip(ground[cand[ok], u] / diag, 0.0, 1.0)
            feats = np.zeros((k, 5))
            feats[ok] = per_iotd[cand[ok]]
            # own position first, then the others by index
            order = [u] + [v for v in range(cfg.n_uavs) if v != u]
            uav_obs[u] = np.concatenate([d, upos[order].reshape(-1), feats.T.reshape(-1)])
        haps_obs = per_iotd.T.reshape(1, -1)
        return {"iotd": iotd_obs, "uav": uav_obs, "haps": haps_obs}

    # dynamics
    def _check_actions(self, actions: dict) -> None:
        dims, counts = self.action_dims, self.agent_counts
        for agent in AGENT_TYPES:
            if agent not in actions:
                raise ValueError(f"missing actions for agent '{agent}'")
            got = np.shape(actions[agent])
            want = (counts[agent], dims[agent])
            if got != want:
                raise ValueError(f"action shape mismatch for agent '{agent}': expected {want}, got {got}")

    def step(self, actions: dict) -> StepResult:
        if self.world is None:
            raise RuntimeError("call reset() before step()")
        if self.done:
            raise RuntimeError("episode finished; call reset()")
        self._check_actions(actions)
        cfg, w, rng = self.cfg, self.world, self.rng
        n, m, tau = cfg.n_iotds, cfg.n_uavs, cfg.slot_duration
        a_iotd = scale_action(actions["iotd"], "iotd", cfg)
        a_uav = scale_action(actions["uav"], "uav", cfg, w.uav_f_max)
        a_haps = scale_action(actions["haps"], "haps", cfg)
        alpha = a_iotd.alpha
        tasks = w.tasks

        # (1)-(2) mobility
        w.iotd = mobility.step_iotd(w.iotd, cfg, rng)
        w.uav, boundary = mobility.step_uav(w.uav, a_uav.heading, a_uav.distance, cfg)

        # (3) association and relaying
        dist = mobility.link_distances(w.iotd.position, w.uav.position, cfg)
        serving = assoc.associate(dist.iotd_uav_ground, tasks.t_max, cfg.uav_coverage_radius, cfg.uav_capacity)
        slot_frac = np.zeros(n)  # each served IoTD's fraction from its UAV's action slot
        has_slot = np.zeros(n, dtype=bool)
        for u in range(m):
            cand = w.candidates[u]
            for k, i in enumerate(cand):
                if i >= 0 and serving[i] == u:
                    slot_frac[i] = actions["uav"][u][2 + k]
                    has_slot[i] = True
        requested = np.where(serving >= 0, slot_frac * w.uav_f_max[np.maximum(serving, 0)], 0.0)
        relay = assoc.decide_relay(serving, requested, tasks.t_max, w.uav_f_max)
        f_uav = np.zeros(n)
        for u in range(m):
            keep = (serving == u) & ~relay & has_slot
            total = max(1.0, float(slot_frac[keep].sum()))
            f_uav[keep] = slot_frac[keep] * w.uav_f_max[u] / total
        f_haps = a_haps.f_alloc

        # (4) channel rates
        qs = w.queues
        j_local, j_offload = queues.split_task(tasks.size, alpha)
        active = (alpha > 0) | (qs.backlog["offload"] > 0)
        on_haps = serving == assoc.HAPS
        relay_owner = np.where(relay, serving, w.relay_owner)
        relay_pipeline = (relay_owner >= 0) & (relay | (qs.backlog["relay"] > 0) | (qs.backlog["relay_edge"] > 0))
        relay_owner = np.where(relay_pipeline, relay_owner, -1)
        relaying_uav = np.zeros(m, dtype=bool)
        relaying_uav[relay_owner[relay_owner >= 0]] = True
        b_direct, b_relay = channel.haps_band_split(bool((on_haps & active).any()), bool(relaying_uav.any()),
                                                    cfg.bandwidth_haps)
        gains = channel.db_to_gain(channel.path_loss_db(dist.iotd_uav, cfg.uav_altitude, cfg))
        rate_uav = channel.iotd_uav_rates(serving, gains, w.tx_power_w, active, w.uav_bandwidth, cfg.noise_uav_w)
        rate_haps = channel.iotd_haps_rates(on_haps, dist.iotd_haps, w.tx_power_w, active, b_direct, cfg)
        uplink = np.where(on_haps, rate_haps, rate_uav)
        uav_relay_rate = channel.uav_haps_rates(relaying_uav, dist.uav_haps, cfg.tx_power_uav_w, b_relay, cfg)
        relay_rate = np.where(relay_owner >= 0, uav_relay_rate[np.maximum(relay_owner, 0)], 0.0)

        # (5) queues
        s = tasks.cycles_per_bit
        pre = {k: v.copy() for k, v in qs.backlog.items()}
        q_l, g_l = queues.step_local_queue(pre["local"], j_local, w.f_local, s, tau)
        q_o, g_o = queues.step_offload_queue(pre["offload"], j_offload, uplink, tau)
        edge_in = np.where(relay, 0.0, g_o)
        f_edge = np.where(on_haps, f_haps, np.where(relay, 0.0, f_uav))
        # an IoTD with both a direct HAPS queue and relayed backlog splits its HAPS share
        shared = on_haps & (relay_owner >= 0)
        f_edge = np.where(shared, 0.5 * f_edge, f_edge)
        f_relay_edge = np.where(relay_owner >= 0, np.where(shared, 0.5 * f_haps, f_haps), 0.0)
        q_e, g_e = queues.step_edge_queue(pre["edge"], edge_in, f_edge, s, tau)
        q_r, q_re, g_r, g_re = queues.step_relay_queues(pre["relay"], pre["relay_edge"], g_o, relay_rate,
                                                        f_relay_edge, s, tau, relay)
        qs.record("local", q_l, j_local, g_l)
        qs.record("offload", q_o, j_offload, g_o)
        qs.record("edge", q_e, edge_in, g_e)
        qs.record("relay", q_r, np.where(relay, g_o, 0.0), g_r)
        qs.record("relay_edge", q_re, g_r, g_re)

        # (6) delays
        delays = queues.compute_delays(q_l, q_o, q_e, q_r, q_re, cycles_per_bit=s, f_local=w.f_local,
                                       uplink_rate=uplink, f_edge=f_edge, relay_rate=relay_rate,
                                       f_relay_edge=f_relay_edge, t_max=tasks.t_max, tau=tau)
        edge_residual = (pre["edge"] - g_e) + (pre["relay"] - g_r) + (pre["relay_edge"] - g_re)
        w.qbar_local, w.qbar_offload, w.qbar_edge = queues.update_longterm_delays(
            qs, local_backlog=pre["local"] - g_l, offload_backlog=pre["offload"] - g_o,
            edge_backlog=edge_residual, local_arrivals=j_local, offload_arrivals=j_offload,
            edge_arrivals=g_o, tau=tau)

        # (7) energy and batteries
        rep = energy.compute_energies(delays, f_local=w.f_local, tx_power_w=w.tx_power_w, f_edge=f_edge,
                                      uav_tx_power_w=cfg.tx_power_uav_w, f_relay_edge=f_relay_edge,
                                      uav_distance=a_uav.distance, cfg=cfg)
        uav_slot = rep.traj.copy()
        np.add.at(uav_slot, relay_owner[relay_owner >= 0], rep.relay_tx[relay_owner >= 0])
        w.iotd_drain, w.uav_drain, iotd_batt, uav_batt = energy.update_batteries(
            w.iotd_drain, w.uav_drain, rep.local + rep.offload_tx, uav_slot, cfg.battery_iotd, cfg.battery_uav)

        # (8) rewards
        com2 = rep.com2
        r_iotd, p_iotd = reward_iotd(com2, serving, rep.traj, w.qbar_local, w.qbar_offload, cfg)
        r_uav, p_uav = reward_uav(com2, serving, rep.traj, w.qbar_edge, boundary, w.uav.position,
                                  dist.iotd_uav_ground, cfg)
        r_haps, p_haps = reward_haps(com2, serving, relay_owner >= 0, w.qbar_edge, cfg)
        rewards = {"iotd": r_iotd, "uav": r_uav, "haps": np.array([r_haps])}

        # (9) fairness
        member = assoc.hotspot_membership(w.iotd.position, self.hotspot_centers, cfg.hotspot_radius)
        w.served_counts = w.served_counts + assoc.served_hotspot_counts(serving, member, cfg.n_hotspots, m)

        # (10) bookkeeping, next tasks, observations
        w.serving, w.relay_owner, w.alpha_prev = serving, relay_owner, alpha.copy()
        w.slot += 1
        w.tasks = queues.generate_tasks(rng, cfg)
        self._update_candidates()
        obs = self.observe()

        uav_dist = mobility.uav_pair_distances(w.uav.position)
        iu = np.triu_indices(m, 1)
        f_used = f_edge + f_relay_edge
        offloaders = alpha > 0
        viol_l = int((w.qbar_local > cfg.q_max_local).sum())
        viol_o = int((w.qbar_offload > cfg.q_max_offload).sum())
        viol_e = int((w.qbar_edge > cfg.q_max_edge).sum())
        metrics = {
            "slot": w.slot,
            "reward_iotd": float(r_iotd.mean()),
            "reward_uav": float(r_uav.mean()),
            "reward_haps": float(r_haps),
            "e_all": rep.e_all,
            "mean_alpha": float(alpha.mean()),
            "mean_f_alloc": float(f_used[offloaders].mean()) if offloaders.any() else 0.0,
            "mean_delay": float(delays.total.mean()),
            "fairness": assoc.fleet_fairness(w.served_counts),
            "deadline_violations": int(delays.deadline_violated.sum()),
            "queue_violations": viol_l + viol_o + viol_e,
            "local_violations": viol_l,
            "offload_violations": viol_o,
            "edge_violations": viol_e,
            "boundary_violations": int((boundary > 0).sum()),
            "collisions": int((uav_dist[iu] < cfg.d_min).sum()),
            "battery_violations": int(iotd_batt.sum() + uav_batt.sum()),
            "n_relayed": int(relay.sum()),
            "n_on_uav": int((serving >= 0).sum()),
        }
        info = {
            "energy": rep, "delays": delays, "serving": serving, "relay": relay,
            "f_uav": f_uav, "f_haps": f_haps, "f_edge": f_edge, "f_relay_edge": f_relay_edge,
            "uplink": uplink, "relay_rate": relay_rate, "boundary_violation": boundary,
            "p_iotd": p_iotd, "p_haps": p_haps, **p_uav,
        }
        return StepResult(obs, rewards, global_state(obs), metrics, info)


def _unit(x, hi):
    x = np.asarray(x, dtype=float)
    if hi <= 0:
        return np.zeros_like(x)
    return np.clip(x / hi, 0.0, 1.0)


def global_state(obs: dict) -> np.ndarray:
    """Concatenation of every agent's observation: IoTDs, then UAVs, then the HAPS."""
    return np.concatenate([np.asarray(obs[k]).reshape(-1) for k in AGENT_TYPES])
