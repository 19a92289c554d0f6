"""Heterogeneous MAPPO: one shared actor/critic pair per agent type, centralized critics.

Variants:

* ``mappo-bd``: Beta policies for every group.
* ``mappo-nd``: Gaussian policies (samples clipped into [0, 1] for the environment).
* ``po-mappo-bd``: Beta policies, but UAV heading/distance are uniform random draws
  and excluded from the UAV policy's log-prob and entropy.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .config import ScenarioConfig, TrainConfig, dumps_config, loads_config, make_rng
from .env import AGENT_TYPES, MaginEnv, action_dims, agent_counts, obs_widths, state_width
from .nn import MLP, Adam, clip_grad_norm, load_checkpoint, make_head, save_checkpoint

log = logging.getLogger(__name__)

_POLICY_STREAM = 2
_INIT_STREAM = 3
_TRAJECTORY_STREAM = 4
UAV_TRAJECTORY_DIMS = (0, 1)


class TrainingError(RuntimeError):
    """Training hit a non-finite loss; the message names the episode, epoch and group."""


# estimators and losses

def compute_gae(rewards, values, bootstrap, gamma: float, lam: float):
    """GAE along axis 0. Returns ``(advantages, value_targets)``.

    ``rewards`` and ``values`` are (T, ...) arrays; ``bootstrap`` is V(s_T)
    (0 for a finished finite-horizon episode).
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    adv = np.zeros_like(rewards)
    next_value = np.broadcast_to(np.asarray(bootstrap, dtype=float), rewards.shape[1:])
    running = np.zeros(rewards.shape[1:])
    for t in range(rewards.shape[0] - 1, -1, -1):
        delta = rewards[t] + gamma * next_value - values[t]
        running = delta + gamma * lam * running
        adv[t] = running
        next_value = values[t]
    return adv, adv + values


def critic_loss(critic: MLP, inputs, targets):
    """Mean of 0.5 * (V(s) - target)^2 and its parameter gradient."""
    out, cache = critic.forward(inputs)
    v = out[:, 0]
    diff = v - np.asarray(targets, dtype=float)
    b = diff.shape[0]
    loss = 0.5 * float(np.mean(diff * diff))
    grad = critic.backward(cache, (diff / b)[:, None])
    return loss, grad


@dataclass
class ActorStats:
    loss: float
    surrogate: float
    entropy: float
    clip_fraction: float
    excluded: int
    approx_kl: float


def actor_loss(actor: MLP, head, obs, actions, old_logp, advantages, clip: float, entropy_coef: float,
               mask=None):
    """Negated clipped surrogate plus entropy bonus, with its parameter gradient.

    Samples whose probability ratio is non-finite are dropped from the batch
    and counted in ``ActorStats.excluded``.
    """
    logits, cache = actor.forward(obs)
    params = head.params(logits)
    logp = head.log_prob(params, actions, mask)
    ent = head.entropy(params, mask)
    adv = np.asarray(advantages, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        log_ratio = logp - np.asarray(old_logp, dtype=float)
        ratio = np.exp(log_ratio)
    ok = np.isfinite(ratio)
    excluded = int((~ok).sum())
    b = max(int(ok.sum()), 1)
    r = np.where(ok, ratio, 1.0)
    unclipped = r * adv
    clipped = np.clip(r, 1.0 - clip, 1.0 + clip) * adv
    surr = np.minimum(unclipped, clipped)
    okf = ok.astype(float)
    surrogate = float((surr * okf).sum() / b)
    entropy = float((ent * okf).sum() / b)
    loss = -(surrogate + entropy_coef * entropy)
    # d surr / d logp = ratio * adv where the unclipped branch is the minimum
    active = (unclipped <= clipped) & ok
    w_logp = -np.where(active, unclipped, 0.0) / b
    w_ent = -entropy_coef * okf / b
    g_logits = head.grad_logits(logits, actions, w_logp, w_ent, mask)
    grad = actor.backward(cache, g_logits)
    stats = ActorStats(loss, surrogate, entropy, float((np.abs(r - 1.0) > clip)[ok].mean()) if ok.any() else 0.0,
                       excluded, float(np.mean((r - 1.0) - np.log(r))) if ok.any() else 0.0)
    return loss, grad, stats


class RunningNorm:
    """Running mean/variance (parallel-merge form) for value targets."""

    def __init__(self, mean: float = 0.0, var: float = 1.0, count: float = 1e-4):
        self.mean, self.var, self.count = mean, var, count

    def update(self, x) -> None:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size == 0:
            return
        b_mean, b_var, b_n = float(x.mean()), float(x.var()), x.size
        delta = b_mean - self.mean
        total = self.count + b_n
        self.mean += delta * b_n / total
        m2 = self.var * self.count + b_var * b_n + delta ** 2 * self.count * b_n / total
        self.var = m2 / total
        self.count = total

    @property
    def std(self) -> float:
        return float(np.sqrt(max(self.var, 1e-8)))

    def state(self) -> dict:
        return {"mean": self.mean, "var": self.var, "count": self.count}


# agent groups

@dataclass
class AgentGroup:
    """Shared actor/critic for every member of one agent type."""

    name: str
    n_members: int
    obs_dim: int
    action_dim: int
    critic_dim: int
    head_kind: str
    actor: MLP
    critic: MLP
    actor_opt: Adam
    critic_opt: Adam
    learned_mask: np.ndarray | None = None
    value_norm: RunningNorm = field(default_factory=RunningNorm)

    def __post_init__(self):
        self.head = make_head(self.head_kind, self.action_dim)

    @classmethod
    def create(cls, name, n_members, obs_dim, action_dim, critic_dim, head_kind, hidden, actor_lr, critic_lr,
               rng, learned_mask=None, initial_means=None):
        actor = MLP.initialized((obs_dim, *hidden, 2 * action_dim), rng, output_scale=0.01)
        if initial_means is not None:
            actor.biases[-1][:] = make_head(head_kind, action_dim).bias_for_mean(initial_means)
        critic = MLP.initialized((critic_dim, *hidden, 1), rng, output_scale=1.0)
        return cls(name, n_members, obs_dim, action_dim, critic_dim, head_kind, actor, critic,
                   Adam(actor.n_params, actor_lr), Adam(critic.n_params, critic_lr), learned_mask)

    def dist_params(self, obs):
        return self.head.params(self.actor(obs))

    def act(self, obs, rng, deterministic: bool = False):
        """Returns ``(stored_sample, env_action, log_prob)`` for every member."""
        params = self.dist_params(obs)
        if deterministic:
            stored = self.head.mode(params)
            env_action = self.head.env_action(stored)
        else:
            stored, env_action = self.head.sample(params, rng)
        return stored, env_action, self.head.log_prob(params, stored, self.learned_mask)

    def value(self, critic_in):
        return self.critic(critic_in)[:, 0] * self.value_norm.std + self.value_norm.mean

    def state(self) -> dict:
        return {
            "name": self.name, "n_members": self.n_members, "obs_dim": self.obs_dim,
            "action_dim": self.action_dim, "critic_dim": self.critic_dim, "head": self.head_kind,
            "actor_sizes": list(self.actor.sizes), "actor": self.actor.params,
            "critic_sizes": list(self.critic.sizes), "critic": self.critic.params,
            "actor_opt": self.actor_opt.state_dict(), "critic_opt": self.critic_opt.state_dict(),
            "learned_mask": None if self.learned_mask is None else self.learned_mask.astype(float),
            "value_norm": self.value_norm.state(),
        }

    @classmethod
    def from_state(cls, s: dict) -> "AgentGroup":
        mask = s.get("learned_mask")
        return cls(s["name"], int(s["n_members"]), int(s["obs_dim"]), int(s["action_dim"]), int(s["critic_dim"]),
                   s["head"], MLP(s["actor_sizes"], s["actor"]), MLP(s["critic_sizes"], s["critic"]),
                   Adam.from_state(s["actor_opt"]), Adam.from_state(s["critic_opt"]),
                   None if mask is None else np.asarray(mask) > 0.5, RunningNorm(**s["value_norm"]))


def build_groups(cfg: ScenarioConfig, train: TrainConfig, variant: str | None = None) -> dict:
    variant = variant or train.variant
    head = "gaussian" if variant == "mappo-nd" else "beta"
    rng = make_rng(train.seed, _INIT_STREAM)
    widths, dims, counts = obs_widths(cfg), action_dims(cfg), agent_counts(cfg)
    groups = {}
    for name in AGENT_TYPES:
        mask = None
        if variant == "po-mappo-bd" and name == "uav":
            mask = np.ones(dims[name], dtype=bool)
            mask[list(UAV_TRAJECTORY_DIMS)] = False
        groups[name] = AgentGroup.create(
            name, counts[name], widths[name], dims[name], critic_width(cfg, name), head, train.hidden,
            getattr(train, f"actor_lr_{name}"), getattr(train, f"critic_lr_{name}"), rng, mask,
            initial_action_means(name, cfg))
    return groups


def initial_action_means(name: str, cfg: ScenarioConfig) -> np.ndarray:
    """Initial policy means: 0.5 everywhere except resource fractions, which start at 1/k.

    With k fractions averaging 1/k the summed request sits at capacity, where the
    max(1, sum) normalization still lets the allocation level respond to the policy.
    """
    dims = action_dims(cfg)[name]
    means = np.full(dims, 0.5)
    if name == "uav":
        means[2:] = 1.0 / cfg.uav_capacity
    elif name == "haps":
        means[:] = 1.0 / cfg.n_iotds
    return means


def critic_width(cfg: ScenarioConfig, name: str) -> int:
    return state_width(cfg) + obs_widths(cfg)[name] + 1


def critic_inputs(state, obs, time_left: float) -> np.ndarray:
    """Per-member critic input: global state, the member's own observation, and the
    fraction of the episode still to run (values of a finite horizon depend on it)."""
    obs = np.asarray(obs)
    n = obs.shape[0]
    return np.hstack([np.broadcast_to(state, (n, state.shape[0])), obs, np.full((n, 1), float(time_left))])


# rollouts

@dataclass
class RolloutBuffer:
    """Per-group (T, members, ...) arrays for one episode."""

    obs: dict = field(default_factory=dict)
    critic_in: dict = field(default_factory=dict)
    actions: dict = field(default_factory=dict)
    log_probs: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)
    rewards: dict = field(default_factory=dict)

    def add(self, name, obs, critic_in, actions, log_probs, values, rewards):
        for store, item in ((self.obs, obs), (self.critic_in, critic_in), (self.actions, actions),
                            (self.log_probs, log_probs), (self.values, values), (self.rewards, rewards)):
            store.setdefault(name, []).append(np.asarray(item, dtype=float))

    def stacked(self, name):
        return {k: np.stack(getattr(self, k)[name]) for k in
                ("obs", "critic_in", "actions", "log_probs", "values", "rewards")}

    def __len__(self):
        return len(next(iter(self.rewards.values()), []))


def episode_aggregate(rows: list[dict]) -> dict:
    """Episode summary: mean per-slot rewards and rates, summed energy and violation counts."""
    agg = {}
    for key in ("reward_iotd", "reward_uav", "reward_haps", "mean_alpha", "mean_f_alloc", "mean_delay"):
        agg[key] = float(np.mean([r[key] for r in rows]))
    agg["e_all"] = float(np.sum([r["e_all"] for r in rows]))
    agg["fairness"] = rows[-1]["fairness"]
    for key in ("deadline_violations", "queue_violations", "local_violations", "offload_violations",
                "edge_violations", "boundary_violations", "collisions", "battery_violations", "n_relayed",
                "n_on_uav"):
        agg[key] = int(np.sum([r[key] for r in rows]))
    return agg


def run_episode(env: MaginEnv, groups: dict, policy_rng, traj_rng=None, deterministic: bool = False,
                buffer: RolloutBuffer | None = None):
    """Roll out one episode; returns per-slot metric rows."""
    obs, state = env.reset()
    rows = []
    while not env.done:
        actions = {}
        pending = {}
        for name in AGENT_TYPES:
            g = groups[name]
            stored, env_action, logp = g.act(obs[name], policy_rng, deterministic)
            if g.learned_mask is not None:
                free = ~g.learned_mask
                draws = traj_rng.random((g.n_members, int(free.sum())))
                stored = stored.copy()
                env_action = env_action.copy()
                stored[:, free] = draws
                env_action[:, free] = draws
            actions[name] = env_action
            if buffer is not None:
                c_in = critic_inputs(state, obs[name], 1.0 - env.world.slot / env.cfg.episode_length)
                pending[name] = (obs[name], c_in, stored, logp, g.value(c_in))
        res = env.step(actions)
        if buffer is not None:
            for name in AGENT_TYPES:
                buffer.add(name, *pending[name], res.rewards[name])
        rows.append(res.metrics)
        obs, state = res.obs, res.state
    return rows


# updates

def _flatten(x):
    return x.reshape(x.shape[0] * x.shape[1], *x.shape[2:])


def update_group(g: AgentGroup, batch: dict, train: TrainConfig, episode: int):
    """PPO epochs for one group on one episode of data; returns the last epoch's stats."""
    adv, targets = compute_gae(batch["rewards"], batch["values"], 0.0, train.gamma, train.gae_lambda)
    adv = _flatten(adv)
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    targets = _flatten(targets)
    g.value_norm.update(targets)
    norm_targets = (targets - g.value_norm.mean) / g.value_norm.std
    obs, c_in = _flatten(batch["obs"]), _flatten(batch["critic_in"])
    actions, old_logp = _flatten(batch["actions"]), _flatten(batch["log_probs"])
    stats = {}
    n = adv.shape[0]
    # entropy bonus per learned action dimension, so wide heads (HAPS: N dims) explore no harder than narrow ones
    n_dims = g.action_dim if g.learned_mask is None else int(g.learned_mask.sum())
    entropy_coef = train.entropy_coef / max(n_dims, 1)
    for epoch in range(train.ppo_epochs):
        chunks = np.array_split(np.arange(n), train.minibatches)
        for idx in chunks:
            c_loss, c_grad = critic_loss(g.critic, c_in[idx], norm_targets[idx])
            a_loss, a_grad, a_stats = actor_loss(g.actor, g.head, obs[idx], actions[idx], old_logp[idx],
                                                 adv[idx], train.clip, entropy_coef, g.learned_mask)
            if not (np.isfinite(c_loss) and np.isfinite(a_loss)):
                raise TrainingError(f"non-finite loss in group '{g.name}' at episode {episode}, epoch {epoch}")
            c_norm = clip_grad_norm(c_grad, train.max_grad_norm)
            g.critic_opt.step(g.critic.params, c_grad)
            a_norm = clip_grad_norm(a_grad, train.max_grad_norm)
            g.actor_opt.step(g.actor.params, a_grad)
            stats = {"critic_loss": c_loss, "actor_loss": a_loss, "entropy": a_stats.entropy,
                     "clip_fraction": a_stats.clip_fraction, "excluded": a_stats.excluded,
                     "critic_grad_norm": c_norm, "actor_grad_norm": a_norm}
    return stats


@dataclass
class TrainResult:
    groups: dict
    history: list  # per-episode aggregate dicts
    slot_rows: list  # per-episode lists of per-slot metric dicts
    variant: str


def train(cfg: ScenarioConfig, train_cfg: TrainConfig, variant: str | None = None, checkpoint_dir=None,
          on_episode=None) -> TrainResult:
    """Full training loop: one rollout episode then PPO epochs per group, per iteration.

    ``on_episode(episode, aggregate, slot_rows)`` is called after each update.
    """
    cfg.validate()
    train_cfg.validate()
    variant = variant or train_cfg.variant
    env = MaginEnv(cfg, train_cfg.seed)
    groups = build_groups(cfg, train_cfg, variant)
    policy_rng = make_rng(train_cfg.seed, _POLICY_STREAM)
    traj_rng = make_rng(train_cfg.seed, _TRAJECTORY_STREAM)
    history, slot_rows = [], []
    for episode in range(1, train_cfg.episodes + 1):
        rows = []
        buffers = []
        for _ in range(train_cfg.rollout_episodes):
            buf = RolloutBuffer()
            rows = run_episode(env, groups, policy_rng, traj_rng, buffer=buf)
            buffers.append(buf)
        agg = {"episode": episode, **episode_aggregate(rows)}
        for name in AGENT_TYPES:
            stacks = [b.stacked(name) for b in buffers]
            batch = {k: np.concatenate([st[k] for st in stacks], axis=1) for k in stacks[0]}
            stats = update_group(groups[name], batch, train_cfg, episode)
            for k, v in stats.items():
                agg[f"{name}_{k}"] = v
        history.append(agg)
        slot_rows.append(rows)
        if on_episode is not None:
            on_episode(episode, agg, rows)
        if checkpoint_dir is not None and train_cfg.checkpoint_every > 0 and (
                episode % train_cfg.checkpoint_every == 0 or episode == train_cfg.episodes):
            save_run_checkpoint(f"{checkpoint_dir}/ep{episode:03d}.ckpt", groups, cfg, train_cfg, variant, episode)
    return TrainResult(groups, history, slot_rows, variant)


# checkpoints and evaluation

def save_run_checkpoint(path, groups, cfg, train_cfg, variant, episode):
    payload = {"variant": variant, "episode": episode, "config": dumps_config(cfg, train_cfg),
               "groups": {name: g.state() for name, g in groups.items()}}
    return save_checkpoint(path, payload)


def load_run_checkpoint(path):
    """Returns ``(groups, scenario, train_cfg, variant)``."""
    payload = load_checkpoint(path)
    cfg, train_cfg = loads_config(payload["config"])
    groups = {name: AgentGroup.from_state(s) for name, s in payload["groups"].items()}
    return groups, cfg, train_cfg, payload["variant"]


def check_compatible(groups: dict, cfg: ScenarioConfig) -> None:
    widths, dims, counts = obs_widths(cfg), action_dims(cfg), agent_counts(cfg)
    for name in AGENT_TYPES:
        if name not in groups:
            raise ValueError(f"checkpoint lacks a policy for agent '{name}'")
        g = groups[name]
        want = (widths[name], dims[name], critic_width(cfg, name), counts[name])
        got = (g.obs_dim, g.action_dim, g.critic_dim, g.n_members)
        if want != got:
            raise ValueError(f"checkpoint/config shape mismatch for agent '{name}': "
                             f"checkpoint (obs, action, critic, members) = {got}, config needs {want}")


def evaluate(groups: dict, cfg: ScenarioConfig, episodes: int, seed: int = 0, deterministic: bool = True):
    """Roll out ``episodes`` episodes and average the episode aggregates.

    Deterministic mode acts on the distribution mean; randomized UAV
    trajectory dims (po-mappo-bd) stay random.
    """
    check_compatible(groups, cfg)
    if episodes <= 0:
        raise ValueError("episodes must be positive")
    env = MaginEnv(cfg, seed)
    policy_rng = make_rng(seed, _POLICY_STREAM)
    traj_rng = make_rng(seed, _TRAJECTORY_STREAM)
    aggs = [episode_aggregate(run_episode(env, groups, policy_rng, traj_rng, deterministic))
            for _ in range(episodes)]
    return {k: float(np.mean([a[k] for a in aggs])) for k in aggs[0]}
