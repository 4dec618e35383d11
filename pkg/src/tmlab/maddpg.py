"""Deterministic-actor / centralized-critic learners for the team game.

Each agent owns an actor mapping its 15-float observation to a 2-float
acceleration command (tanh head), and a critic scoring the full board
state joined with all four agents' actions. Targets are slow copies mixed
in with polyak_update. The ensemble trainer reuses the same primitive
update steps on sub-batches, so they are exposed as free functions
operating on explicit nets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .env import ACT_DIM, GLOBAL_DIM, N_AGENTS, OBS_DIM
from .errors import InputError, ShapeError
from .nets import Adam, Mlp, MlpGrads, polyak_update, _as_batch

CRITIC_IN = GLOBAL_DIM + N_AGENTS * ACT_DIM


@dataclass(frozen=True)
class TrainHyper:
    gamma: float = 0.95
    lr_actor: float = 1e-4
    lr_critic: float = 1e-3
    polyak_rate: float = 0.01
    batch: int = 1024
    min_buffer_factor: int = 10   # updates start at size >= factor * batch
    noise_std: float = 0.3
    noise_decay: float = 0.9999
    noise_floor: float = 0.02
    hidden: tuple = (64, 64)
    replay_capacity: int = 1_000_000

    def __post_init__(self):
        if not (0.0 <= self.gamma <= 1.0):
            raise InputError("gamma must lie in [0, 1]")
        if self.batch < 1 or self.replay_capacity < self.batch:
            raise InputError("need replay_capacity >= batch >= 1")
        if not (0.0 < self.noise_decay <= 1.0):
            raise InputError("noise_decay must lie in (0, 1]")


def noise_level(hyper, episode):
    """Exploration noise stddev for a 1-based episode index."""
    return max(hyper.noise_floor,
               hyper.noise_std * hyper.noise_decay ** (episode - 1))


def make_actor(rng, hyper):
    return Mlp([OBS_DIM, *hyper.hidden, ACT_DIM], hidden="relu",
               output="tanh", rng=rng)


def make_critic(rng, hyper):
    return Mlp([CRITIC_IN, *hyper.hidden, 1], hidden="relu",
               output="identity", rng=rng)


class MaddpgAgent:
    """Single-policy learner: one actor, one critic, slow targets."""

    def __init__(self, rng, hyper):
        self.actor = make_actor(rng, hyper)
        self.critic = make_critic(rng, hyper)
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()
        self.actor_opt = Adam(self.actor, lr=hyper.lr_actor)
        self.critic_opt = Adam(self.critic, lr=hyper.lr_critic)

    def act(self, obs, noise_std, rng):
        return act(self.actor, obs, noise_std, rng)

    def target_action(self, obs):
        return self.target_actor.forward_batch(obs)

    def soft_update_targets(self, rate):
        polyak_update(self.target_actor, self.actor, rate)
        polyak_update(self.target_critic, self.critic, rate)


def make_agents(rng, hyper):
    return [MaddpgAgent(rng, hyper) for _ in range(N_AGENTS)]


def act(actor, obs, noise_std, rng):
    """Actor output plus Gaussian exploration noise, clipped to [-1, 1]."""
    a = actor.forward(obs)
    if noise_std > 0.0:
        a = a + noise_std * rng.standard_normal(ACT_DIM)
    return np.clip(a, -1.0, 1.0)


def critic_input(glob, actions):
    """Join board state (B, 20) and joint actions (B, 4, 2) -> (B, 28)."""
    B = glob.shape[0]
    return np.ascontiguousarray(
        np.concatenate([glob, actions.reshape(B, N_AGENTS * ACT_DIM)], axis=1))


def critic_target_values(agents, batch, gamma):
    """TD targets y_i = r_i + gamma * (1 - done) * Q'_i(x', a') per agent,
    with a' from every agent's target actor. Returns (B, 4)."""
    B = batch.size
    next_acts = np.empty((B, N_AGENTS, ACT_DIM))
    for j, ag in enumerate(agents):
        next_acts[:, j] = ag.target_action(
            np.ascontiguousarray(batch.obs_next[:, j]))
    cin = critic_input(batch.glob_next, next_acts)
    keep = 1.0 - batch.done
    ys = np.empty((B, N_AGENTS))
    for i, ag in enumerate(agents):
        q = ag.target_critic.forward_batch(cin)[:, 0]
        ys[:, i] = batch.rewards[:, i] + gamma * keep * q
    return ys


def critic_step(critic, critic_opt, cin, y):
    """One MSE descent step on Q(x, a) toward y.

    cin is the joined (B, 28) critic input from critic_input; passing it in
    lets one joined batch feed all four critics. Returns the pre-step loss.
    """
    X, _ = _as_batch(cin, critic.in_dim, "cin")
    B = X.shape[0]
    yv = np.ascontiguousarray(y, dtype=np.float64)
    if yv.shape != (B,):
        raise ShapeError(f"y must have shape ({B},), got {yv.shape}")
    grads = MlpGrads.from_flat(np.empty_like(critic.theta), critic.sizes)
    diff = kernels.critic_mse_step(critic.theta, critic.sizes,
                                   critic._hidden_code, critic._output_code,
                                   X, yv, grads.flat)
    loss = float(diff @ diff) / B
    critic_opt.step(grads)
    return loss


def critic_update(agent, i, batch, ys):
    cin = critic_input(batch.glob, batch.actions)
    return critic_step(agent.critic, agent.critic_opt, cin, ys[:, i])


def actor_step(actor, actor_opt, critic, obs_i, glob, actions_joint,
               agent_index):
    """One ascent step on mean_b Q(x_b, a_1..a_4) where only agent_index's
    action comes from the live actor; the rest replay the batch. The critic
    is read-only here; only its input gradient is evaluated.

    actions_joint (B, 4, 2) is scratch: column agent_index is overwritten
    in place, so callers hand in a copy they do not keep. Returns the
    pre-step objective.
    """
    X, _ = _as_batch(obs_i, actor.in_dim, "obs_i")
    B = X.shape[0]
    G, _ = _as_batch(glob, GLOBAL_DIM, "glob")
    acts = np.asarray(actions_joint, dtype=np.float64)
    if acts.shape != (B, N_AGENTS, ACT_DIM):
        raise ShapeError(
            f"actions_joint must be {(B, N_AGENTS, ACT_DIM)}, "
            f"got {acts.shape}")
    if not acts.flags.c_contiguous:
        acts = np.ascontiguousarray(acts)
    act_flat = acts.reshape(B, N_AGENTS * ACT_DIM)
    grads = MlpGrads.from_flat(np.empty_like(actor.theta), actor.sizes)
    q = kernels.actor_critic_ascent(
        actor.theta, actor.sizes, actor._hidden_code, actor._output_code,
        critic.theta, critic.sizes, critic._hidden_code, critic._output_code,
        X, G, act_flat, agent_index, ACT_DIM, grads.flat)
    objective = float(q.sum()) / B
    grads.negate()
    actor_opt.step(grads)
    return objective


def actor_update(agent, i, batch):
    obs_i = np.ascontiguousarray(batch.obs[:, i])
    return actor_step(agent.actor, agent.actor_opt, agent.critic,
                      obs_i, batch.glob, batch.actions.copy(), i)
