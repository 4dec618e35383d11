"""Ensemble policies with a learned winning/losing switch.

Each agent keeps two actors: a winning policy (label 1) and a losing
policy (label 2). After every step, both teams are tagged by comparing
the best member critic value on the executed joint action: the team whose
maximum strictly exceeds the other's is winning, and a tie makes both
losing. A per-team classifier (the controller) is trained on these tags
and picks which policy each team deploys at action time. Policy updates
are partitioned by the stored tag so winning experience never trains the
losing policy, and vice versa.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env import ACT_DIM, GLOBAL_DIM, N_AGENTS
from .errors import InputError, NotReadyError, ShapeError
from .maddpg import (TrainHyper, actor_step, critic_input, make_actor,
                     make_critic)
from .nets import Adam, Mlp, cross_entropy, polyak_update

WIN = 1
LOSE = 2
LABELS = (WIN, LOSE)

CONTROLLER_HIDDEN = (64, 32)


@dataclass(frozen=True)
class CmaddpgHyper(TrainHyper):
    explore_const: float = 0.0        # 0 -> episodes / 5 at run start
    controller_interval: int = 20     # episodes between controller fits
    controller_lr: float = 1e-3
    controller_window: int = 50_000
    controller_batch: int = 256
    controller_passes: int = 10

    def __post_init__(self):
        super().__post_init__()
        if self.controller_interval < 1:
            raise InputError("controller_interval must be >= 1")
        if self.controller_window < 1 or self.controller_batch < 1:
            raise InputError("controller window/batch must be >= 1")


def explore_constant(hyper, episodes):
    """The time constant C of the exploration gate for a run length."""
    if hyper.explore_const > 0.0:
        return hyper.explore_const
    return max(1.0, episodes / 5.0)


def exploration_gate(episode, c, rng):
    """True with probability exp(-episode / C); episode is 1-based."""
    if episode < 1:
        raise InputError("episode numbering starts at 1")
    return rng.uniform() < math.exp(-episode / c)


class EnsembleAgent:
    """Two actors sharing one centralized critic and its slow targets."""

    def __init__(self, rng, hyper):
        self.policies = {lab: make_actor(rng, hyper) for lab in LABELS}
        self.critic = make_critic(rng, hyper)
        self.target_policies = {lab: self.policies[lab].copy()
                                for lab in LABELS}
        self.target_critic = self.critic.copy()
        self.policy_opts = {lab: Adam(self.policies[lab], lr=hyper.lr_actor)
                            for lab in LABELS}
        self.critic_opt = Adam(self.critic, lr=hyper.lr_critic)

    def act(self, obs, label, noise_std, rng):
        a = self.policies[label].forward(obs)
        if noise_std > 0.0:
            a = a + noise_std * rng.standard_normal(ACT_DIM)
        return np.clip(a, -1.0, 1.0)

    def soft_update_targets(self, rate):
        for lab in LABELS:
            polyak_update(self.target_policies[lab], self.policies[lab], rate)
        polyak_update(self.target_critic, self.critic, rate)


def label_teams(agents, glob, joint_actions):
    """Winning/losing tags for the executed step (one per agent).

    Every agent's critic scores the same (board state, joint action)
    pair; a team is winning iff its best member value strictly exceeds
    the other team's best. Equal maxima tag both teams losing.
    """
    glob = np.asarray(glob, dtype=np.float64)
    acts = np.asarray(joint_actions, dtype=np.float64)
    if glob.shape != (GLOBAL_DIM,) or acts.shape != (N_AGENTS, ACT_DIM):
        raise ShapeError("label_teams expects one state and one joint action")
    cin = critic_input(glob[None, :], acts[None, :, :])
    q = np.array([ag.critic.forward_batch(cin)[0, 0] for ag in agents])
    return labels_from_values(q)


def labels_from_values(q):
    """The tag rule on four member critic values. Kept separate so tests
    can drive it exhaustively without networks."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (N_AGENTS,):
        raise ShapeError("need one critic value per agent")
    best0 = max(q[0], q[1])
    best1 = max(q[2], q[3])
    if best0 > best1:
        return np.array([WIN, WIN, LOSE, LOSE], dtype=np.int8)
    if best1 > best0:
        return np.array([LOSE, LOSE, WIN, WIN], dtype=np.int8)
    return np.array([LOSE, LOSE, LOSE, LOSE], dtype=np.int8)


class TeamController:
    """Classifier from board state to 'use the winning policy?'.

    Holds its own sliding window of (state, tag) pairs and refits on them
    by minibatch cross entropy every few episodes.
    """

    def __init__(self, rng, hyper):
        self.net = Mlp([GLOBAL_DIM, *CONTROLLER_HIDDEN, 1], hidden="relu",
                       output="sigmoid", rng=rng)
        self.opt = Adam(self.net, lr=hyper.controller_lr)
        self.batch = hyper.controller_batch
        self.passes = hyper.controller_passes
        cap = hyper.controller_window
        self._xs = np.zeros((cap, GLOBAL_DIM))
        self._labels = np.zeros(cap, dtype=np.int8)
        self._next = 0
        self._size = 0

    def push(self, x, label):
        if label not in LABELS:
            raise InputError(f"label must be 1 or 2, got {label}")
        i = self._next
        self._xs[i] = x
        self._labels[i] = label
        self._next = (i + 1) % self._xs.shape[0]
        self._size = min(self._size + 1, self._xs.shape[0])

    def __len__(self):
        return self._size

    def predict(self, x):
        """Probability that the winning policy is the right pick."""
        return float(self.net.forward(x)[0])

    def select(self, x):
        return WIN if self.predict(x) >= 0.5 else LOSE

    def update(self, rng):
        """Refit on the stored window; returns the pre-update mean loss."""
        n = self._size
        if n == 0:
            raise NotReadyError("controller has no labeled states yet")
        xs = self._xs[:n]
        labels = self._labels[:n]
        p0 = self.net.forward_batch(xs)[:, 0]
        pre_loss = float(np.mean(cross_entropy(p0, labels)[0]))
        for _ in range(self.passes):
            order = rng.permutation(n)
            for lo in range(0, n, self.batch):
                idx = order[lo:lo + self.batch]
                X, p, cache = self.net.forward_cached(
                    np.ascontiguousarray(xs[idx]))
                _, grad = cross_entropy(p[:, 0], labels[idx])
                upstream = (grad / idx.size)[:, None]
                grads, _ = self.net.backward(X, upstream, cache)
                self.opt.step(grads)
        return pre_loss

    def state_dict(self):
        n = self._size
        return {"params": self.net.params(), "opt_m": self.opt.m,
                "opt_v": self.opt.v, "opt_t": self.opt.t,
                "xs": self._xs[:n].copy(), "labels": self._labels[:n].copy(),
                "next": self._next, "size": n}

    def load_state_dict(self, state):
        for dst, src in zip(self.net.params(), state["params"]):
            np.copyto(dst, src)
        for dst, src in zip(self.opt.m, state["opt_m"]):
            np.copyto(dst, src)
        for dst, src in zip(self.opt.v, state["opt_v"]):
            np.copyto(dst, src)
        self.opt.t = int(state["opt_t"])
        n = int(state["size"])
        self._size = n
        self._next = int(state["next"])
        self._xs[:n] = state["xs"]
        self._labels[:n] = state["labels"]


def partition_by_label(batch, agent_index):
    """Row indices of the batch grouped by the stored tag of one agent."""
    col = batch.labels[:, agent_index]
    return {WIN: np.flatnonzero(col == WIN),
            LOSE: np.flatnonzero(col == LOSE)}


def ensemble_policy_update(agent, agent_index, batch):
    """Update both ensemble members on their own label partition.

    Returns {label: (rows_used, pre-step objective or None)}; an empty
    partition is a no-op for that member.
    """
    parts = partition_by_label(batch, agent_index)
    out = {}
    for lab in LABELS:
        idx = parts[lab]
        if idx.size == 0:
            out[lab] = (0, None)
            continue
        # fancy indexing hands actor_step fresh arrays, so the joint-action
        # scratch column it overwrites never aliases the batch
        obj = actor_step(agent.policies[lab], agent.policy_opts[lab],
                         agent.critic, batch.obs[idx, agent_index],
                         batch.glob[idx], batch.actions[idx], agent_index)
        out[lab] = (int(idx.size), obj)
    return out


def labeled_target_actions(agents, batch):
    """Next joint action from target policies picked by the stored tags."""
    B = batch.size
    acts = np.empty((B, N_AGENTS, ACT_DIM))
    for j, ag in enumerate(agents):
        col = batch.labels[:, j]
        obs_j = batch.obs_next[:, j]
        for lab in LABELS:
            m = col == lab
            if m.any():
                acts[m, j] = ag.target_policies[lab].forward_batch(
                    np.ascontiguousarray(obs_j[m]))
    return acts


def ensemble_critic_targets(agents, batch, gamma):
    """TD targets with ensemble target policies (tags pick the member)."""
    next_acts = labeled_target_actions(agents, batch)
    cin = critic_input(batch.glob_next, next_acts)
    keep = 1.0 - batch.done
    ys = np.empty((batch.size, N_AGENTS))
    for i, ag in enumerate(agents):
        q = ag.target_critic.forward_batch(cin)[:, 0]
        ys[:, i] = batch.rewards[:, i] + gamma * keep * q
    return ys
