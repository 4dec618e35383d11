"""Fixed-capacity experience store for the team game.

A ring buffer over preallocated arrays (structure-of-arrays layout), so
pushes never allocate and sampling is a single fancy-index gather per
field. Sampling is uniform with replacement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import ACT_DIM, GLOBAL_DIM, N_AGENTS, OBS_DIM
from .errors import InputError, NotReadyError, ShapeError


@dataclass(frozen=True)
class Transition:
    """One joint step: observations, labels, actions, rewards, successor."""

    obs: np.ndarray        # (4, 15)
    glob: np.ndarray       # (20,)
    labels: np.ndarray     # (4,) winning/losing tags, teammates agree
    actions: np.ndarray    # (4, 2)
    rewards: np.ndarray    # (4,)
    obs_next: np.ndarray   # (4, 15)
    glob_next: np.ndarray  # (20,)
    done: bool


@dataclass(frozen=True)
class Batch:
    obs: np.ndarray        # (B, 4, 15)
    glob: np.ndarray       # (B, 20)
    labels: np.ndarray     # (B, 4)
    actions: np.ndarray    # (B, 4, 2)
    rewards: np.ndarray    # (B, 4)
    obs_next: np.ndarray   # (B, 4, 15)
    glob_next: np.ndarray  # (B, 20)
    done: np.ndarray       # (B,) 0.0 / 1.0

    @property
    def size(self):
        return self.glob.shape[0]


def batch_subset(batch, idx):
    """Row-select a Batch (used to split updates by stored label)."""
    return Batch(obs=batch.obs[idx], glob=batch.glob[idx],
                 labels=batch.labels[idx], actions=batch.actions[idx],
                 rewards=batch.rewards[idx], obs_next=batch.obs_next[idx],
                 glob_next=batch.glob_next[idx], done=batch.done[idx])


class ReplayBuffer:
    def __init__(self, capacity):
        capacity = int(capacity)
        if capacity < 1:
            raise InputError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._obs = np.zeros((capacity, N_AGENTS, OBS_DIM))
        self._glob = np.zeros((capacity, GLOBAL_DIM))
        self._labels = np.zeros((capacity, N_AGENTS), dtype=np.int8)
        self._acts = np.zeros((capacity, N_AGENTS, ACT_DIM))
        self._rews = np.zeros((capacity, N_AGENTS))
        self._obs_next = np.zeros((capacity, N_AGENTS, OBS_DIM))
        self._glob_next = np.zeros((capacity, GLOBAL_DIM))
        self._done = np.zeros(capacity)
        self._next = 0
        self._size = 0

    def __len__(self):
        return self._size

    def is_ready(self, min_size):
        return self._size >= min_size

    def push(self, tr):
        obs = np.asarray(tr.obs, dtype=np.float64)
        glob = np.asarray(tr.glob, dtype=np.float64)
        labels = np.asarray(tr.labels)
        acts = np.asarray(tr.actions, dtype=np.float64)
        rews = np.asarray(tr.rewards, dtype=np.float64)
        obs_next = np.asarray(tr.obs_next, dtype=np.float64)
        glob_next = np.asarray(tr.glob_next, dtype=np.float64)
        if obs.shape != (N_AGENTS, OBS_DIM) or obs_next.shape != obs.shape:
            raise ShapeError("observations must be shaped (4, 15)")
        if glob.shape != (GLOBAL_DIM,) or glob_next.shape != (GLOBAL_DIM,):
            raise ShapeError("global state must be shaped (20,)")
        if acts.shape != (N_AGENTS, ACT_DIM):
            raise ShapeError("actions must be shaped (4, 2)")
        if rews.shape != (N_AGENTS,):
            raise ShapeError("rewards must be shaped (4,)")
        if labels.shape != (N_AGENTS,) or not np.isin(labels, (1, 2)).all():
            raise InputError("labels must be four values in {1, 2}")
        if labels[0] != labels[1] or labels[2] != labels[3]:
            raise InputError("teammates must share a label")
        i = self._next
        self._obs[i] = obs
        self._glob[i] = glob
        self._labels[i] = labels
        self._acts[i] = acts
        self._rews[i] = rews
        self._obs_next[i] = obs_next
        self._glob_next[i] = glob_next
        self._done[i] = 1.0 if tr.done else 0.0
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch, rng):
        """Uniform sample with replacement; needs at least one element."""
        if batch < 1:
            raise InputError(f"batch must be >= 1, got {batch}")
        if self._size == 0:
            raise NotReadyError("cannot sample from an empty buffer")
        idx = rng.integers(0, self._size, size=batch)
        return Batch(obs=self._obs[idx], glob=self._glob[idx],
                     labels=self._labels[idx], actions=self._acts[idx],
                     rewards=self._rews[idx], obs_next=self._obs_next[idx],
                     glob_next=self._glob_next[idx], done=self._done[idx])

    def state_dict(self):
        n = self._size
        return {
            "obs": self._obs[:n].copy(), "glob": self._glob[:n].copy(),
            "labels": self._labels[:n].copy(), "acts": self._acts[:n].copy(),
            "rews": self._rews[:n].copy(), "obs_next": self._obs_next[:n].copy(),
            "glob_next": self._glob_next[:n].copy(),
            "done": self._done[:n].copy(),
            "next": self._next, "size": self._size, "capacity": self.capacity,
        }

    def load_state_dict(self, state):
        if int(state["capacity"]) != self.capacity:
            raise InputError("checkpointed capacity does not match buffer")
        n = int(state["size"])
        self._size = n
        self._next = int(state["next"])
        self._obs[:n] = state["obs"]
        self._glob[:n] = state["glob"]
        self._labels[:n] = state["labels"]
        self._acts[:n] = state["acts"]
        self._rews[:n] = state["rews"]
        self._obs_next[:n] = state["obs_next"]
        self._glob_next[:n] = state["glob_next"]
        self._done[:n] = state["done"]
