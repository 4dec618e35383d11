"""A soft actor-critic controller that learns an incentive bonus.

The controller observes only the four current speed caps (normalized by
the global ceiling) — deliberately nothing about landmark counts, so the
learned bonus cannot peek at the statistic it is judged on. Every block
of K training episodes it emits one bonus value in [0, alpha_max]; the
block's reward is the negative absolute performance gap accumulated over
those episodes, pushing the controller toward whatever bonus closes the
gap. One engine variant steers the team bonus (scored on the team gap),
the other the weak-agent bonus (scored on the within-team gap).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NotReadyError
from .incentives import (IncentiveEngine, IncentiveParams, SCHEME_AGENT_RL,
                         SCHEME_TEAM_RL, alphas_from_raw, normalized_stats)
from .nets import Adam, Mlp, polyak_update, squash_gaussian

SAC_OBS_DIM = 4
SAC_ACT_DIM = 1


@dataclass(frozen=True)
class SacHyper:
    gamma: float = 0.99
    lr: float = 3e-4
    polyak_rate: float = 0.005
    batch: int = 256
    temperature: float = 0.2
    hidden: tuple = (64, 64)
    replay_capacity: int = 100_000
    min_replay: int = 8
    updates_per_block: int = 20


@dataclass(frozen=True)
class IncentiveRlConfig:
    period: int = 250        # episodes per bonus decision
    alpha_max: float = 2.0
    sac: SacHyper = field(default_factory=SacHyper)

    def __post_init__(self):
        if self.period < 1:
            raise InputError("period must be >= 1")
        if self.alpha_max <= 0.0:
            raise InputError("alpha_max must be positive")


def observe_speeds(speeds, max_speed_cap):
    """Controller observation: speed caps scaled into (0, 1]."""
    s = np.asarray(speeds, dtype=np.float64)
    if s.shape != (SAC_OBS_DIM,):
        raise InputError("need 4 speed values")
    return s / float(max_speed_cap)


def bonus_from_action(a, alpha_max):
    """Affine map from a squashed action in (-1, 1) to [0, alpha_max]."""
    return float((a + 1.0) * 0.5 * alpha_max)


def incentive_reward(block_counts, roles, mode):
    """Block reward: negative absolute gap in normalized landmark counts.

    mode "team": gap between the two teams' sums. mode "agent": gap
    between the weak team's two members.
    """
    agent_n, team_n = normalized_stats(block_counts)
    if mode == "team":
        gap = team_n[roles.strong_team] - team_n[roles.weak_team]
    elif mode == "agent":
        gap = (agent_n[roles.weak_team_strong_member]
               - agent_n[roles.weak_agent])
    else:
        raise InputError(f"mode must be team or agent, got {mode!r}")
    return -abs(float(gap))


class SacReplay:
    """Minimal ring for (s, a, r, s') tuples; the task never terminates."""

    def __init__(self, capacity):
        self._s = np.zeros((capacity, SAC_OBS_DIM))
        self._a = np.zeros((capacity, SAC_ACT_DIM))
        self._r = np.zeros(capacity)
        self._s2 = np.zeros((capacity, SAC_OBS_DIM))
        self._next = 0
        self._size = 0

    def __len__(self):
        return self._size

    def push(self, s, a, r, s2):
        i = self._next
        self._s[i] = s
        self._a[i] = a
        self._r[i] = r
        self._s2[i] = s2
        self._next = (i + 1) % self._s.shape[0]
        self._size = min(self._size + 1, self._s.shape[0])

    def sample(self, batch, rng):
        if self._size == 0:
            raise NotReadyError("SAC replay is empty")
        idx = rng.integers(0, self._size, size=batch)
        return (self._s[idx], self._a[idx], self._r[idx], self._s2[idx])

    def state_dict(self):
        n = self._size
        return {"s": self._s[:n].copy(), "a": self._a[:n].copy(),
                "r": self._r[:n].copy(), "s2": self._s2[:n].copy(),
                "next": self._next, "size": n,
                "capacity": self._s.shape[0]}

    def load_state_dict(self, state):
        if int(state["capacity"]) != self._s.shape[0]:
            raise InputError("checkpointed SAC replay capacity mismatch")
        n = int(state["size"])
        self._size = n
        self._next = int(state["next"])
        self._s[:n] = state["s"]
        self._a[:n] = state["a"]
        self._r[:n] = state["r"]
        self._s2[:n] = state["s2"]


def _q_input(s, a):
    return np.ascontiguousarray(np.concatenate([s, a], axis=1))


def policy_loss_and_grads(policy, q1, q2, s, eps, temperature):
    """Reparametrized policy loss mean(T * logp - min(Q1, Q2)) and its
    parameter gradients, with the Gaussian draw eps held fixed and the
    critics read-only. Exposed separately so the chain rule below can be
    finite-difference checked end to end."""
    B = s.shape[0]
    X, out, cache = policy.forward_cached(s)
    mean = out[:, 0:1]
    ls_raw = out[:, 1:2]
    a, logp, z, ls = squash_gaussian(mean, ls_raw, eps)
    sigma = np.exp(ls)

    qin = _q_input(s, a)
    X1, q1v, c1 = q1.forward_cached(qin)
    X2, q2v, c2 = q2.forward_cached(qin)
    take1 = (q1v[:, 0] <= q2v[:, 0])
    qmin = np.where(take1, q1v[:, 0], q2v[:, 0])
    loss = float(np.mean(temperature * logp - qmin))

    # d(-qmin)/da through whichever critic is active per row
    up1 = np.where(take1, -1.0, 0.0)[:, None] / B
    up2 = np.where(take1, 0.0, -1.0)[:, None] / B
    _, g1 = q1.backward(X1, up1, c1)
    _, g2 = q2.backward(X2, up2, c2)
    g_a = (g1 + g2)[:, SAC_OBS_DIM:]          # (B, 1), already /B

    # logp pieces: d logp/dz = 2 tanh(z); z = mean + sigma * eps,
    # d z/d ls = sigma * eps; the -ls term contributes -1; the clamp on
    # ls kills the gradient outside [LOG_STD_MIN, LOG_STD_MAX]
    dlogp_dmean = 2.0 * a
    dlogp_dls = -1.0 + 2.0 * a * sigma * eps
    da_dmean = 1.0 - a * a
    da_dls = (1.0 - a * a) * sigma * eps
    clamp_live = (ls == ls_raw)

    g_mean = temperature * dlogp_dmean / B + g_a * da_dmean
    g_ls = (temperature * dlogp_dls / B + g_a * da_dls) * clamp_live
    upstream = np.concatenate([g_mean, g_ls], axis=1)
    grads, _ = policy.backward(X, upstream, cache)
    return loss, grads


class SacAgent:
    """Squashed-Gaussian policy with twin critics and slow targets."""

    def __init__(self, rng, hyper=None):
        self.hyper = hyper or SacHyper()
        h = self.hyper
        self.policy = Mlp([SAC_OBS_DIM, *h.hidden, 2], hidden="relu",
                          output="identity", rng=rng)
        self.q1 = Mlp([SAC_OBS_DIM + SAC_ACT_DIM, *h.hidden, 1],
                      hidden="relu", output="identity", rng=rng)
        self.q2 = Mlp([SAC_OBS_DIM + SAC_ACT_DIM, *h.hidden, 1],
                      hidden="relu", output="identity", rng=rng)
        self.q1_target = self.q1.copy()
        self.q2_target = self.q2.copy()
        self.policy_opt = Adam(self.policy, lr=h.lr)
        self.q1_opt = Adam(self.q1, lr=h.lr)
        self.q2_opt = Adam(self.q2, lr=h.lr)
        self.replay = SacReplay(h.replay_capacity)
        self.updates_done = 0

    def act(self, s, rng):
        out = self.policy.forward(np.asarray(s, dtype=np.float64))
        eps = rng.standard_normal(1)
        a, _, _, _ = squash_gaussian(out[0:1], out[1:2], eps)
        return float(a[0])

    def act_deterministic(self, s):
        out = self.policy.forward(np.asarray(s, dtype=np.float64))
        return float(np.tanh(out[0]))

    def push(self, s, a, r, s2):
        self.replay.push(s, [a], r, s2)

    def update(self, rng):
        """One gradient step on both critics and the policy, then target
        mixing. Returns the pre-step losses, or None while the replay is
        below min_replay."""
        h = self.hyper
        if len(self.replay) < h.min_replay:
            return None
        s, a, r, s2 = self.replay.sample(h.batch, rng)
        B = s.shape[0]

        out2 = self.policy.forward_batch(s2)
        eps2 = rng.standard_normal((B, 1))
        a2, logp2, _, _ = squash_gaussian(out2[:, 0:1], out2[:, 1:2], eps2)
        qin2 = _q_input(s2, a2)
        qt = np.minimum(self.q1_target.forward_batch(qin2)[:, 0],
                        self.q2_target.forward_batch(qin2)[:, 0])
        y = r + h.gamma * (qt - h.temperature * logp2)

        qin = _q_input(s, a)
        q_losses = []
        for q, opt in ((self.q1, self.q1_opt), (self.q2, self.q2_opt)):
            X, qv, cache = q.forward_cached(qin)
            diff = qv[:, 0] - y
            q_losses.append(float(np.mean(diff * diff)))
            grads, _ = q.backward(X, (2.0 / B) * diff[:, None], cache)
            opt.step(grads)

        eps = rng.standard_normal((B, 1))
        p_loss, p_grads = policy_loss_and_grads(
            self.policy, self.q1, self.q2, s, eps, h.temperature)
        self.policy_opt.step(p_grads)

        polyak_update(self.q1_target, self.q1, h.polyak_rate)
        polyak_update(self.q2_target, self.q2, h.polyak_rate)
        self.updates_done += 1
        return {"q1_loss": q_losses[0], "q2_loss": q_losses[1],
                "policy_loss": p_loss}

    def state_dict(self):
        def net_state(net, opt):
            return {"params": net.params(), "m": opt.m, "v": opt.v,
                    "t": opt.t}
        return {
            "policy": net_state(self.policy, self.policy_opt),
            "q1": net_state(self.q1, self.q1_opt),
            "q2": net_state(self.q2, self.q2_opt),
            "q1_target": self.q1_target.params(),
            "q2_target": self.q2_target.params(),
            "replay": self.replay.state_dict(),
            "updates_done": self.updates_done,
        }

    def load_state_dict(self, state):
        def restore(net, opt, sub):
            for dst, src in zip(net.params(), sub["params"]):
                np.copyto(dst, src)
            for dst, src in zip(opt.m, sub["m"]):
                np.copyto(dst, src)
            for dst, src in zip(opt.v, sub["v"]):
                np.copyto(dst, src)
            opt.t = int(sub["t"])
        restore(self.policy, self.policy_opt, state["policy"])
        restore(self.q1, self.q1_opt, state["q1"])
        restore(self.q2, self.q2_opt, state["q2"])
        for dst, src in zip(self.q1_target.params(), state["q1_target"]):
            np.copyto(dst, src)
        for dst, src in zip(self.q2_target.params(), state["q2_target"]):
            np.copyto(dst, src)
        self.replay.load_state_dict(state["replay"])
        self.updates_done = int(state["updates_done"])


class _RlEngineBase(IncentiveEngine):
    """Shared block bookkeeping for the two RL-assisted schemes."""

    mode = "team"

    def __init__(self, roles, landmark_reward, max_speed_cap, sac, rl_config,
                 rng, learn=False):
        super().__init__(roles, landmark_reward)
        self.sac = sac
        self.config = rl_config
        self.max_speed_cap = float(max_speed_cap)
        self.rng = rng
        self.learn = learn
        self.block_rewards = []
        self._alpha_rl = 0.0
        self._block_counts = np.zeros(4)
        self._eps_in_block = 0
        self._prev_s = None
        self._prev_a = None
        self._started = False

    def _pick(self, s):
        if self.learn:
            return self.sac.act(s, self.rng)
        return self.sac.act_deterministic(s)

    def _decide(self, s):
        a = self._pick(s)
        self._prev_s = s
        self._prev_a = a
        self._alpha_rl = bonus_from_action(a, self.config.alpha_max)

    def begin_episode(self, episode, speeds):
        if not self._started:
            self._decide(observe_speeds(speeds, self.max_speed_cap))
            self._started = True
        self._set_params(speeds)

    def _set_params(self, speeds):
        raise NotImplementedError

    def end_episode(self, scorer, speeds=None):
        if speeds is None:
            raise InputError("RL incentive engines need end-of-episode speeds")
        if scorer is not None:
            self._block_counts[scorer] += 1.0
        self._eps_in_block += 1
        if self._eps_in_block < self.config.period:
            return
        s2 = observe_speeds(speeds, self.max_speed_cap)
        r = incentive_reward(self._block_counts, self.roles, self.mode)
        self.block_rewards.append(r)
        if self.learn:
            self.sac.push(self._prev_s, self._prev_a, r, s2)
            for _ in range(self.sac.hyper.updates_per_block):
                self.sac.update(self.rng)
        self._decide(s2)
        self._block_counts[:] = 0.0
        self._eps_in_block = 0

    def state_dict(self):
        state = super().state_dict()
        state.update({
            "alpha_rl": self._alpha_rl,
            "block_counts": self._block_counts.copy(),
            "eps_in_block": self._eps_in_block,
            "prev_s": (self._prev_s.copy() if self._prev_s is not None
                       else np.zeros(0)),
            "prev_a": 0.0 if self._prev_a is None else float(self._prev_a),
            "started": int(self._started),
            "block_rewards": np.array(self.block_rewards),
            "sac": self.sac.state_dict(),
        })
        return state

    def load_state_dict(self, state):
        super().load_state_dict(state)
        self._alpha_rl = float(state["alpha_rl"])
        self._block_counts[:] = state["block_counts"]
        self._eps_in_block = int(state["eps_in_block"])
        prev_s = np.asarray(state["prev_s"])
        self._prev_s = prev_s if prev_s.size else None
        self._started = bool(state["started"])
        self._prev_a = float(state["prev_a"]) if self._started else None
        self.block_rewards = [float(v) for v in state["block_rewards"]]
        self.sac.load_state_dict(state["sac"])


class TeamRlEngine(_RlEngineBase):
    """Learned team bonus; agent bonus follows the speed-gap rule."""

    kind = SCHEME_TEAM_RL
    mode = "team"

    def _set_params(self, speeds):
        dyn = alphas_from_raw(speeds, self.roles)
        self.params = IncentiveParams(alpha_team=self._alpha_rl,
                                      alpha_agent=dyn.alpha_agent)


class AgentRlEngine(_RlEngineBase):
    """Learned weak-agent bonus; team bonus follows the speed-gap rule."""

    kind = SCHEME_AGENT_RL
    mode = "agent"

    def _set_params(self, speeds):
        dyn = alphas_from_raw(speeds, self.roles)
        self.params = IncentiveParams(alpha_team=dyn.alpha_team,
                                      alpha_agent=self._alpha_rl)
