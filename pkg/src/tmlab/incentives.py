"""Incentive schemes that soften unequal matchups.

One team is designated weak (slower members) at run start. When the weak
side scores, its terminal reward is scaled up by a team bonus alpha_T —
plus an agent bonus alpha_A when the weak team's weakest member scored
personally. Opponents always lose the plain landmark reward, so the
bonuses subsidize the underdog without changing what winning means.

Bonuses are either fixed (static schemes) or recomputed each episode from
a sliding window of performance (dynamic schemes): the gap in normalized
landmark counts, or the gap in current speed caps. Reinforcement-learned
bonus controllers live in incentive_rl and plug in through the same
engine interface.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .env import N_AGENTS, N_TEAMS, TEAM_SIZE, team_of, teammate_of
from .errors import InputError

WINDOW_DEFAULT = 1000

SCHEME_BASELINE = "Baseline"
SCHEME_STATIC_TEAM = "StaticTeam"
SCHEME_STATIC_AGENT = "StaticAgent"
SCHEME_DYNAMIC_LANDMARK = "DynamicLandmark"
SCHEME_DYNAMIC_SPEED = "DynamicSpeed"
SCHEME_TEAM_RL = "Team-RL-Agent-Dynamic"
SCHEME_AGENT_RL = "Team-Dynamic-Agent-RL"

ALL_SCHEMES = (SCHEME_BASELINE, SCHEME_STATIC_TEAM, SCHEME_STATIC_AGENT,
               SCHEME_DYNAMIC_LANDMARK, SCHEME_DYNAMIC_SPEED,
               SCHEME_TEAM_RL, SCHEME_AGENT_RL)


@dataclass(frozen=True)
class RoleAssignment:
    """Who counts as the underdog, fixed at run start."""

    weak_team: int
    weak_agent: int

    def __post_init__(self):
        if self.weak_team not in (0, 1):
            raise InputError("weak_team must be 0 or 1")
        if team_of(self.weak_agent) != self.weak_team:
            raise InputError("weak_agent must belong to weak_team")

    @property
    def strong_team(self):
        return 1 - self.weak_team

    @property
    def weak_team_strong_member(self):
        return teammate_of(self.weak_agent)

    @classmethod
    def from_speeds(cls, speeds):
        speeds = tuple(float(s) for s in speeds)
        if len(speeds) != N_AGENTS:
            raise InputError(f"need {N_AGENTS} speeds")
        weak_agent = int(np.argmin(speeds))  # ties: lowest id
        return cls(weak_team=team_of(weak_agent), weak_agent=weak_agent)


@dataclass(frozen=True)
class IncentiveParams:
    alpha_team: float = 0.0
    alpha_agent: float = 0.0

    def __post_init__(self):
        if self.alpha_team < 0.0 or self.alpha_agent < 0.0:
            raise InputError("incentive bonuses must be >= 0")


def normalized_stats(raw):
    """Per-agent values scaled by the max, plus per-team sums.

    raw: 4 nonnegative numbers (landmark counts or speed caps). An all-zero
    input normalizes to all zeros. Returns (agent_n (4,), team_n (2,)).
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.shape != (N_AGENTS,):
        raise InputError("raw stats must have 4 entries")
    if (raw < 0.0).any():
        raise InputError("raw stats must be nonnegative")
    top = raw.max()
    agent_n = raw / top if top > 0.0 else np.zeros(N_AGENTS)
    team_n = np.array([agent_n[0] + agent_n[1], agent_n[2] + agent_n[3]])
    return agent_n, team_n


def dynamic_alphas(agent_n, team_n, roles):
    """Bonuses from normalized performance gaps, clamped at zero.

    alpha_T = the strong team's lead over the weak team; alpha_A = the
    lead of the weak team's strong member over its weak member.
    """
    agent_n = np.asarray(agent_n, dtype=np.float64)
    team_n = np.asarray(team_n, dtype=np.float64)
    a_t = max(0.0, float(team_n[roles.strong_team] - team_n[roles.weak_team]))
    a_a = max(0.0, float(agent_n[roles.weak_team_strong_member]
                         - agent_n[roles.weak_agent]))
    return IncentiveParams(alpha_team=a_t, alpha_agent=a_a)


def alphas_from_raw(raw, roles):
    """Both bonuses straight from raw stats, normalized by the max.

    Same real-number result as normalized_stats + dynamic_alphas, but the
    gap is taken before the divide: one rounding per bonus, so integer
    count gaps like (4-1)/10 come out as the exact decimal they should.
    The engines use this path.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.shape != (N_AGENTS,):
        raise InputError("raw stats must have 4 entries")
    if (raw < 0.0).any():
        raise InputError("raw stats must be nonnegative")
    top = raw.max()
    if top <= 0.0:
        return IncentiveParams()
    st, wt = roles.strong_team, roles.weak_team
    team_gap = (raw[TEAM_SIZE * st] + raw[TEAM_SIZE * st + 1]
                - raw[TEAM_SIZE * wt] - raw[TEAM_SIZE * wt + 1])
    agent_gap = raw[roles.weak_team_strong_member] - raw[roles.weak_agent]
    return IncentiveParams(alpha_team=max(0.0, float(team_gap / top)),
                           alpha_agent=max(0.0, float(agent_gap / top)))


def terminal_rewards(params, scorer, roles, landmark_reward):
    """Terminal reward split when `scorer` touched a landmark.

    Both members of the scoring team receive the same amount: the plain
    reward for the strong team, boosted by alpha_T for the weak team, and
    by alpha_T + alpha_A when the weak team's weakest member scored it.
    Opponents lose the plain reward either way.
    """
    if not 0 <= scorer < N_AGENTS:
        raise InputError(f"scorer must be an agent id, got {scorer}")
    win = team_of(scorer)
    gain = landmark_reward
    if win == roles.weak_team:
        boost = params.alpha_team
        if scorer == roles.weak_agent:
            boost += params.alpha_agent
        gain = (1.0 + boost) * landmark_reward
    out = []
    for i in range(N_AGENTS):
        out.append(gain if team_of(i) == win else -landmark_reward)
    return tuple(out)


class ScorerWindow:
    """Sliding window of per-episode scorers with cached landmark counts."""

    def __init__(self, window=WINDOW_DEFAULT):
        if window < 1:
            raise InputError("window must be >= 1")
        self.window = int(window)
        self._events = deque(maxlen=self.window)
        self._counts = np.zeros(N_AGENTS)

    def advance(self, scorer):
        """Record one finished episode; scorer None means a draw."""
        if len(self._events) == self._events.maxlen:
            old = self._events[0]
            if old is not None:
                self._counts[old] -= 1.0
        self._events.append(scorer)
        if scorer is not None:
            self._counts[scorer] += 1.0

    @property
    def counts(self):
        return self._counts.copy()

    def __len__(self):
        return len(self._events)

    def state_dict(self):
        return {"window": self.window,
                "events": np.array([-1 if e is None else e
                                    for e in self._events], dtype=np.int64)}

    def load_state_dict(self, state):
        if int(state["window"]) != self.window:
            raise InputError("checkpointed window size does not match")
        self._events.clear()
        self._counts[:] = 0.0
        for e in state["events"]:
            self.advance(None if e < 0 else int(e))


class IncentiveEngine:
    """Per-run incentive state machine.

    The training loop calls begin_episode before an episode (bonuses are
    recomputed at most once per episode), terminal_rewards when someone
    scores, and end_episode afterwards with the episode outcome.
    """

    kind = SCHEME_BASELINE

    def __init__(self, roles, landmark_reward):
        self.roles = roles
        self.landmark_reward = float(landmark_reward)
        self.params = IncentiveParams()

    def begin_episode(self, episode, speeds):
        pass

    def terminal_rewards(self, scorer):
        return terminal_rewards(self.params, scorer, self.roles,
                                self.landmark_reward)

    def end_episode(self, scorer, speeds=None):
        pass

    def state_dict(self):
        return {"alpha_team": self.params.alpha_team,
                "alpha_agent": self.params.alpha_agent}

    def load_state_dict(self, state):
        self.params = IncentiveParams(alpha_team=float(state["alpha_team"]),
                                      alpha_agent=float(state["alpha_agent"]))


class StaticEngine(IncentiveEngine):
    def __init__(self, roles, landmark_reward, alpha_team, alpha_agent,
                 kind=SCHEME_STATIC_TEAM):
        super().__init__(roles, landmark_reward)
        self.params = IncentiveParams(alpha_team=alpha_team,
                                      alpha_agent=alpha_agent)
        self.kind = kind

    def load_state_dict(self, state):
        pass  # static bonuses are part of the config, not run state


class DynamicLandmarkEngine(IncentiveEngine):
    """Bonuses from normalized landmark counts over a sliding window."""

    kind = SCHEME_DYNAMIC_LANDMARK

    def __init__(self, roles, landmark_reward, window=WINDOW_DEFAULT):
        super().__init__(roles, landmark_reward)
        self.scorers = ScorerWindow(window)

    def begin_episode(self, episode, speeds):
        self.params = alphas_from_raw(self.scorers.counts, self.roles)

    def end_episode(self, scorer, speeds=None):
        self.scorers.advance(scorer)

    def state_dict(self):
        state = super().state_dict()
        state["scorers"] = self.scorers.state_dict()
        return state

    def load_state_dict(self, state):
        super().load_state_dict(state)
        self.scorers.load_state_dict(state["scorers"])


class DynamicSpeedEngine(IncentiveEngine):
    """Bonuses from the current speed caps instead of scoring history."""

    kind = SCHEME_DYNAMIC_SPEED

    def begin_episode(self, episode, speeds):
        self.params = alphas_from_raw(speeds, self.roles)


def make_static_engine(kind, roles, landmark_reward, alpha_team, alpha_agent):
    if kind == SCHEME_BASELINE:
        return StaticEngine(roles, landmark_reward, 0.0, 0.0, kind=kind)
    if kind == SCHEME_STATIC_TEAM:
        return StaticEngine(roles, landmark_reward, alpha_team, 0.0, kind=kind)
    if kind == SCHEME_STATIC_AGENT:
        return StaticEngine(roles, landmark_reward, alpha_team, alpha_agent,
                            kind=kind)
    raise InputError(f"not a static scheme: {kind}")
