"""Head-to-head evaluation of trained teams, plus log aggregates.

Trained teams are frozen into TeamPolicy bundles (deterministic actors,
the team's policy selector, and the speed caps the members earned).
paired_eval transplants two bundles into a common world: every sampled
configuration is played twice with the teams' starting positions
exchanged, so neither side can profit from a lucky draw. A bundle
trained in the other team's slots sees each world through
swap_team_frame, i.e. always in the frame it was trained in.

The aggregate helpers (fairness_stddev, win_policy_usage,
confidence_interval) are pure functions of logged values so results can
be recomputed offline from a metrics file.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

import numpy as np

from . import env as game
from .cmaddpg import LOSE, WIN
from .errors import InputError

__all__ = [
    "TeamPolicy",
    "team_policy",
    "PairedEvalReport",
    "paired_eval",
    "MatchResult",
    "TournamentReport",
    "tournament",
    "fairness_stddev",
    "win_policy_usage",
    "confidence_interval",
]


# -- frozen team bundles ----------------------------------------------------


@dataclass(frozen=True)
class TeamPolicy:
    """One team's frozen decision apparatus.

    members: two dicts mapping policy label -> actor net, in member
        order (the team's lower slot first).
    controller_net: the team's policy selector, or None for a team that
        always uses its single (WIN-labelled) actor.
    speeds: the speed caps the two members bring into evaluation.
    home_slots: the world slots the nets were trained on, (0, 1) or
        (2, 3); acting from the other pair of slots routes observations
        through swap_team_frame.
    weak_member: index (0/1) of the member designated weak at training
        time, or None when the distinction does not apply.
    """

    members: tuple
    controller_net: object | None
    speeds: tuple
    home_slots: tuple
    weak_member: int | None = None

    def __post_init__(self):
        if tuple(self.home_slots) not in ((0, 1), (2, 3)):
            raise InputError("home_slots must be (0, 1) or (2, 3)")
        if len(self.members) != game.TEAM_SIZE:
            raise InputError(f"need {game.TEAM_SIZE} member policy dicts")
        for nets in self.members:
            if WIN not in nets:
                raise InputError("every member needs a WIN-labelled actor")
            if self.controller_net is not None and LOSE not in nets:
                raise InputError("a controlled member needs both actors")
        if len(self.speeds) != game.TEAM_SIZE:
            raise InputError(f"need {game.TEAM_SIZE} member speeds")
        if any(s <= 0.0 for s in self.speeds):
            raise InputError("member speeds must be positive")
        if self.weak_member not in (None, 0, 1):
            raise InputError("weak_member must be None, 0 or 1")

    def act(self, state, occupied):
        """Deterministic joint action for the two members.

        occupied names the slots the team holds in the actual world;
        when it differs from home_slots the state is re-framed first.
        Returns a (2, ACT_DIM) array in member order.
        """
        occupied = tuple(occupied)
        if occupied not in ((0, 1), (2, 3)):
            raise InputError("occupied must be (0, 1) or (2, 3)")
        view = state if occupied == tuple(self.home_slots) \
            else game.swap_team_frame(state)
        if self.controller_net is None:
            label = WIN
        else:
            p = float(self.controller_net.forward(game.global_state(view))[0])
            label = WIN if p >= 0.5 else LOSE
        out = np.empty((game.TEAM_SIZE, game.ACT_DIM))
        for k, slot in enumerate(self.home_slots):
            a = self.members[k][label].forward(game.observe(view, slot))
            out[k] = np.clip(a, -1.0, 1.0)
        return out


def team_policy(run, team):
    """Extract one team's frozen bundle from a finished training run.

    Copies the nets, so the bundle stays fixed if the run keeps
    training. The weak member is the one with the lower initial speed
    cap (ties to the lower slot), matching the role assignment the run
    trained under.
    """
    if team not in (0, 1):
        raise InputError("team must be 0 or 1")
    slots = game.team_members(team)
    members = []
    for slot in slots:
        agent = run.agents[slot]
        if hasattr(agent, "policies"):
            members.append({lab: net.copy()
                            for lab, net in agent.policies.items()})
        else:
            members.append({WIN: agent.actor.copy()})
    controllers = getattr(run, "controllers", None)
    cnet = controllers[team].net.copy() if controllers is not None else None
    init = run.env_config.initial_max_speeds
    weak = 0 if init[slots[0]] <= init[slots[1]] else 1
    return TeamPolicy(
        members=tuple(members), controller_net=cnet,
        speeds=tuple(float(run.speeds[s]) for s in slots),
        home_slots=slots, weak_member=weak)


# -- paired evaluation --------------------------------------------------------


@dataclass(frozen=True)
class PairedEvalReport:
    """Outcome counts for one head-to-head evaluation.

    Counts are integers so every rate is exactly recomputable;
    agent_scores is in member order (A0, A1, B0, B1).
    """

    episodes: int
    team_scores: tuple
    agent_scores: tuple
    collisions: int

    @property
    def team_rates(self):
        return tuple(s / self.episodes for s in self.team_scores)

    @property
    def agent_rates(self):
        return tuple(s / self.episodes for s in self.agent_scores)

    @property
    def wins(self):
        return self.team_scores

    @property
    def draws(self):
        return self.episodes - sum(self.team_scores)

    @property
    def collision_rate(self):
        return self.collisions / self.episodes


def _exchange_starts(state):
    # same bodies-in-space, but each team begins where the other did;
    # speed caps stay with their owners
    perm = (2, 3, 0, 1)
    agents = tuple(
        replace(state.agents[i], pos=state.agents[perm[i]].pos,
                vel=state.agents[perm[i]].vel)
        for i in range(game.N_AGENTS))
    return replace(state, agents=agents,
                   episode_index=state.episode_index + 1)


def _play(state, team_a, team_b, config):
    collisions = 0
    while True:
        acts = np.empty((game.N_AGENTS, game.ACT_DIM))
        acts[:game.TEAM_SIZE] = team_a.act(state, (0, 1))
        acts[game.TEAM_SIZE:] = team_b.act(state, (2, 3))
        state, out = game.step(state, acts, config)
        collisions += len(out.collisions)
        if out.done:
            return out.scorer, collisions


def paired_eval(team_a, team_b, n_configs, rng, config=None):
    """Play two bundles against each other over mirrored episode pairs.

    Draws n_configs world configurations from rng (one child generator
    per configuration, so results depend only on the generator's seed)
    and plays each twice, exchanging the teams' starting positions for
    the second game. Team A holds slots (0, 1), team B slots (2, 3);
    exploration is off and each team's policy selector stays active.
    Returns a PairedEvalReport over the 2 * n_configs episodes.
    """
    if n_configs < 1:
        raise InputError("n_configs must be >= 1")
    if config is None:
        config = game.EnvConfig()
    speeds = (*team_a.speeds, *team_b.speeds)
    team_scores = [0, 0]
    agent_scores = [0, 0, 0, 0]
    collisions = 0
    for idx, crng in enumerate(rng.spawn(n_configs)):
        base = game.reset(config, crng, max_speeds=speeds,
                          episode_index=2 * idx + 1)
        for world in (base, _exchange_starts(base)):
            scorer, c = _play(world, team_a, team_b, config)
            collisions += c
            if scorer is not None:
                team_scores[game.team_of(scorer)] += 1
                agent_scores[scorer] += 1
    return PairedEvalReport(episodes=2 * n_configs,
                            team_scores=tuple(team_scores),
                            agent_scores=tuple(agent_scores),
                            collisions=collisions)


# -- tournaments --------------------------------------------------------------


@dataclass(frozen=True)
class MatchResult:
    name_a: str
    name_b: str
    report: PairedEvalReport


@dataclass(frozen=True)
class TournamentReport:
    """Round-robin results plus each entrant's weak-member share."""

    matches: tuple
    weak_share: dict


def _weak_share(report, side, weak_member):
    # of the episodes this side scored, the fraction scored by its weak
    # member; a side that never scored contributes 0
    team = report.team_scores[side]
    if team == 0:
        return 0.0
    weak = report.agent_scores[game.TEAM_SIZE * side + weak_member]
    return weak / team


def tournament(teams, n_configs, rng, config=None):
    """Round-robin paired evaluation over named team bundles.

    teams maps a display name (typically the incentive scheme the team
    trained under) to its TeamPolicy; every unordered pair plays one
    paired_eval of n_configs configurations. The weak_share score per
    entrant is its weak member's share of the team's scored episodes,
    averaged over its matches.
    """
    names = list(teams)
    if len(names) < 2:
        raise InputError("tournament needs at least 2 teams")
    for name in names:
        if teams[name].weak_member is None:
            raise InputError(f"team {name!r} has no designated weak member")
    shares = {name: [] for name in names}
    matches = []
    for a, b in itertools.combinations(names, 2):
        rep = paired_eval(teams[a], teams[b], n_configs, rng, config)
        matches.append(MatchResult(name_a=a, name_b=b, report=rep))
        shares[a].append(_weak_share(rep, 0, teams[a].weak_member))
        shares[b].append(_weak_share(rep, 1, teams[b].weak_member))
    weak_share = {name: float(np.mean(shares[name])) for name in names}
    return TournamentReport(matches=tuple(matches), weak_share=weak_share)


# -- log aggregates -----------------------------------------------------------


def _column_matrix(log, names):
    if hasattr(log, "column"):
        cols = [np.asarray(log.column(n), dtype=np.float64) for n in names]
        return np.column_stack(cols) if cols[0].size else \
            np.empty((0, len(names)))
    arr = np.asarray(log, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != len(names):
        raise InputError(f"expected columns {names}, got shape {arr.shape}")
    return arr


def _window_slice(arr, window):
    if window < 1:
        raise InputError("window must be >= 1")
    if arr.shape[0] < window:
        raise InputError(
            f"log has {arr.shape[0]} episodes, window needs {window}")
    return arr[-window:]


def fairness_stddev(log, window):
    """Spread of the four per-agent scoring rates over the final window.

    log is a metrics log (or an (N, 4) array of per-episode landmark
    indicators in agent order). Each agent's rate is its mean indicator
    over the last `window` episodes; the result is the population
    standard deviation of the four rates, so equal participation gives
    exactly 0. Invariant under permuting the agent columns.
    """
    lm = _column_matrix(log, ["lm_a0", "lm_a1", "lm_a2", "lm_a3"])
    rates = _window_slice(lm, window).mean(axis=0)
    return float(np.sqrt(np.mean((rates - rates.mean()) ** 2)))


def win_policy_usage(log, window=None):
    """Mean per-team winning-policy usage over the final window.

    The two logged columns hold, per episode, the fraction of steps on
    which each team's selector picked its winning-labelled policy.
    Returns the per-team means (they need not sum to 1). window=None
    averages the whole log.
    """
    wp = _column_matrix(log, ["winpol_t0", "winpol_t1"])
    if window is None:
        window = wp.shape[0]
    means = _window_slice(wp, window).mean(axis=0)
    return (float(means[0]), float(means[1]))


def confidence_interval(values):
    """Mean and 95% half-width over per-seed values.

    Uses the normal approximation 1.96 * s / sqrt(n) with the sample
    standard deviation; needs at least two values.
    """
    vals = np.asarray(values, dtype=np.float64).ravel()
    n = vals.size
    if n < 2:
        raise InputError("confidence interval needs at least 2 values")
    mean = float(vals.mean())
    half = 1.96 * float(vals.std(ddof=1)) / float(np.sqrt(n))
    return (mean, half)
