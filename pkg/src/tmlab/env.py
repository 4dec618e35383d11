"""The Touch-Mark game: two teams of two agents race to touch a landmark.

A flat square board holds four round agents (teams {0,1} vs {2,3}) and two
point landmarks. Every agent accelerates in a chosen direction each step;
the episode ends the moment any agent touches a landmark, giving that
agent's team the landmark reward and the opponents its negative. Until
then every agent pays a small distance penalty toward its nearest
landmark, plus a penalty while outside the board. Agents are individually
speed-capped, and the cap of a scoring agent creeps toward a global
ceiling, so skill is earned by scoring.

States are plain immutable-ish values; step() returns a new WorldState
rather than mutating. All randomness comes from the numpy Generator
passed to reset().
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InputError, StateError

N_AGENTS = 4
N_LANDMARKS = 2
TEAM_SIZE = 2
N_TEAMS = 2
OBS_DIM = 15
GLOBAL_DIM = 20
ACT_DIM = 2


def team_of(agent_id):
    return agent_id // TEAM_SIZE


def teammate_of(agent_id):
    return agent_id ^ 1


def team_members(team):
    base = team * TEAM_SIZE
    return (base, base + 1)


def opponents_of(agent_id):
    return team_members(1 - team_of(agent_id))


@dataclass(frozen=True)
class EnvConfig:
    board_half_extent: float = 1.5
    dt: float = 0.1
    damping: float = 0.25
    accel_scale: float = 5.0
    agent_radius: float = 0.05
    touch_radius: float = 0.1
    contact_stiffness: float = 100.0
    landmark_reward: float = 30.0
    distance_penalty_scale: float = 0.1
    boundary_penalty: float = 1.0
    max_speed_cap: float = 5.0
    skill_rate: float = 0.01
    max_episode_len: int = 50
    initial_max_speeds: tuple = (4.0, 4.0, 4.0, 4.0)

    def __post_init__(self):
        for name in ("board_half_extent", "dt", "accel_scale", "agent_radius",
                     "touch_radius", "landmark_reward", "max_speed_cap"):
            if getattr(self, name) <= 0.0:
                raise InputError(f"EnvConfig.{name} must be positive")
        if not (0.0 <= self.damping < 1.0):
            raise InputError("EnvConfig.damping must lie in [0, 1)")
        if self.max_episode_len < 1:
            raise InputError("EnvConfig.max_episode_len must be >= 1")
        if len(self.initial_max_speeds) != N_AGENTS:
            raise InputError("EnvConfig.initial_max_speeds needs 4 entries")
        if any(s <= 0.0 for s in self.initial_max_speeds):
            raise InputError("EnvConfig.initial_max_speeds must be positive")


@dataclass(frozen=True)
class AgentState:
    id: int
    team: int
    pos: tuple
    vel: tuple
    max_speed: float
    radius: float


@dataclass(frozen=True)
class WorldState:
    agents: tuple
    landmarks: tuple
    step_index: int
    episode_index: int = 0
    terminal: bool = False


@dataclass(frozen=True)
class StepOutcome:
    """Per-step result. rewards = dense_rewards plus the base +-r_l split
    when someone scored; incentive schemes recompose the terminal part
    from dense_rewards instead."""

    rewards: tuple
    dense_rewards: tuple
    scorer: int | None
    scoring_landmark: int | None
    collisions: tuple
    out_of_bounds: tuple
    done: bool


def reset(config, rng, max_speeds=None, episode_index=0):
    """Fresh episode: uniform agent/landmark positions, zero velocities.

    max_speeds overrides the per-agent caps (skill carried across
    episodes); defaults to config.initial_max_speeds.
    """
    h = config.board_half_extent
    if max_speeds is None:
        max_speeds = config.initial_max_speeds
    if len(max_speeds) != N_AGENTS:
        raise InputError(f"max_speeds needs {N_AGENTS} entries")
    points = rng.uniform(-h, h, size=(N_AGENTS + N_LANDMARKS, 2))
    agents = tuple(
        AgentState(id=i, team=team_of(i),
                   pos=(float(points[i, 0]), float(points[i, 1])),
                   vel=(0.0, 0.0),
                   max_speed=float(max_speeds[i]),
                   radius=config.agent_radius)
        for i in range(N_AGENTS))
    landmarks = tuple((float(points[N_AGENTS + k, 0]),
                       float(points[N_AGENTS + k, 1]))
                      for k in range(N_LANDMARKS))
    return WorldState(agents=agents, landmarks=landmarks, step_index=0,
                      episode_index=episode_index, terminal=False)


def nearest_landmark_distance(state, agent_id):
    ax, ay = state.agents[agent_id].pos
    best = math.inf
    for lx, ly in state.landmarks:
        d = math.hypot(lx - ax, ly - ay)
        if d < best:
            best = d
    return best


def _validate_actions(actions):
    acts = np.asarray(actions, dtype=np.float64)
    if acts.shape != (N_AGENTS, ACT_DIM):
        raise InputError(f"actions must be shaped {(N_AGENTS, ACT_DIM)}, "
                         f"got {acts.shape}")
    if not np.isfinite(acts).all():
        raise InputError("actions must be finite")
    if np.abs(acts).max() > 1.0 + 1e-9:
        raise InputError("action components must lie in [-1, 1]")
    return acts


def step(state, actions, config):
    """Advance the world one tick. Returns (new_state, StepOutcome)."""
    if state.terminal:
        raise StateError("cannot step a finished episode; call reset")
    acts = _validate_actions(actions)

    px = [a.pos[0] for a in state.agents]
    py = [a.pos[1] for a in state.agents]
    vx = [a.vel[0] for a in state.agents]
    vy = [a.vel[1] for a in state.agents]

    fx = [acts[i, 0] * config.accel_scale for i in range(N_AGENTS)]
    fy = [acts[i, 1] * config.accel_scale for i in range(N_AGENTS)]

    # soft-spring contact on overlapping bodies, before anything moves
    collisions = []
    k = config.contact_stiffness
    for i in range(N_AGENTS):
        for j in range(i + 1, N_AGENTS):
            dx = px[i] - px[j]
            dy = py[i] - py[j]
            dist = math.hypot(dx, dy)
            min_dist = state.agents[i].radius + state.agents[j].radius
            if dist >= min_dist:
                continue
            if dist > 1e-12:
                nx, ny = dx / dist, dy / dist
            else:
                nx, ny = 1.0, 0.0  # coincident centers: fixed push axis
            mag = k * (min_dist - dist)
            fx[i] += mag * nx
            fy[i] += mag * ny
            fx[j] -= mag * nx
            fy[j] -= mag * ny
            if state.agents[i].team != state.agents[j].team:
                collisions.append((i, j))

    dt = config.dt
    keep = 1.0 - config.damping
    new_agents = []
    for i in range(N_AGENTS):
        nvx = vx[i] * keep + fx[i] * dt
        nvy = vy[i] * keep + fy[i] * dt
        speed = math.hypot(nvx, nvy)
        cap = state.agents[i].max_speed
        if speed > cap:
            scale = cap / speed
            nvx *= scale
            nvy *= scale
        new_agents.append((px[i] + nvx * dt, py[i] + nvy * dt, nvx, nvy))

    # scoring: closest agent inside the touch radius wins, lowest id breaks ties
    scorer = None
    scoring_landmark = None
    best_dist = math.inf
    for i in range(N_AGENTS):
        ax, ay = new_agents[i][0], new_agents[i][1]
        for li, (lx, ly) in enumerate(state.landmarks):
            d = math.hypot(lx - ax, ly - ay)
            # ascending id order + strict < keeps the lowest id on ties
            if d < config.touch_radius and d < best_dist:
                best_dist = d
                scorer = i
                scoring_landmark = li

    h = config.board_half_extent
    out_of_bounds = []
    dense = []
    for i in range(N_AGENTS):
        ax, ay = new_agents[i][0], new_agents[i][1]
        nearest = min(math.hypot(lx - ax, ly - ay)
                      for lx, ly in state.landmarks)
        r = -config.distance_penalty_scale * nearest
        if abs(ax) > h or abs(ay) > h:
            r -= config.boundary_penalty
            out_of_bounds.append(i)
        dense.append(r)

    rewards = list(dense)
    if scorer is not None:
        win = team_of(scorer)
        for i in range(N_AGENTS):
            if team_of(i) == win:
                rewards[i] += config.landmark_reward
            else:
                rewards[i] -= config.landmark_reward

    next_step = state.step_index + 1
    done = scorer is not None or next_step >= config.max_episode_len

    agents = []
    for i in range(N_AGENTS):
        ax, ay, nvx, nvy = new_agents[i]
        cap = state.agents[i].max_speed
        if i == scorer:
            cap = cap + config.skill_rate * (config.max_speed_cap - cap)
        agents.append(replace(state.agents[i], pos=(ax, ay), vel=(nvx, nvy),
                              max_speed=cap))

    new_state = WorldState(agents=tuple(agents), landmarks=state.landmarks,
                           step_index=next_step,
                           episode_index=state.episode_index,
                           terminal=done)
    outcome = StepOutcome(rewards=tuple(rewards), dense_rewards=tuple(dense),
                          scorer=scorer, scoring_landmark=scoring_landmark,
                          collisions=tuple(collisions),
                          out_of_bounds=tuple(out_of_bounds), done=done)
    return new_state, outcome


def observe(state, agent_id):
    """Agent-centric observation, 15 floats.

    Layout: own pos (2), own vel (2), both landmarks relative (4),
    teammate relative (2), opponents relative by ascending id (4),
    own speed cap (1). Teammate-first ordering keeps the layout
    symmetric under swapping the two team blocks.
    """
    me = state.agents[agent_id]
    ax, ay = me.pos
    out = np.empty(OBS_DIM)
    out[0] = ax
    out[1] = ay
    out[2], out[3] = me.vel
    for k, (lx, ly) in enumerate(state.landmarks):
        out[4 + 2 * k] = lx - ax
        out[5 + 2 * k] = ly - ay
    order = (teammate_of(agent_id),) + opponents_of(agent_id)
    for k, other in enumerate(order):
        ox, oy = state.agents[other].pos
        out[8 + 2 * k] = ox - ax
        out[9 + 2 * k] = oy - ay
    out[14] = me.max_speed
    return out


def observe_all(state):
    return np.stack([observe(state, i) for i in range(N_AGENTS)])


def global_state(state):
    """Full board summary, 20 floats: per agent pos+vel, then landmarks."""
    out = np.empty(GLOBAL_DIM)
    for i, a in enumerate(state.agents):
        out[4 * i] = a.pos[0]
        out[4 * i + 1] = a.pos[1]
        out[4 * i + 2] = a.vel[0]
        out[4 * i + 3] = a.vel[1]
    for k, (lx, ly) in enumerate(state.landmarks):
        out[16 + 2 * k] = lx
        out[17 + 2 * k] = ly
    return out


def swap_team_frame(state):
    """View the world with the two team blocks exchanged.

    Agent slots map 0<->2 and 1<->3 (positions, velocities and speed caps
    travel with the body; ids/teams stay with the slot). Used by the
    evaluation harness to present a world to a policy in the frame it was
    trained in.
    """
    perm = (2, 3, 0, 1)
    agents = tuple(
        replace(state.agents[perm[i]], id=i, team=team_of(i))
        for i in range(N_AGENTS))
    return replace(state, agents=agents)
