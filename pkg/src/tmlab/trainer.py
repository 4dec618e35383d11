"""End-to-end training runs for both learners, deterministic and resumable.

A TrainRun owns everything an experiment touches: the environment config,
the four learners, the team controllers (ensemble algorithm only), the
replay buffer, the incentive engine, the per-episode metrics, and six
named RNG streams split from one master seed. state_dict()/load_state_dict()
round-trip the full picture, so a resumed run continues bit-for-bit like
an uninterrupted one.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import env as game
from .cmaddpg import (LOSE, WIN, CmaddpgHyper, EnsembleAgent, TeamController,
                      ensemble_critic_targets, ensemble_policy_update,
                      exploration_gate, explore_constant, label_teams)
from .errors import InputError, StateError
from .incentive_rl import (AgentRlEngine, IncentiveRlConfig, SacAgent,
                           TeamRlEngine)
from .incentives import (ALL_SCHEMES, SCHEME_AGENT_RL, SCHEME_BASELINE,
                         SCHEME_DYNAMIC_LANDMARK, SCHEME_DYNAMIC_SPEED,
                         SCHEME_STATIC_AGENT, SCHEME_STATIC_TEAM,
                         SCHEME_TEAM_RL, WINDOW_DEFAULT,
                         DynamicLandmarkEngine, DynamicSpeedEngine,
                         RoleAssignment, make_static_engine)
from .maddpg import (MaddpgAgent, actor_update, critic_input, critic_step,
                     critic_target_values, noise_level)
from .metrics import MetricsLog, MetricsRow
from .replay import ReplayBuffer, Transition

ALGORITHMS = ("cmaddpg", "maddpg")

_STREAMS = ("env", "explore", "sample", "init", "controller", "incentive")


@dataclass(frozen=True)
class SchemeSpec:
    """Which incentive scheme runs and its knobs."""

    kind: str = SCHEME_BASELINE
    alpha_team: float = 0.0
    alpha_agent: float = 0.0
    window: int = WINDOW_DEFAULT
    rl: IncentiveRlConfig = field(default_factory=IncentiveRlConfig)
    learn_rl: bool = False

    def __post_init__(self):
        if self.kind not in ALL_SCHEMES:
            raise InputError(
                f"unknown scheme {self.kind!r}; pick one of {ALL_SCHEMES}")


def make_engine(spec, roles, env_config, rng, sac_agent=None):
    r_l = env_config.landmark_reward
    if spec.kind in (SCHEME_BASELINE, SCHEME_STATIC_TEAM, SCHEME_STATIC_AGENT):
        return make_static_engine(spec.kind, roles, r_l, spec.alpha_team,
                                  spec.alpha_agent)
    if spec.kind == SCHEME_DYNAMIC_LANDMARK:
        return DynamicLandmarkEngine(roles, r_l, window=spec.window)
    if spec.kind == SCHEME_DYNAMIC_SPEED:
        return DynamicSpeedEngine(roles, r_l)
    cls = TeamRlEngine if spec.kind == SCHEME_TEAM_RL else AgentRlEngine
    sac = sac_agent or SacAgent(rng, spec.rl.sac)
    return cls(roles, r_l, env_config.max_speed_cap, sac, spec.rl, rng,
               learn=spec.learn_rl)


def _rng_state(gen):
    s = gen.bit_generator.state
    return {"bit_generator": s["bit_generator"],
            "state": str(s["state"]["state"]),
            "inc": str(s["state"]["inc"]),
            "has_uint32": int(s["has_uint32"]),
            "uinteger": int(s["uinteger"])}


def _set_rng_state(gen, d):
    gen.bit_generator.state = {
        "bit_generator": d["bit_generator"],
        "state": {"state": int(d["state"]), "inc": int(d["inc"])},
        "has_uint32": int(d["has_uint32"]),
        "uinteger": int(d["uinteger"])}


def _net_state(net, opt=None):
    out = {"params": net.params()}
    if opt is not None:
        out["m"] = opt.m
        out["v"] = opt.v
        out["t"] = opt.t
    return out


def _restore_net(net, sub, opt=None):
    for dst, src in zip(net.params(), sub["params"]):
        np.copyto(dst, src)
    if opt is not None:
        for dst, src in zip(opt.m, sub["m"]):
            np.copyto(dst, src)
        for dst, src in zip(opt.v, sub["v"]):
            np.copyto(dst, src)
        opt.t = int(sub["t"])


def _ensemble_state(agent):
    return {
        "policy_win": _net_state(agent.policies[WIN], agent.policy_opts[WIN]),
        "policy_lose": _net_state(agent.policies[LOSE],
                                  agent.policy_opts[LOSE]),
        "critic": _net_state(agent.critic, agent.critic_opt),
        "target_win": _net_state(agent.target_policies[WIN]),
        "target_lose": _net_state(agent.target_policies[LOSE]),
        "target_critic": _net_state(agent.target_critic),
    }


def _restore_ensemble(agent, sub):
    _restore_net(agent.policies[WIN], sub["policy_win"],
                 agent.policy_opts[WIN])
    _restore_net(agent.policies[LOSE], sub["policy_lose"],
                 agent.policy_opts[LOSE])
    _restore_net(agent.critic, sub["critic"], agent.critic_opt)
    _restore_net(agent.target_policies[WIN], sub["target_win"])
    _restore_net(agent.target_policies[LOSE], sub["target_lose"])
    _restore_net(agent.target_critic, sub["target_critic"])


def _maddpg_state(agent):
    return {
        "actor": _net_state(agent.actor, agent.actor_opt),
        "critic": _net_state(agent.critic, agent.critic_opt),
        "target_actor": _net_state(agent.target_actor),
        "target_critic": _net_state(agent.target_critic),
    }


def _restore_maddpg(agent, sub):
    _restore_net(agent.actor, sub["actor"], agent.actor_opt)
    _restore_net(agent.critic, sub["critic"], agent.critic_opt)
    _restore_net(agent.target_actor, sub["target_actor"])
    _restore_net(agent.target_critic, sub["target_critic"])


class TrainRun:
    """One seeded training run of a fixed length."""

    def __init__(self, env_config, hyper, scheme, seed, episodes,
                 algorithm="cmaddpg", sac_agent=None, roles=None):
        if algorithm not in ALGORITHMS:
            raise InputError(f"algorithm must be one of {ALGORITHMS}")
        if episodes < 0:
            raise InputError("episodes must be >= 0")
        if algorithm == "cmaddpg" and not isinstance(hyper, CmaddpgHyper):
            hyper = CmaddpgHyper(**asdict(hyper))
        self.env_config = env_config
        self.hyper = hyper
        self.scheme = scheme
        self.seed = int(seed)
        self.episodes = int(episodes)
        self.algorithm = algorithm

        streams = np.random.SeedSequence(self.seed).spawn(len(_STREAMS))
        self.rngs = {name: np.random.default_rng(s)
                     for name, s in zip(_STREAMS, streams)}

        self.roles = roles if roles is not None else \
            RoleAssignment.from_speeds(env_config.initial_max_speeds)
        init_rng = self.rngs["init"]
        if algorithm == "cmaddpg":
            self.agents = [EnsembleAgent(init_rng, hyper)
                           for _ in range(game.N_AGENTS)]
            self.controllers = [TeamController(init_rng, hyper)
                                for _ in range(game.N_TEAMS)]
            self.explore_c = explore_constant(hyper, self.episodes)
        else:
            self.agents = [MaddpgAgent(init_rng, hyper)
                           for _ in range(game.N_AGENTS)]
            self.controllers = None
            self.explore_c = None
        self.engine = make_engine(scheme, self.roles, env_config,
                                  self.rngs["incentive"], sac_agent)
        self.buffer = ReplayBuffer(hyper.replay_capacity)
        self.speeds = [float(s) for s in env_config.initial_max_speeds]
        self.episode = 0
        self.metrics = MetricsLog()

    # -- the loop ---------------------------------------------------------

    def run(self, until=None):
        stop = self.episodes if until is None else min(int(until),
                                                       self.episodes)
        while self.episode < stop:
            self._run_episode()
        return self

    def _choose_actions(self, state, obs, glob, ep, noise):
        acts = np.empty((game.N_AGENTS, game.ACT_DIM))
        if self.algorithm == "cmaddpg":
            picks = [c.select(glob) for c in self.controllers]
            explore_rng = self.rngs["explore"]
            for i in range(game.N_AGENTS):
                if exploration_gate(ep, self.explore_c, explore_rng):
                    acts[i] = explore_rng.uniform(-1.0, 1.0, game.ACT_DIM)
                else:
                    acts[i] = self.agents[i].act(obs[i],
                                                 picks[game.team_of(i)],
                                                 noise, explore_rng)
            return acts, picks
        for i in range(game.N_AGENTS):
            acts[i] = self.agents[i].act(obs[i], noise, self.rngs["explore"])
        return acts, (WIN, WIN)

    def _update_round(self):
        hyper = self.hyper
        if not self.buffer.is_ready(hyper.batch * hyper.min_buffer_factor):
            return
        batch = self.buffer.sample(hyper.batch, self.rngs["sample"])
        cin = critic_input(batch.glob, batch.actions)
        if self.algorithm == "cmaddpg":
            ys = ensemble_critic_targets(self.agents, batch, hyper.gamma)
            for i, agent in enumerate(self.agents):
                critic_step(agent.critic, agent.critic_opt, cin, ys[:, i])
            for i, agent in enumerate(self.agents):
                ensemble_policy_update(agent, i, batch)
        else:
            ys = critic_target_values(self.agents, batch, hyper.gamma)
            for i, agent in enumerate(self.agents):
                critic_step(agent.critic, agent.critic_opt, cin, ys[:, i])
            for i, agent in enumerate(self.agents):
                actor_update(agent, i, batch)
        for agent in self.agents:
            agent.soft_update_targets(hyper.polyak_rate)

    def _run_episode(self):
        ep = self.episode + 1
        cfg = self.env_config
        self.engine.begin_episode(ep, self.speeds)
        params = self.engine.params
        state = game.reset(cfg, self.rngs["env"], max_speeds=self.speeds,
                           episode_index=ep)
        noise = noise_level(self.hyper, ep)

        team_reward = [0.0, 0.0]
        win_picks = [0, 0]
        steps = 0
        collisions = 0
        scorer = None
        while True:
            obs = game.observe_all(state)
            glob = game.global_state(state)
            acts, picks = self._choose_actions(state, obs, glob, ep, noise)
            new_state, out = game.step(state, acts, cfg)

            if out.scorer is not None:
                term = self.engine.terminal_rewards(out.scorer)
                rewards = tuple(d + t for d, t in
                                zip(out.dense_rewards, term))
            else:
                rewards = out.dense_rewards

            labels = label_teams(self.agents, glob, acts) \
                if self.algorithm == "cmaddpg" \
                else np.array([WIN] * 4, dtype=np.int8)
            self.buffer.push(Transition(
                obs=obs, glob=glob, labels=labels, actions=acts,
                rewards=np.asarray(rewards),
                obs_next=game.observe_all(new_state),
                glob_next=game.global_state(new_state), done=out.done))
            if self.controllers is not None:
                self.controllers[0].push(glob, int(labels[0]))
                self.controllers[1].push(glob, int(labels[2]))

            self._update_round()

            steps += 1
            collisions += len(out.collisions)
            for k in range(2):
                if picks[k] == WIN:
                    win_picks[k] += 1
            team_reward[0] += rewards[0] + rewards[1]
            team_reward[1] += rewards[2] + rewards[3]
            state = new_state
            if out.done:
                scorer = out.scorer
                break

        self.speeds = [a.max_speed for a in state.agents]
        self.engine.end_episode(scorer, self.speeds)
        if (self.controllers is not None
                and ep % self.hyper.controller_interval == 0):
            for controller in self.controllers:
                if len(controller) > 0:
                    controller.update(self.rngs["controller"])

        lm = [0.0] * 4
        if scorer is not None:
            lm[scorer] = 1.0
        self.metrics.append(MetricsRow(
            episode=ep,
            team0_reward=team_reward[0] / game.TEAM_SIZE,
            team1_reward=team_reward[1] / game.TEAM_SIZE,
            lm_a0=lm[0], lm_a1=lm[1], lm_a2=lm[2], lm_a3=lm[3],
            winpol_t0=win_picks[0] / steps, winpol_t1=win_picks[1] / steps,
            speed_a0=self.speeds[0], speed_a1=self.speeds[1],
            speed_a2=self.speeds[2], speed_a3=self.speeds[3],
            incentive_team=params.alpha_team,
            incentive_agent=params.alpha_agent,
            collisions=collisions))
        self.episode = ep

    # -- persistence ------------------------------------------------------

    def state_dict(self):
        state = {
            "algorithm": self.algorithm,
            "seed": self.seed,
            "episodes": self.episodes,
            "roles": {"weak_team": self.roles.weak_team,
                      "weak_agent": self.roles.weak_agent},
            "episode": self.episode,
            "speeds": np.asarray(self.speeds),
            "rngs": {name: _rng_state(gen)
                     for name, gen in self.rngs.items()},
            "buffer": self.buffer.state_dict(),
            "engine": self.engine.state_dict(),
            "metrics": self.metrics.to_array(),
        }
        if self.algorithm == "cmaddpg":
            state["agents"] = [_ensemble_state(a) for a in self.agents]
            state["controllers"] = [c.state_dict() for c in self.controllers]
        else:
            state["agents"] = [_maddpg_state(a) for a in self.agents]
        return state

    def load_state_dict(self, state):
        if state["algorithm"] != self.algorithm:
            raise StateError(
                f"checkpoint is a {state['algorithm']} run, this run is "
                f"{self.algorithm}")
        if int(state["seed"]) != self.seed:
            raise StateError("checkpoint seed does not match run seed")
        if int(state["episodes"]) != self.episodes:
            raise StateError("checkpoint run length does not match")
        saved_roles = state.get("roles")
        if saved_roles is not None and (
                int(saved_roles["weak_team"]) != self.roles.weak_team
                or int(saved_roles["weak_agent"]) != self.roles.weak_agent):
            raise StateError("checkpoint role assignment does not match")
        self.episode = int(state["episode"])
        self.speeds = [float(s) for s in np.asarray(state["speeds"])]
        for name, gen in self.rngs.items():
            _set_rng_state(gen, state["rngs"][name])
        self.buffer.load_state_dict(state["buffer"])
        self.engine.load_state_dict(state["engine"])
        self.metrics = MetricsLog.from_array(state["metrics"])
        if self.algorithm == "cmaddpg":
            for agent, sub in zip(self.agents, state["agents"]):
                _restore_ensemble(agent, sub)
            for controller, sub in zip(self.controllers,
                                       state["controllers"]):
                controller.load_state_dict(sub)
        else:
            for agent, sub in zip(self.agents, state["agents"]):
                _restore_maddpg(agent, sub)


def pretrain_incentive(env_config, hyper, scheme_kind, rl_config, seed,
                       episodes):
    """Train the bonus controller online inside a full game run.

    scheme_kind picks which bonus is learned. Returns the finished
    TrainRun; the SAC agent sits on run.engine.sac and the per-block
    rewards on run.engine.block_rewards.
    """
    if scheme_kind not in (SCHEME_TEAM_RL, SCHEME_AGENT_RL):
        raise InputError("pretraining applies to the RL-assisted schemes")
    spec = SchemeSpec(kind=scheme_kind, rl=rl_config, learn_rl=True)
    run = TrainRun(env_config, hyper, spec, seed, episodes,
                   algorithm="cmaddpg")
    run.run()
    return run
