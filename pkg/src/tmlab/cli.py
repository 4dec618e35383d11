"""Command line front end.

Five subcommands: train, eval, tournament, fairness, and
pretrain-incentive. Exit status 0 on success, 2 when the command line
or a config value is bad (the message names the offending key), 1 for
IO, checkpoint and state failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import env as game
from .config import PRESET_NAMES, load_config, preset
from .errors import InputError, TmlabError, UsageError
from .evaluation import (confidence_interval, fairness_stddev, paired_eval,
                         team_policy, tournament)
from .incentives import SCHEME_AGENT_RL, SCHEME_TEAM_RL, WINDOW_DEFAULT
from .metrics import read_csv
from .runner import (CONFIG_DUMP_NAME, MANIFEST_NAME, checkpoint_path,
                     load_run, run_experiment)


def _cell(value):
    return repr(value) if isinstance(value, float) else str(value)


def _write_rows(path, header, rows):
    with open(path, "w", encoding="utf-8") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_cell(v) for v in row) + "\n")


def _base_config(args):
    """Experiment config from --config or a --scheme preset."""
    if (args.config is None) == (args.scheme is None):
        raise UsageError("exactly one of --config and --scheme is required")
    if args.config is not None:
        return load_config(args.config)
    return preset(args.scheme)


def _apply_overrides(cfg, args):
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seeds=(args.seed,))
    if args.episodes is not None:
        cfg = dataclasses.replace(cfg, episodes=args.episodes)
    if args.out is not None:
        cfg = dataclasses.replace(cfg, out_dir=args.out)
    return cfg


# -- train ---------------------------------------------------------------------


def cmd_train(args):
    cfg = _apply_overrides(_base_config(args), args)
    resume = None
    if args.checkpoint is not None:
        if len(cfg.seeds) != 1:
            raise UsageError("--checkpoint resumes a single seed; pass "
                             "--seed to pick it")
        resume = {cfg.seeds[0]: args.checkpoint}
    manifest = run_experiment(cfg, resume=resume)
    print(f"wrote {os.path.join(cfg.out_dir, MANIFEST_NAME)}")
    for seed in sorted(manifest["seeds"], key=int):
        paths = manifest["seeds"][seed]
        print(f"  seed {seed}: {paths['metrics']}, {paths['checkpoint']}")
    return 0


# -- checkpoint loading shared by eval and tournament --------------------------


def _split_spec(spec):
    """'path[:T]' -> (path, team or None); only a trailing :0 / :1 counts."""
    base, sep, tail = spec.rpartition(":")
    if sep and tail in ("0", "1"):
        return base, int(tail)
    return spec, None


def _load_bundle(spec, shared_config):
    """(run, TeamPolicy, team) for one checkpoint argument.

    Without --config the run's own dump, config.cfg next to the
    checkpoint, describes it. The team defaults to the run's weak team,
    the side the incentive schemes act on.
    """
    path, team = _split_spec(spec)
    if shared_config is not None:
        cfg = shared_config
    else:
        cfg = load_config(os.path.join(os.path.dirname(path),
                                       CONFIG_DUMP_NAME))
    run = load_run(cfg, path)
    if team is None:
        team = run.roles.weak_team
    return run, team_policy(run, team), team


def _arena_env(envs):
    """The shared world for head-to-head play.

    Speed caps travel with the bundles, so configs may differ in those;
    any other difference means the runs are not comparable.
    """
    norm = [dataclasses.replace(e, initial_max_speeds=(4.0,) * game.N_AGENTS)
            for e in envs]
    if any(n != norm[0] for n in norm[1:]):
        raise InputError("checkpoints were trained in different worlds; "
                         "pass --config to pick the evaluation arena")
    return norm[0]


# -- eval ----------------------------------------------------------------------

EVAL_HEADER = ("name_a", "name_b", "episodes", "wins_a", "wins_b", "draws",
               "rate_a", "rate_b", "agent_a0", "agent_a1", "agent_b0",
               "agent_b1", "collision_rate")


def _run_name(run, team):
    return f"{run.scheme.kind}/s{run.seed}/t{team}"


def cmd_eval(args):
    specs = args.checkpoint or []
    if len(specs) != 2:
        raise UsageError("eval needs --checkpoint given exactly twice")
    shared = load_config(args.config) if args.config else None
    run_a, bundle_a, side_a = _load_bundle(specs[0], shared)
    run_b, bundle_b, side_b = _load_bundle(specs[1], shared)
    arena = _arena_env([run_a.env_config, run_b.env_config])
    rng = np.random.default_rng(args.seed)
    report = paired_eval(bundle_a, bundle_b, args.configs, rng, config=arena)

    name_a = _run_name(run_a, side_a)
    name_b = _run_name(run_b, side_b)
    print(f"paired evaluation, {report.episodes} episodes "
          f"({report.draws} draws, collision rate "
          f"{report.collision_rate:.3f})")
    rates = report.team_rates
    agents = report.agent_rates
    for side, name in enumerate((name_a, name_b)):
        m0, m1 = agents[2 * side], agents[2 * side + 1]
        print(f"  {name}: wins {report.wins[side]} rate {rates[side]:.3f} "
              f"(members {m0:.3f} / {m1:.3f})")
    if args.out:
        row = (name_a, name_b, report.episodes, report.wins[0],
               report.wins[1], report.draws, rates[0], rates[1],
               agents[0], agents[1], agents[2], agents[3],
               report.collision_rate)
        _write_rows(args.out, EVAL_HEADER, [row])
    return 0


# -- tournament ----------------------------------------------------------------

TOURNAMENT_HEADER = ("name_a", "name_b", "episodes", "wins_a", "wins_b",
                     "draws", "weak_share_a", "weak_share_b")


def _match_weak_share(report, side, weak_member):
    scored = report.team_scores[side]
    if scored == 0:
        return 0.0
    return report.agent_scores[game.TEAM_SIZE * side + weak_member] / scored


def cmd_tournament(args):
    specs = args.checkpoint or []
    if len(specs) < 2:
        raise UsageError("tournament needs --checkpoint at least twice")
    shared = load_config(args.config) if args.config else None
    teams = {}
    envs = []
    for spec in specs:
        run, bundle, _ = _load_bundle(spec, shared)
        envs.append(run.env_config)
        name = run.scheme.kind
        n = 2
        while name in teams:  # same scheme twice: disambiguate
            name = f"{run.scheme.kind}#{n}"
            n += 1
        teams[name] = bundle
    arena = _arena_env(envs)
    rng = np.random.default_rng(args.seed)
    result = tournament(teams, args.configs, rng, config=arena)

    print(f"round robin: {len(teams)} teams, {len(result.matches)} "
          f"pairings, {2 * args.configs} episodes each")
    rows = []
    for match in result.matches:
        rep = match.report
        wa = _match_weak_share(rep, 0, teams[match.name_a].weak_member)
        wb = _match_weak_share(rep, 1, teams[match.name_b].weak_member)
        print(f"  {match.name_a} vs {match.name_b}: "
              f"{rep.wins[0]}:{rep.wins[1]} ({rep.draws} draws)")
        rows.append((match.name_a, match.name_b, rep.episodes, rep.wins[0],
                     rep.wins[1], rep.draws, wa, wb))
    print("weak-member share of team scores:")
    ranked = sorted(result.weak_share.items(), key=lambda kv: -kv[1])
    for rank, (name, share) in enumerate(ranked, start=1):
        print(f"  {rank}. {name}: {share:.3f}")
    if args.out:
        _write_rows(args.out, TOURNAMENT_HEADER, rows)
    return 0


# -- fairness ------------------------------------------------------------------

FAIRNESS_HEADER = ("log", "window", "fairness_stddev")


def cmd_fairness(args):
    values = []
    for path in args.logs:
        values.append(fairness_stddev(read_csv(path), args.window))
    print(f"fairness stddev over the final {args.window} episodes "
          "(lower is more even)")
    for path, value in zip(args.logs, values):
        print(f"  {path}: {value:.6f}")
    if len(values) >= 2:
        mean, half = confidence_interval(values)
        print(f"  mean {mean:.6f} +/- {half:.6f} "
              f"(95% CI over {len(values)} logs)")
    if args.out:
        _write_rows(args.out, FAIRNESS_HEADER,
                    [(path, args.window, float(value))
                     for path, value in zip(args.logs, values)])
    return 0


# -- pretrain-incentive --------------------------------------------------------


def cmd_pretrain_incentive(args):
    cfg = _apply_overrides(_base_config(args), args)
    if cfg.scheme.kind not in (SCHEME_TEAM_RL, SCHEME_AGENT_RL):
        raise UsageError(
            f"scheme {cfg.scheme.kind!r} has no learnable bonus; pick "
            f"{SCHEME_TEAM_RL!r} or {SCHEME_AGENT_RL!r}")
    scheme = dataclasses.replace(cfg.scheme, learn_rl=True)
    seed = cfg.seeds[0] if args.seed is None else args.seed
    cfg = dataclasses.replace(cfg, scheme=scheme, seeds=(seed,))
    run_experiment(cfg)
    print("pretrained bonus controller saved in "
          f"{checkpoint_path(cfg.out_dir, seed)}")
    return 0


# -- parser and dispatch -------------------------------------------------------


def _add_config_source(sp):
    sp.add_argument("--config", metavar="FILE",
                    help="experiment config file")
    sp.add_argument("--scheme", metavar="NAME", choices=PRESET_NAMES,
                    help="preset: " + ", ".join(PRESET_NAMES))


def _add_eval_flags(sp):
    sp.add_argument("--config", metavar="FILE",
                    help="config shared by all checkpoints (default: the "
                         "config.cfg next to each)")
    sp.add_argument("--configs", type=int, default=500, metavar="N",
                    help="world configurations, each played twice "
                         "(default 500)")
    sp.add_argument("--seed", type=int, default=0,
                    help="seed for the world draws (default 0)")
    sp.add_argument("--out", metavar="FILE", help="write summary CSV here")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tmlab",
        description="Team landmark game: training, evaluation, fairness.")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="command")

    t = sub.add_parser("train", help="train all seeds of one experiment")
    _add_config_source(t)
    t.add_argument("--seed", type=int, help="train this single seed only")
    t.add_argument("--episodes", type=int, help="override the run length")
    t.add_argument("--out", metavar="DIR",
                   help="override the output directory")
    t.add_argument("--checkpoint", metavar="FILE",
                   help="resume the (single) seed from this checkpoint")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval",
                       help="paired evaluation between two checkpoints")
    e.add_argument("--checkpoint", action="append", metavar="FILE[:TEAM]",
                   help="run checkpoint, given twice; a trailing :0 or :1 "
                        "picks the team, default is the run's weak team")
    _add_eval_flags(e)
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("tournament",
                       help="round robin over several checkpoints")
    r.add_argument("--checkpoint", action="append", metavar="FILE[:TEAM]",
                   help="run checkpoint, one per entrant (at least two)")
    _add_eval_flags(r)
    r.set_defaults(func=cmd_tournament)

    f = sub.add_parser("fairness",
                       help="per-agent landmark evenness of metrics logs")
    f.add_argument("logs", nargs="+", metavar="CSV",
                   help="metrics CSV files, typically one per seed")
    f.add_argument("--window", type=int, default=WINDOW_DEFAULT,
                   help=f"final episodes to average "
                        f"(default {WINDOW_DEFAULT})")
    f.add_argument("--out", metavar="FILE", help="write summary CSV here")
    f.set_defaults(func=cmd_fairness)

    p = sub.add_parser("pretrain-incentive",
                       help="train a learned bonus controller online")
    _add_config_source(p)
    p.add_argument("--seed", type=int, help="seed (default: first in config)")
    p.add_argument("--episodes", type=int, help="override the run length")
    p.add_argument("--out", metavar="DIR",
                   help="override the output directory")
    p.set_defaults(func=cmd_pretrain_incentive)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:  # argparse reported its own usage error
        return int(exit_.code or 0)
    try:
        return args.func(args)
    except (UsageError, InputError) as err:
        print(f"tmlab {args.command}: {err}", file=sys.stderr)
        return 2
    except (TmlabError, OSError) as err:
        print(f"tmlab {args.command}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
