"""End-to-end checks of the command line surface.

Training here uses a deliberately tiny network and run length; the point
is the plumbing (exit codes, file layout, report shape), not learning.
"""

import os

import pytest

from tmlab.checkpoint import save_checkpoint
from tmlab.cli import main
from tmlab.cmaddpg import CmaddpgHyper
from tmlab.config import ExperimentConfig, config_text, load_config
from tmlab.env import EnvConfig
from tmlab.incentives import (SCHEME_BASELINE, SCHEME_DYNAMIC_LANDMARK,
                              SCHEME_STATIC_AGENT, SCHEME_STATIC_TEAM,
                              SCHEME_TEAM_RL)
from tmlab.runner import build_run, checkpoint_path, metrics_path
from tmlab.trainer import SchemeSpec

FAST = CmaddpgHyper(hidden=(8, 8), batch=8, min_buffer_factor=2,
                    replay_capacity=4096, controller_window=1024,
                    controller_batch=32, controller_passes=2,
                    controller_interval=5)

# contact forces off: head-to-head play is exactly slot-symmetric
THIN_WORLD = EnvConfig(agent_radius=1e-6)


def write_cfg(path, **kw):
    kw.setdefault("hyper", FAST)
    cfg = ExperimentConfig(**kw)
    with open(path, "w", encoding="utf-8") as f:
        f.write(config_text(cfg))
    return cfg


def read_rows(path):
    with open(path, encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        return [dict(zip(header, line.strip().split(",")))
                for line in f if line.strip()]


def data_lines(csv_path):
    with open(csv_path, encoding="utf-8") as f:
        return [l for l in f.read().splitlines()
                if l and not l.startswith("#")]


@pytest.fixture(scope="module")
def duo(tmp_path_factory):
    """Two tiny trained runs in the contact-free world, plus their config."""
    root = tmp_path_factory.mktemp("cliduo")
    cfg = str(root / "exp.cfg")
    write_cfg(cfg, env=THIN_WORLD, seeds=(1,), episodes=6,
              out_dir=str(root / "default"))
    a, b = str(root / "a"), str(root / "b")
    assert main(["train", "--config", cfg, "--seed", "1", "--out", a]) == 0
    assert main(["train", "--config", cfg, "--seed", "2", "--out", b]) == 0
    return {"cfg": cfg, "a": a, "b": b,
            "ckpt_a": checkpoint_path(a, 1), "ckpt_b": checkpoint_path(b, 2)}


@pytest.fixture(scope="module")
def quad(tmp_path_factory):
    """One tiny checkpoint per incentive scheme, same world."""
    root = tmp_path_factory.mktemp("cliquad")
    ckpts = []
    kinds = (SCHEME_BASELINE, SCHEME_STATIC_TEAM, SCHEME_STATIC_AGENT,
             SCHEME_DYNAMIC_LANDMARK)
    for i, kind in enumerate(kinds):
        out = str(root / f"t{i}")
        cfg = str(root / f"t{i}.cfg")
        write_cfg(cfg, env=THIN_WORLD, seeds=(i + 1,), episodes=4,
                  out_dir=out, scheme=SchemeSpec(kind=kind))
        assert main(["train", "--config", cfg]) == 0
        ckpts.append(checkpoint_path(out, i + 1))
    return ckpts


def test_train_zero_episodes_writes_header_only(tmp_path, capsys):
    cfg = str(tmp_path / "exp.cfg")
    out = str(tmp_path / "out")
    write_cfg(cfg, seeds=(1,), episodes=0, out_dir=out)
    assert main(["train", "--config", cfg]) == 0
    lines = data_lines(metrics_path(out, 1))
    assert len(lines) == 1 and lines[0].startswith("episode,")
    assert os.path.exists(checkpoint_path(out, 1))
    assert "manifest.json" in capsys.readouterr().out


def test_train_same_config_and_seed_is_byte_identical(tmp_path):
    cfg = str(tmp_path / "exp.cfg")
    write_cfg(cfg, seeds=(1,), episodes=4, out_dir=str(tmp_path / "x"))
    out1, out2 = str(tmp_path / "r1"), str(tmp_path / "r2")
    assert main(["train", "--config", cfg, "--out", out1]) == 0
    assert main(["train", "--config", cfg, "--out", out2]) == 0
    with open(metrics_path(out1, 1), "rb") as f:
        first = f.read()
    with open(metrics_path(out2, 1), "rb") as f:
        second = f.read()
    assert first == second


def test_train_one_metrics_file_per_seed(tmp_path, capsys):
    cfg = str(tmp_path / "exp.cfg")
    out = str(tmp_path / "out")
    write_cfg(cfg, seeds=(1, 2, 3, 4), episodes=2, out_dir=out)
    assert main(["train", "--config", cfg]) == 0
    for seed in (1, 2, 3, 4):
        assert os.path.exists(metrics_path(out, seed))
    assert os.path.exists(os.path.join(out, "manifest.json"))
    printed = capsys.readouterr().out
    assert all(f"seed {s}:" in printed for s in (1, 2, 3, 4))


def test_bad_config_key_is_named(tmp_path, capsys):
    cfg = str(tmp_path / "exp.cfg")
    with open(cfg, "w", encoding="utf-8") as f:
        f.write("env.dtt = 0.1\n")
    assert main(["train", "--config", cfg]) == 2
    assert "env.dtt" in capsys.readouterr().err


def test_config_source_must_be_exactly_one(tmp_path, capsys):
    cfg = str(tmp_path / "exp.cfg")
    write_cfg(cfg, seeds=(1,), episodes=0, out_dir=str(tmp_path / "o"))
    assert main(["train", "--config", cfg, "--scheme", "Baseline"]) == 2
    assert main(["train"]) == 2
    capsys.readouterr()


def test_missing_checkpoint_error_names_path(duo, capsys):
    bogus = checkpoint_path(duo["a"], 9)
    assert main(["eval", "--checkpoint", bogus,
                 "--checkpoint", duo["ckpt_b"]]) == 1
    assert bogus in capsys.readouterr().err


def test_eval_needs_exactly_two_checkpoints(duo, capsys):
    assert main(["eval", "--checkpoint", duo["ckpt_a"]]) == 2
    capsys.readouterr()


def test_eval_swapped_arguments_mirror(duo, tmp_path, capsys):
    csv1, csv2 = str(tmp_path / "r1.csv"), str(tmp_path / "r2.csv")
    base = ["--configs", "20", "--seed", "5"]
    assert main(["eval", "--checkpoint", duo["ckpt_a"],
                 "--checkpoint", duo["ckpt_b"], "--out", csv1] + base) == 0
    assert "paired evaluation" in capsys.readouterr().out
    assert main(["eval", "--checkpoint", duo["ckpt_b"],
                 "--checkpoint", duo["ckpt_a"], "--out", csv2] + base) == 0
    (r1,), (r2,) = read_rows(csv1), read_rows(csv2)
    assert r1["episodes"] == r2["episodes"] == "40"
    assert r1["draws"] == r2["draws"]
    assert (r1["wins_a"], r1["wins_b"]) == (r2["wins_b"], r2["wins_a"])
    assert (r1["rate_a"], r1["rate_b"]) == (r2["rate_b"], r2["rate_a"])
    assert (r1["agent_a0"], r1["agent_a1"]) == (r2["agent_b0"],
                                                r2["agent_b1"])
    assert (r1["agent_b0"], r1["agent_b1"]) == (r2["agent_a0"],
                                                r2["agent_a1"])
    assert r1["collision_rate"] == r2["collision_rate"]


def test_eval_accepts_team_suffix(duo, tmp_path):
    csv = str(tmp_path / "r.csv")
    assert main(["eval", "--checkpoint", duo["ckpt_a"] + ":1",
                 "--checkpoint", duo["ckpt_b"] + ":0",
                 "--configs", "3", "--out", csv]) == 0
    (row,) = read_rows(csv)
    assert row["name_a"].endswith("/t1") and row["name_b"].endswith("/t0")


def test_tournament_four_entrants_six_pairings(quad, tmp_path, capsys):
    csv = str(tmp_path / "t.csv")
    argv = ["tournament"]
    for c in quad:
        argv += ["--checkpoint", c]
    assert main(argv + ["--configs", "3", "--out", csv]) == 0
    rows = read_rows(csv)
    assert len(rows) == 6
    names = {r["name_a"] for r in rows} | {r["name_b"] for r in rows}
    assert names == {SCHEME_BASELINE, SCHEME_STATIC_TEAM,
                     SCHEME_STATIC_AGENT, SCHEME_DYNAMIC_LANDMARK}
    for r in rows:
        assert r["episodes"] == "6"
        assert 0.0 <= float(r["weak_share_a"]) <= 1.0
        assert 0.0 <= float(r["weak_share_b"]) <= 1.0
    printed = capsys.readouterr().out
    assert "6 pairings" in printed
    assert "weak-member share" in printed


def test_tournament_needs_two_checkpoints(quad, capsys):
    assert main(["tournament", "--checkpoint", quad[0]]) == 2
    capsys.readouterr()


def test_fairness_window_longer_than_log_fails(duo, capsys):
    log = metrics_path(duo["a"], 1)
    assert main(["fairness", log, "--window", "1000"]) == 2
    assert "window" in capsys.readouterr().err


def test_fairness_reports_each_log_and_interval(duo, tmp_path, capsys):
    logs = [metrics_path(duo["a"], 1), metrics_path(duo["b"], 2)]
    csv = str(tmp_path / "f.csv")
    assert main(["fairness", *logs, "--window", "3", "--out", csv]) == 0
    printed = capsys.readouterr().out
    assert "fairness stddev" in printed and "95% CI" in printed
    rows = read_rows(csv)
    assert [r["log"] for r in rows] == logs
    assert all(r["window"] == "3" for r in rows)
    assert all(float(r["fairness_stddev"]) >= 0.0 for r in rows)


def test_train_resume_matches_uninterrupted(duo, tmp_path):
    cfg = load_config(duo["cfg"])
    run = build_run(cfg, 1)
    run.run(until=3)
    partial = str(tmp_path / "partial.tmlb")
    save_checkpoint(partial, run.state_dict(), {})
    resumed = str(tmp_path / "resumed")
    assert main(["train", "--config", duo["cfg"], "--seed", "1",
                 "--out", resumed, "--checkpoint", partial]) == 0
    with open(metrics_path(duo["a"], 1), "rb") as f:
        full = f.read()
    with open(metrics_path(resumed, 1), "rb") as f:
        again = f.read()
    assert full == again


def test_train_resume_requires_single_seed(tmp_path, capsys):
    cfg = str(tmp_path / "exp.cfg")
    write_cfg(cfg, seeds=(1, 2), episodes=4, out_dir=str(tmp_path / "o"))
    assert main(["train", "--config", cfg,
                 "--checkpoint", "anything.tmlb"]) == 2
    assert "seed" in capsys.readouterr().err


def test_pretrain_incentive_rejects_fixed_schemes(capsys):
    assert main(["pretrain-incentive", "--scheme", "Baseline"]) == 2
    assert "Baseline" in capsys.readouterr().err


def test_pretrain_incentive_forces_learning_on(tmp_path, capsys):
    cfg = str(tmp_path / "exp.cfg")
    out = str(tmp_path / "out")
    write_cfg(cfg, seeds=(3,), episodes=2, out_dir=out,
              scheme=SchemeSpec(kind=SCHEME_TEAM_RL))
    assert main(["pretrain-incentive", "--config", cfg]) == 0
    assert checkpoint_path(out, 3) in capsys.readouterr().out
    assert os.path.exists(checkpoint_path(out, 3))
    with open(os.path.join(out, "config.cfg"), encoding="utf-8") as f:
        assert "scheme.learn_rl = true" in f.read()
