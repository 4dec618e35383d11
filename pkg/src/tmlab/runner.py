"""Runs experiments seed by seed and lays out their output files.

One experiment directory holds a canonical config dump, one metrics CSV
and one checkpoint per seed, and a manifest.json tying them together.
Every output byte is determined by (config, seed) except the manifest's
timestamps. Seeds are independent jobs; TMLAB_THREADS caps how many run
at once.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .config import config_hash, config_text
from .errors import InputError, StateError
from .metrics import write_csv
from .trainer import TrainRun

MANIFEST_NAME = "manifest.json"
CONFIG_DUMP_NAME = "config.cfg"


def metrics_path(out_dir, seed):
    return os.path.join(out_dir, f"metrics_seed{seed}.csv")


def checkpoint_path(out_dir, seed):
    return os.path.join(out_dir, f"checkpoint_seed{seed}.tmlb")


def max_workers(n_jobs):
    """Worker count for n_jobs seeds, capped by TMLAB_THREADS."""
    raw = os.environ.get("TMLAB_THREADS", "")
    if raw:
        try:
            cap = int(raw)
        except ValueError:
            raise InputError(
                f"TMLAB_THREADS must be an integer, got {raw!r}") from None
        if cap < 1:
            raise InputError("TMLAB_THREADS must be >= 1")
    else:
        cap = os.cpu_count() or 1
    return max(1, min(n_jobs, cap))


def build_run(config, seed, checkpoint=None):
    """A TrainRun for one seed of the experiment, optionally resumed."""
    run = TrainRun(config.env, config.hyper, config.scheme, seed,
                   config.episodes, algorithm=config.algorithm,
                   roles=config.roles)
    if checkpoint is not None:
        state, _ = load_checkpoint(checkpoint)
        run.load_state_dict(state)
    return run


def load_run(config, path):
    """Rebuild a run from its checkpoint, for evaluation or inspection.

    The checkpoint must have been written under the same config: its
    recorded config hash is compared and a mismatch is an error naming
    the path. Seed and run length come from the checkpoint itself.
    """
    state, meta = load_checkpoint(path)
    saved = meta.get("config_hash", "")
    want = config_hash(config)
    if saved and saved != want:
        raise StateError(
            f"checkpoint {path} was written under a different config "
            f"(hash {saved[:12]}.., expected {want[:12]}..)")
    run = TrainRun(config.env, config.hyper, config.scheme,
                   int(state["seed"]), int(state["episodes"]),
                   algorithm=str(state["algorithm"]), roles=config.roles)
    run.load_state_dict(state)
    return run


def run_seed(config, seed, out_dir, checkpoint=None):
    """Train one seed to completion, checkpointing on the configured
    interval, and write its metrics CSV. Returns the output paths."""
    run = build_run(config, seed, checkpoint)
    ckpt = checkpoint_path(out_dir, seed)
    meta = {"config_hash": config_hash(config), "seed": str(seed)}
    interval = config.checkpoint_interval
    while run.episode < run.episodes:
        if interval > 0:
            stop = min(run.episodes,
                       (run.episode // interval + 1) * interval)
        else:
            stop = run.episodes
        run.run(until=stop)
        save_checkpoint(ckpt, run.state_dict(), meta)
    if run.episodes == 0 or not os.path.exists(ckpt):
        save_checkpoint(ckpt, run.state_dict(), meta)
    csv = metrics_path(out_dir, seed)
    write_csv(run.metrics, csv)
    return {"metrics": os.path.basename(csv),
            "checkpoint": os.path.basename(ckpt)}


def _utc_stamp():
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def run_experiment(config, out_dir=None, resume=None):
    """All seeds of one experiment. Writes config dump, per-seed metrics
    and checkpoints, then the manifest; returns the manifest dict.

    resume maps a seed to a checkpoint to continue from instead of
    starting that seed fresh."""
    out_dir = config.out_dir if out_dir is None else out_dir
    resume = resume or {}
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, CONFIG_DUMP_NAME), "w",
              encoding="utf-8") as f:
        f.write(config_text(config))

    started = _utc_stamp()
    seeds = list(config.seeds)
    workers = max_workers(len(seeds))
    if workers == 1:
        outputs = [run_seed(config, s, out_dir, resume.get(s))
                   for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(
                lambda s: run_seed(config, s, out_dir, resume.get(s)),
                seeds))

    manifest = {
        "artifact_version": __version__,
        "config_hash": config_hash(config),
        "algorithm": config.algorithm,
        "scheme": config.scheme.kind,
        "episodes": config.episodes,
        "started": started,
        "finished": _utc_stamp(),
        "seeds": {str(s): paths for s, paths in zip(seeds, outputs)},
    }
    with open(os.path.join(out_dir, MANIFEST_NAME), "w",
              encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest
