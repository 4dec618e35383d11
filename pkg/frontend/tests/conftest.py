"""Synthesizers for the two CSV shapes the figures consume."""

import numpy as np
import pytest

MAGIC = "# tmlab-metrics-v1"
HEADER = ("episode,team0_reward,team1_reward,"
          "lm_a0,lm_a1,lm_a2,lm_a3,winpol_t0,winpol_t1,"
          "speed_a0,speed_a1,speed_a2,speed_a3,"
          "incentive_team,incentive_agent,collisions")


def write_metrics(path, n, seed):
    """A plausible n-episode log; deterministic in (n, seed)."""
    rng = np.random.default_rng(seed)
    lines = [MAGIC, HEADER]
    speeds = np.array([4.0, 4.0, 4.0, 2.0])
    for ep in range(1, n + 1):
        scorer = int(rng.integers(0, 5))  # 4 means nobody scored
        lm = [0.0] * 4
        if scorer < 4:
            lm[scorer] = 1.0
            speeds[scorer] += 0.01 * (5.0 - speeds[scorer])
        cells = [str(ep),
                 repr(float(rng.normal(-5.0, 2.0))),
                 repr(float(rng.normal(-5.0, 2.0))),
                 *(repr(v) for v in lm),
                 repr(float(rng.uniform(0.0, 1.0))),
                 repr(float(rng.uniform(0.0, 1.0))),
                 *(repr(float(s)) for s in speeds),
                 repr(float(rng.uniform(0.0, 1.0))),
                 repr(float(rng.uniform(0.0, 0.5))),
                 str(int(rng.integers(0, 6)))]
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


def write_tournament(path, seed, names=("StaticAgent", "DynamicSpeed",
                                        "Baseline")):
    """A round-robin summary over the given entrants."""
    rng = np.random.default_rng(seed)
    rows = ["name_a,name_b,episodes,wins_a,wins_b,draws,"
            "weak_share_a,weak_share_b"]
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            episodes = 100
            wins_a = int(rng.integers(20, 60))
            wins_b = int(rng.integers(10, episodes - wins_a))
            draws = episodes - wins_a - wins_b
            rows.append(f"{a},{b},{episodes},{wins_a},{wins_b},{draws},"
                        f"{repr(float(rng.uniform(0, 1)))},"
                        f"{repr(float(rng.uniform(0, 1)))}")
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return str(path)


@pytest.fixture
def metrics_trio(tmp_path):
    """Three seed logs of the same 400-episode experiment."""
    return tuple(write_metrics(tmp_path / f"metrics_seed{i}.csv", 400, i)
                 for i in (1, 2, 3))
