"""Checkpoint encoding: round trips, canonical bytes, corruption guards."""

import numpy as np
import pytest

from tmlab import checkpoint
from tmlab.cmaddpg import CmaddpgHyper
from tmlab.env import EnvConfig
from tmlab.errors import CorruptionError, FormatError
from tmlab.trainer import SchemeSpec, TrainRun


def deep_equal(a, b):
    if isinstance(a, dict):
        return (isinstance(b, dict) and sorted(a) == sorted(b)
                and all(deep_equal(a[k], b[k]) for k in a))
    if isinstance(a, (list, tuple)):
        return (isinstance(b, (list, tuple)) and len(a) == len(b)
                and all(deep_equal(x, y) for x, y in zip(a, b)))
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        a, b = np.asarray(a), np.asarray(b)
        return (a.dtype == b.dtype and a.shape == b.shape
                and np.array_equal(a, b, equal_nan=True))
    if isinstance(a, float) and isinstance(b, float):
        return a == b or (np.isnan(a) and np.isnan(b))
    return type(a) is type(b) and a == b


SAMPLE = {
    "none": None,
    "flag_on": True,
    "flag_off": False,
    "small_int": 42,
    "negative": -7,
    "huge": 2**127 + 3,            # beyond u64: rng words travel this way
    "pi": 3.141592653589793,
    "nan": float("nan"),
    "text": "speed caps → bonus",
    "vec": np.arange(6, dtype=np.float64).reshape(2, 3),
    "tags": np.array([1, 2, 2, 1], dtype=np.int8),
    "counts": np.array([5, 0, 9], dtype=np.int64),
    "empty_arr": np.zeros((0, 4)),
    "nested": {"list": [1.5, "two", [None, {"deep": 3}]],
               "tuple": (1, 2, 3)},
}


def test_round_trip_all_types():
    data = checkpoint.dumps(SAMPLE, meta={"scheme": "Baseline"})
    state, meta = checkpoint.loads(data)
    assert meta == {"scheme": "Baseline"}
    want = dict(SAMPLE)
    want["nested"] = {"list": [1.5, "two", [None, {"deep": 3}]],
                      "tuple": [1, 2, 3]}   # tuples come back as lists
    assert deep_equal(state, want)
    assert state["huge"] == 2**127 + 3


def test_dict_order_does_not_change_bytes():
    a = {"x": 1, "y": 2.0, "z": "s"}
    b = {"z": "s", "x": 1, "y": 2.0}
    assert checkpoint.dumps(a) == checkpoint.dumps(b)


def test_file_round_trip(tmp_path):
    path = tmp_path / "run.ckpt"
    n = checkpoint.save_checkpoint(path, SAMPLE, meta={"k": "v"})
    assert path.stat().st_size == n
    state, meta = checkpoint.load_checkpoint(path)
    assert meta == {"k": "v"}
    assert deep_equal(state["vec"], SAMPLE["vec"])


def test_bad_magic_rejected():
    data = b"XXXX" + checkpoint.dumps({})[4:]
    with pytest.raises(FormatError, match="magic"):
        checkpoint.loads(data)


def test_bad_version_rejected():
    data = bytearray(checkpoint.dumps({}))
    data[4] = 99
    with pytest.raises(FormatError, match="version"):
        checkpoint.loads(bytes(data))


def test_truncation_is_corruption():
    data = checkpoint.dumps(SAMPLE)
    for cut in (5, len(data) // 2, len(data) - 1):
        with pytest.raises(CorruptionError, match="truncated"):
            checkpoint.loads(data[:cut])


def test_trailing_garbage_is_corruption():
    data = checkpoint.dumps({"a": 1}) + b"\x00"
    with pytest.raises(CorruptionError, match="trailing"):
        checkpoint.loads(data)


def test_unserializable_rejected():
    with pytest.raises(FormatError, match="serialize"):
        checkpoint.dumps({"f": object()})
    with pytest.raises(FormatError, match="dtype"):
        checkpoint.dumps({"c": np.zeros(2, dtype=np.complex128)})
    with pytest.raises(FormatError, match="meta"):
        checkpoint.dumps({}, meta={"k": 3})


def test_train_run_round_trips_through_disk(tmp_path):
    hyper = CmaddpgHyper(hidden=(8, 8), batch=8, min_buffer_factor=2,
                         replay_capacity=1024, controller_window=256,
                         controller_batch=32, controller_passes=2,
                         controller_interval=5)
    config = EnvConfig(initial_max_speeds=(4.0, 4.0, 4.0, 2.0))

    straight = TrainRun(config, hyper, SchemeSpec(), 21, 16).run()

    half = TrainRun(config, hyper, SchemeSpec(), 21, 16).run(until=8)
    path = tmp_path / "half.ckpt"
    checkpoint.save_checkpoint(path, half.state_dict(),
                               meta={"algorithm": half.algorithm})
    state, meta = checkpoint.load_checkpoint(path)
    assert meta["algorithm"] == "cmaddpg"

    resumed = TrainRun(config, hyper, SchemeSpec(), 21, 16)
    resumed.load_state_dict(state)
    resumed.run()
    np.testing.assert_array_equal(resumed.metrics.to_array(),
                                  straight.metrics.to_array())
