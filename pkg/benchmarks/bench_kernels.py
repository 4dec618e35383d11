#!/usr/bin/env python3
"""Micro-benchmark of the net kernels: compiled extension vs numpy.

Times the primitives exactly as training issues them (cached forward,
backward, input gradient, Adam step, Polyak mix) on the network shapes
the game uses, then prints per-call times and the speedup. Build the
extension first:

    python3 setup.py build_ext --inplace
    python3 benchmarks/bench_kernels.py [--batch 64] [--repeats 300]
"""

import argparse
import time

import numpy as np

from tmlab.kernels import compiled_backend, numpy_backend

ACTOR = (15, 64, 64, 2)
CRITIC = (28, 64, 64, 1)
CONTROLLER = (20, 64, 32, 1)


def make_params(sizes, rng):
    Ws = [rng.standard_normal((a, b)) / np.sqrt(a)
          for a, b in zip(sizes, sizes[1:])]
    bs = [rng.standard_normal(b) * 0.01 for b in sizes[1:]]
    return Ws, bs


def timed(fn, repeats):
    """Median seconds per call over `repeats` calls, best of 3 rounds."""
    best = float("inf")
    for _ in range(3):
        samples = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            fn()
            samples.append(time.perf_counter() - t0)
        best = min(best, float(np.median(samples)))
    return best


def workloads(impl, batch, rng):
    """Named closures exercising one kernel call each."""
    k = numpy_backend  # activation codes are shared between backends
    aW, ab = make_params(ACTOR, rng)
    cW, cb = make_params(CRITIC, rng)
    gW, gb = make_params(CONTROLLER, rng)
    xa = rng.standard_normal((batch, ACTOR[0]))
    x1 = xa[:1].copy()
    xc = rng.standard_normal((batch, CRITIC[0]))
    xg = rng.standard_normal((batch, CONTROLLER[0]))
    gy = np.ones((batch, CRITIC[-1]))

    _, cache = impl.mlp_forward(xc, cW, cb, k.HIDDEN_RELU, k.OUT_IDENTITY,
                                want_cache=True)
    grads, gbs, _ = impl.mlp_backward(xc, cW, cb, k.HIDDEN_RELU,
                                      k.OUT_IDENTITY, cache, gy)
    ms = [np.zeros_like(w) for w in cW + cb]
    vs = [np.zeros_like(w) for w in cW + cb]
    tgt = [w.copy() for w in cW + cb]

    ath = np.concatenate([a.ravel() for pair in zip(aW, ab) for a in pair])
    cth = np.concatenate([a.ravel() for pair in zip(cW, cb) for a in pair])
    yv = rng.standard_normal(batch)
    glob = rng.standard_normal((batch, CRITIC[0] - 8))
    act_flat = rng.uniform(-1.0, 1.0, (batch, 8))
    gfa = np.empty_like(ath)
    gfc = np.empty_like(cth)

    return [
        ("actor fwd, B=1",
         lambda: impl.mlp_forward(x1, aW, ab, k.HIDDEN_RELU, k.OUT_TANH)),
        (f"actor fwd, B={batch}",
         lambda: impl.mlp_forward(xa, aW, ab, k.HIDDEN_RELU, k.OUT_TANH)),
        (f"critic fwd+cache, B={batch}",
         lambda: impl.mlp_forward(xc, cW, cb, k.HIDDEN_RELU, k.OUT_IDENTITY,
                                  want_cache=True)),
        (f"critic bwd, B={batch}",
         lambda: impl.mlp_backward(xc, cW, cb, k.HIDDEN_RELU, k.OUT_IDENTITY,
                                   cache, gy)),
        (f"critic input grad, B={batch}",
         lambda: impl.mlp_input_grad(xc, cW, cb, k.HIDDEN_RELU,
                                     k.OUT_IDENTITY, cache, gy)),
        (f"controller fwd, B={batch}",
         lambda: impl.mlp_forward(xg, gW, gb, k.HIDDEN_RELU, k.OUT_SIGMOID)),
        (f"fused critic step, B={batch}",
         lambda: impl.critic_mse_step(cth, CRITIC, k.HIDDEN_RELU,
                                      k.OUT_IDENTITY, xc, yv, gfc)),
        (f"fused actor ascent, B={batch}",
         lambda: impl.actor_critic_ascent(ath, ACTOR, k.HIDDEN_RELU,
                                          k.OUT_TANH, cth, CRITIC,
                                          k.HIDDEN_RELU, k.OUT_IDENTITY,
                                          xa, glob, act_flat, 2, 2, gfa)),
        ("adam step, critic",
         lambda: impl.adam_step(cW + cb, grads + gbs, ms, vs, 1,
                                1e-3, 0.9, 0.999, 1e-8)),
        ("polyak mix, critic",
         lambda: impl.polyak_mix(tgt, cW + cb, 0.01)),
    ]


def check_agreement(compiled, batch, rng):
    """Largest |compiled - numpy| over the forward/backward outputs."""
    k = numpy_backend
    W, b = make_params(CRITIC, rng)
    x = rng.standard_normal((batch, CRITIC[0]))
    gy = rng.standard_normal((batch, CRITIC[-1]))
    worst = 0.0
    for impl_a, impl_b in ((compiled, numpy_backend),):
        ya, ca = impl_a.mlp_forward(x, W, b, k.HIDDEN_RELU, k.OUT_IDENTITY,
                                    want_cache=True)
        yb, cb_ = impl_b.mlp_forward(x, W, b, k.HIDDEN_RELU, k.OUT_IDENTITY,
                                     want_cache=True)
        worst = max(worst, float(np.abs(ya - yb).max()))
        ga = impl_a.mlp_backward(x, W, b, k.HIDDEN_RELU, k.OUT_IDENTITY,
                                 ca, gy)
        gb_ = impl_b.mlp_backward(x, W, b, k.HIDDEN_RELU, k.OUT_IDENTITY,
                                  cb_, gy)
        for left, right in zip(ga[0] + ga[1] + [ga[2]],
                               gb_[0] + gb_[1] + [gb_[2]]):
            worst = max(worst, float(np.abs(left - right).max()))
    return worst


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=64)
    ap.add_argument("--repeats", type=int, default=300)
    args = ap.parse_args()

    compiled = compiled_backend()
    print(f"batch {args.batch}, {args.repeats} calls per round, "
          "median of best round")
    if compiled is None:
        print("compiled extension not built; timing the numpy backend only")
    else:
        gap = check_agreement(compiled, args.batch,
                              np.random.default_rng(7))
        print(f"backend agreement: max |diff| = {gap:.3e}")

    rows = []
    for name, fn in workloads(numpy_backend, args.batch,
                              np.random.default_rng(11)):
        rows.append([name, timed(fn, args.repeats), None])
    if compiled is not None:
        for row, (name, fn) in zip(rows, workloads(
                compiled, args.batch, np.random.default_rng(11))):
            assert row[0] == name
            row[2] = timed(fn, args.repeats)

    width = max(len(r[0]) for r in rows)
    header = f"{'kernel':<{width}}  {'numpy':>10}  {'compiled':>10}  speedup"
    print()
    print(header)
    print("-" * len(header))
    for name, t_np, t_c in rows:
        if t_c is None:
            print(f"{name:<{width}}  {t_np * 1e6:>8.1f}us  {'-':>10}")
        else:
            print(f"{name:<{width}}  {t_np * 1e6:>8.1f}us  "
                  f"{t_c * 1e6:>8.1f}us  {t_np / t_c:>6.2f}x")


if __name__ == "__main__":
    main()
