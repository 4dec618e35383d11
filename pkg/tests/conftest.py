"""Shared test helpers: finite-difference oracles and tolerance math."""

import numpy as np
import pytest


def numeric_grad(f, arrays, h=1e-5):
    """Central-difference gradient of scalar f() wrt each array, in place.

    f must read the arrays afresh on every call. Returns gradients with
    the same shapes, restoring the original values afterwards.
    """
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        flat = a.ravel()
        gf = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = f()
            flat[i] = orig - h
            fm = f()
            flat[i] = orig
            gf[i] = (fp - fm) / (2.0 * h)
        grads.append(g)
    return grads


def max_rel_err(analytic, numeric, floor=1e-6):
    """Worst relative error, elementwise |a-n| / max(|a|, |n|, floor)."""
    worst = 0.0
    for a, n in zip(analytic, numeric):
        a = np.asarray(a, dtype=np.float64)
        n = np.asarray(n, dtype=np.float64)
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def assert_grads_match(analytic, numeric, tol=1e-4, floor=1e-6):
    err = max_rel_err(analytic, numeric, floor=floor)
    assert err <= tol, f"gradient mismatch: worst rel err {err:.3e} > {tol}"


@pytest.fixture
def rng():
    return np.random.default_rng(20260816)
