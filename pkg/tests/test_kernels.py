"""Backend parity: the compiled kernels must agree with the numpy reference."""

import numpy as np
import pytest

import tmlab.kernels as kernels
from tmlab.kernels import _numpy as nb

compiled = kernels.compiled_backend()
needs_compiled = pytest.mark.skipif(compiled is None,
                                    reason="compiled backend not built")

SHAPES = [
    ([5, 16, 8, 3], 7),
    ([15, 64, 64, 2], 32),
    ([28, 64, 64, 1], 4),
    ([20, 64, 32, 1], 1),   # batch of one
    ([3, 1, 4], 2),         # width-1 hidden layer
    ([4, 9, 1], 256),
]
ACTS = [(nb.HIDDEN_RELU, nb.OUT_IDENTITY),
        (nb.HIDDEN_RELU, nb.OUT_TANH),
        (nb.HIDDEN_TANH, nb.OUT_SIGMOID),
        (nb.HIDDEN_TANH, nb.OUT_IDENTITY)]


def _random_net(sizes, rng):
    Ws = [rng.standard_normal((a, b)) / np.sqrt(a)
          for a, b in zip(sizes[:-1], sizes[1:])]
    bs = [rng.standard_normal(b) * 0.1 for b in sizes[1:]]
    return Ws, bs


@needs_compiled
@pytest.mark.parametrize("sizes,batch", SHAPES)
@pytest.mark.parametrize("hidden,out", ACTS)
def test_forward_backward_parity(sizes, batch, hidden, out):
    rng = np.random.default_rng(len(sizes) * 1000 + batch + hidden * 7 + out)
    Ws, bs = _random_net(sizes, rng)
    X = np.ascontiguousarray(rng.standard_normal((batch, sizes[0])))
    GY = np.ascontiguousarray(rng.standard_normal((batch, sizes[-1])))

    y_ref, cache_ref = nb.mlp_forward(X, Ws, bs, hidden, out, want_cache=True)
    y_c, cache_c = compiled.mlp_forward(X, Ws, bs, hidden, out, want_cache=True)
    np.testing.assert_allclose(y_c, y_ref, rtol=1e-12, atol=1e-14)

    dw_ref, db_ref, gx_ref = nb.mlp_backward(X, Ws, bs, hidden, out, cache_ref, GY)
    dw_c, db_c, gx_c = compiled.mlp_backward(X, Ws, bs, hidden, out, cache_c, GY)
    for a, b in zip(dw_ref + db_ref + [gx_ref], dw_c + db_c + [gx_c]):
        np.testing.assert_allclose(b, a, rtol=1e-11, atol=1e-13)

    # the input-only backward must agree with the full one in both backends
    gi_ref = nb.mlp_input_grad(X, Ws, bs, hidden, out, cache_ref, GY)
    gi_c = compiled.mlp_input_grad(X, Ws, bs, hidden, out, cache_c, GY)
    np.testing.assert_allclose(gi_ref, gx_ref, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(gi_c, gx_ref, rtol=1e-11, atol=1e-13)


@needs_compiled
def test_adam_parity():
    rng = np.random.default_rng(3)
    shapes = [(6, 4), (4,), (4, 1), (1,)]
    p_ref = [rng.standard_normal(s) for s in shapes]
    p_c = [a.copy() for a in p_ref]
    m_ref = [np.zeros(s) for s in shapes]
    v_ref = [np.zeros(s) for s in shapes]
    m_c = [np.zeros(s) for s in shapes]
    v_c = [np.zeros(s) for s in shapes]
    for t in range(1, 40):
        grads = [rng.standard_normal(s) for s in shapes]
        assert nb.adam_step(p_ref, grads, m_ref, v_ref, t, 1e-3, 0.9, 0.999,
                            1e-8) == 0
        assert compiled.adam_step(p_c, grads, m_c, v_c, t, 1e-3, 0.9, 0.999,
                                  1e-8) == 0
    for a, b in zip(p_ref + m_ref + v_ref, p_c + m_c + v_c):
        np.testing.assert_allclose(b, a, rtol=1e-12, atol=1e-15)


def test_adam_rejects_nonfinite_without_touching_state():
    shapes = [(3, 2), (2,)]
    for impl in filter(None, [nb, compiled]):
        rng = np.random.default_rng(9)
        p = [rng.standard_normal(s) for s in shapes]
        m = [np.zeros(s) for s in shapes]
        v = [np.zeros(s) for s in shapes]
        grads = [rng.standard_normal(s) for s in shapes]
        grads[1][1] = np.nan
        before = [a.copy() for a in p + m + v]
        assert impl.adam_step(p, grads, m, v, 1, 1e-3, 0.9, 0.999, 1e-8) == 1
        for a, b in zip(p + m + v, before):
            np.testing.assert_array_equal(a, b)
        grads[1][1] = np.inf
        assert impl.adam_step(p, grads, m, v, 1, 1e-3, 0.9, 0.999, 1e-8) == 1
        for a, b in zip(p + m + v, before):
            np.testing.assert_array_equal(a, b)


@needs_compiled
def test_polyak_parity():
    rng = np.random.default_rng(4)
    t_ref = [rng.standard_normal((5, 3)), rng.standard_normal(3)]
    s = [rng.standard_normal((5, 3)), rng.standard_normal(3)]
    t_c = [a.copy() for a in t_ref]
    for _ in range(25):
        nb.polyak_mix(t_ref, s, 0.01)
        compiled.polyak_mix(t_c, s, 0.01)
    for a, b in zip(t_ref, t_c):
        np.testing.assert_allclose(b, a, rtol=1e-13)


def _flat_net(sizes, rng):
    Ws, bs = _random_net(sizes, rng)
    theta = np.concatenate([a.ravel() for pair in zip(Ws, bs) for a in pair])
    return np.ascontiguousarray(theta)


FUSED_CRITICS = [
    ([28, 64, 64, 1], 64),
    ([28, 64, 64, 1], 1),
    ([10, 32, 1], 200),    # batch past numpy's pairwise-sum block size
    ([6, 1, 1], 3),
]


@needs_compiled
@pytest.mark.parametrize("sizes,batch", FUSED_CRITICS)
@pytest.mark.parametrize("hidden", [nb.HIDDEN_RELU, nb.HIDDEN_TANH])
def test_fused_regression_step_matches_composed_primitives(sizes, batch,
                                                           hidden):
    rng = np.random.default_rng(batch * 31 + hidden)
    theta = _flat_net(sizes, rng)
    X = np.ascontiguousarray(rng.standard_normal((batch, sizes[0])))
    y = rng.standard_normal(batch)

    g_ref = np.empty_like(theta)
    d_ref = nb.critic_mse_step(theta, tuple(sizes), hidden, nb.OUT_IDENTITY,
                               X, y, g_ref)
    g_c = np.empty_like(theta)
    d_c = compiled.critic_mse_step(theta, tuple(sizes), hidden,
                                   nb.OUT_IDENTITY, X, y, g_c)
    np.testing.assert_allclose(d_c, d_ref, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(g_c, g_ref, rtol=1e-11, atol=1e-13)

    # within one backend the fused step must replay the composed op
    # sequence exactly, or training trajectories shift between code paths
    Ws, bs = nb._unpack_params(theta, tuple(sizes))
    for impl, d_got, g_got in [(nb, d_ref, g_ref), (compiled, d_c, g_c)]:
        Y, cache = impl.mlp_forward(X, Ws, bs, hidden, nb.OUT_IDENTITY,
                                    want_cache=True)
        diff = Y[:, 0] - y
        upstream = (2.0 / batch) * diff[:, None]
        dws, dbs, _ = impl.mlp_backward(X, Ws, bs, hidden, nb.OUT_IDENTITY,
                                        cache, upstream)
        want = np.concatenate([a.ravel()
                               for pair in zip(dws, dbs) for a in pair])
        np.testing.assert_array_equal(d_got, diff)
        np.testing.assert_array_equal(g_got, want)


@needs_compiled
@pytest.mark.parametrize("batch", [1, 7, 64])
@pytest.mark.parametrize("hidden", [nb.HIDDEN_RELU, nb.HIDDEN_TANH])
def test_fused_ascent_step_matches_composed_primitives(batch, hidden):
    rng = np.random.default_rng(batch * 13 + hidden)
    asizes, csizes = (15, 64, 64, 2), (28, 64, 64, 1)
    n_agents, act_dim, g_dim, agent = 4, 2, 20, 2
    atheta = _flat_net(asizes, rng)
    ctheta = _flat_net(csizes, rng)
    obs = np.ascontiguousarray(rng.standard_normal((batch, asizes[0])))
    glob = np.ascontiguousarray(rng.standard_normal((batch, g_dim)))
    base_acts = rng.uniform(-1, 1, (batch, n_agents * act_dim))

    results = {}
    for impl in (nb, compiled):
        act_flat = base_acts.copy()
        gflat = np.empty_like(atheta)
        q = impl.actor_critic_ascent(atheta, asizes, hidden, nb.OUT_TANH,
                                     ctheta, csizes, hidden, nb.OUT_IDENTITY,
                                     obs, glob, act_flat, agent, act_dim,
                                     gflat)
        results[impl.BACKEND_NAME] = (q, gflat, act_flat)
    q_ref, g_ref, af_ref = results["numpy"]
    q_c, g_c, af_c = results["compiled"]
    np.testing.assert_allclose(q_c, q_ref, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(g_c, g_ref, rtol=1e-10, atol=1e-13)
    np.testing.assert_allclose(af_c, af_ref, rtol=1e-12, atol=1e-14)
    # untouched action columns pass through as-is
    keep = [j for j in range(n_agents * act_dim)
            if not agent * act_dim <= j < (agent + 1) * act_dim]
    np.testing.assert_array_equal(af_c[:, keep], base_acts[:, keep])

    # same-backend agreement with the composed primitives, exact
    aWs, abs_ = nb._unpack_params(atheta, asizes)
    cWs, cbs = nb._unpack_params(ctheta, csizes)
    for impl, (q_got, g_got, af_got) in [(nb, results["numpy"]),
                                         (compiled, results["compiled"])]:
        a, acache = impl.mlp_forward(obs, aWs, abs_, hidden, nb.OUT_TANH,
                                     want_cache=True)
        acts = base_acts.copy()
        acts[:, agent * act_dim:(agent + 1) * act_dim] = a
        cin = np.ascontiguousarray(np.concatenate([glob, acts], axis=1))
        q, ccache = impl.mlp_forward(cin, cWs, cbs, hidden, nb.OUT_IDENTITY,
                                     want_cache=True)
        gq = np.full((batch, 1), 1.0 / batch)
        gin = impl.mlp_input_grad(cin, cWs, cbs, hidden, nb.OUT_IDENTITY,
                                  ccache, gq)
        lo = g_dim + agent * act_dim
        ga = np.ascontiguousarray(gin[:, lo:lo + act_dim])
        dws, dbs, _ = impl.mlp_backward(obs, aWs, abs_, hidden, nb.OUT_TANH,
                                        acache, ga)
        want = np.concatenate([a2.ravel()
                               for pair in zip(dws, dbs) for a2 in pair])
        np.testing.assert_array_equal(q_got, q)
        np.testing.assert_array_equal(g_got, want)
        np.testing.assert_array_equal(af_got, acts)


def test_fused_steps_reject_bad_widths():
    for impl in filter(None, [nb, compiled]):
        theta = np.zeros(2 * 3 + 3)   # one (2, 3) layer
        g = np.empty_like(theta)
        with pytest.raises(ValueError):
            impl.critic_mse_step(theta, (2, 3), nb.HIDDEN_RELU,
                                 nb.OUT_IDENTITY, np.zeros((4, 2)),
                                 np.zeros(4), g)
        a_theta = np.zeros(3 * 2 + 2)  # one (3, 2) layer, act_dim 2
        c_theta = np.zeros(9 * 1 + 1)  # critic over 1 + 4*2 inputs
        with pytest.raises(ValueError):
            impl.actor_critic_ascent(a_theta, (3, 2), nb.HIDDEN_RELU,
                                     nb.OUT_TANH, c_theta, (9, 1),
                                     nb.HIDDEN_RELU, nb.OUT_IDENTITY,
                                     np.zeros((4, 3)), np.zeros((4, 1)),
                                     np.zeros((4, 8)), 0, 3, a_theta.copy())


def test_active_backend_exposed():
    assert kernels.BACKEND_NAME in ("compiled", "numpy")
    # sanity: the selected functions actually run
    X = np.zeros((2, 3))
    Ws = [np.zeros((3, 2))]
    bs = [np.array([0.5, -0.5])]
    Y = kernels.mlp_forward(X, Ws, bs, kernels.HIDDEN_RELU, kernels.OUT_IDENTITY)
    np.testing.assert_allclose(Y, [[0.5, -0.5], [0.5, -0.5]])


def test_sigmoid_extremes_stable():
    # the fused sigmoid must not overflow for large |z|
    X = np.array([[1000.0], [-1000.0]])
    Ws = [np.array([[1.0]])]
    bs = [np.array([0.0])]
    for impl in filter(None, [nb, compiled]):
        Y = impl.mlp_forward(X, Ws, bs, nb.HIDDEN_RELU, nb.OUT_SIGMOID)
        assert np.isfinite(Y).all()
        np.testing.assert_allclose(Y[:, 0], [1.0, 0.0], atol=1e-12)
