"""Reference implementation of the dense-net kernels in plain numpy.

This backend defines the semantics; the compiled backend in ``_core.pyx``
must agree with it to float64 round-off. All arrays are C-contiguous
float64. Weight matrices are stored (fan_in, fan_out) so a forward layer
is ``X @ W + b``.

Activation codes (shared with the compiled backend):
    hidden: 0 = relu, 1 = tanh
    output: 0 = identity, 1 = tanh, 2 = sigmoid
"""

import numpy as np

HIDDEN_RELU = 0
HIDDEN_TANH = 1
OUT_IDENTITY = 0
OUT_TANH = 1
OUT_SIGMOID = 2

BACKEND_NAME = "numpy"


def _sigmoid(z):
    # piecewise form avoids overflow in exp for large |z|
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def mlp_forward(X, Ws, bs, hidden_act, out_act, want_cache=False):
    """Forward pass through a fully connected net.

    X: (B, n0). Ws[l]: (n_l, n_{l+1}). bs[l]: (n_{l+1},).
    Returns Y (B, n_L), or (Y, cache) when want_cache is true. The cache
    holds the post-activation output of every layer, output included.
    """
    A = X
    cache = [] if want_cache else None
    n_layers = len(Ws)
    for l in range(n_layers):
        Z = A @ Ws[l]
        Z += bs[l]
        if l < n_layers - 1:
            if hidden_act == HIDDEN_RELU:
                np.maximum(Z, 0.0, out=Z)
            else:
                np.tanh(Z, out=Z)
        else:
            if out_act == OUT_TANH:
                np.tanh(Z, out=Z)
            elif out_act == OUT_SIGMOID:
                Z = _sigmoid(Z)
        if want_cache:
            cache.append(Z)
        A = Z
    if want_cache:
        return A, cache
    return A


def mlp_backward(X, Ws, bs, hidden_act, out_act, cache, GY,
                 out_dws=None, out_dbs=None):
    """Backward pass for the scalar objective sum_b <Y[b], GY[b]>.

    cache must come from mlp_forward(..., want_cache=True) on the same
    inputs. Returns (dWs, dbs, GX) where the weight gradients match the
    layout of Ws/bs and GX has the shape of X. Callers that want a mean
    objective scale GY by 1/B themselves. out_dws/out_dbs, when given,
    are preallocated gradient arrays written in place and returned.
    """
    n_layers = len(Ws)
    Y = cache[-1]
    if out_act == OUT_TANH:
        G = GY * (1.0 - Y * Y)
    elif out_act == OUT_SIGMOID:
        G = GY * (Y * (1.0 - Y))
    else:
        G = GY.copy()
    dWs = [None] * n_layers if out_dws is None else out_dws
    dbs = [None] * n_layers if out_dbs is None else out_dbs
    for l in range(n_layers - 1, -1, -1):
        A_prev = X if l == 0 else cache[l - 1]
        if out_dws is None:
            dWs[l] = A_prev.T @ G
        else:
            np.matmul(A_prev.T, G, out=dWs[l])
        if out_dbs is None:
            dbs[l] = G.sum(axis=0)
        else:
            G.sum(axis=0, out=dbs[l])
        G = G @ Ws[l].T
        if l > 0:
            H = cache[l - 1]
            if hidden_act == HIDDEN_RELU:
                G *= (H > 0.0)
            else:
                G *= (1.0 - H * H)
    return dWs, dbs, G


def mlp_input_grad(X, Ws, bs, hidden_act, out_act, cache, GY):
    """Input gradient of sum_b <Y[b], GY[b]>, skipping parameter grads.

    Same recursion as mlp_backward without the dW/db products; used when
    differentiating through a frozen net.
    """
    n_layers = len(Ws)
    Y = cache[-1]
    if out_act == OUT_TANH:
        G = GY * (1.0 - Y * Y)
    elif out_act == OUT_SIGMOID:
        G = GY * (Y * (1.0 - Y))
    else:
        G = GY.copy()
    for l in range(n_layers - 1, -1, -1):
        G = G @ Ws[l].T
        if l > 0:
            H = cache[l - 1]
            if hidden_act == HIDDEN_RELU:
                G *= (H > 0.0)
            else:
                G *= (1.0 - H * H)
    return G


def _unpack_params(theta, sizes):
    """Per-layer (Ws, bs) views into a flat parameter vector."""
    Ws, bs, off = [], [], 0
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        Ws.append(theta[off:off + n_in * n_out].reshape(n_in, n_out))
        off += n_in * n_out
        bs.append(theta[off:off + n_out])
        off += n_out
    return Ws, bs


def _grad_views(gflat, sizes):
    dws, dbs = _unpack_params(gflat, sizes)
    return dws, dbs


def critic_mse_step(theta, sizes, hidden_act, out_act, X, y, gflat):
    """Fused value-regression step: forward, residual, backward.

    theta holds the net's parameters flat; gradients of mean((q - y)^2)
    are written into gflat in the same layout. Returns the residual
    vector q - y so the caller can form the loss. Output width must be 1.
    """
    if sizes[-1] != 1:
        raise ValueError(f"output width must be 1, got {sizes[-1]}")
    Ws, bs = _unpack_params(theta, sizes)
    out_dws, out_dbs = _grad_views(gflat, sizes)
    Y, cache = mlp_forward(X, Ws, bs, hidden_act, out_act, want_cache=True)
    diff = Y[:, 0] - y
    upstream = (2.0 / X.shape[0]) * diff[:, None]
    mlp_backward(X, Ws, bs, hidden_act, out_act, cache, upstream,
                 out_dws=out_dws, out_dbs=out_dbs)
    return diff


def actor_critic_ascent(atheta, asizes, ahidden, aout, ctheta, csizes,
                        chidden, cout, obs, glob, act_flat, agent_index,
                        act_dim, gflat):
    """Fused policy-gradient step through a frozen scoring net.

    Runs the actor on obs, splices its output into column block
    agent_index of act_flat (mutated in place), scores [glob, act_flat]
    with the critic, and backpropagates mean(q) through the critic input
    into the actor's parameters, written flat into gflat. Returns the
    critic output column (B, 1).
    """
    if csizes[-1] != 1:
        raise ValueError(f"critic output width must be 1, got {csizes[-1]}")
    if asizes[-1] != act_dim:
        raise ValueError(
            f"actor output width must be {act_dim}, got {asizes[-1]}")
    aWs, abs_ = _unpack_params(atheta, asizes)
    cWs, cbs = _unpack_params(ctheta, csizes)
    a, acache = mlp_forward(obs, aWs, abs_, ahidden, aout, want_cache=True)
    lo = agent_index * act_dim
    act_flat[:, lo:lo + act_dim] = a
    cin = np.ascontiguousarray(
        np.concatenate([glob, act_flat], axis=1))
    q, ccache = mlp_forward(cin, cWs, cbs, chidden, cout, want_cache=True)
    B = obs.shape[0]
    gq = np.full((B, 1), 1.0 / B)
    gin = mlp_input_grad(cin, cWs, cbs, chidden, cout, ccache, gq)
    glo = glob.shape[1] + lo
    ga = np.ascontiguousarray(gin[:, glo:glo + act_dim])
    out_dws, out_dbs = _grad_views(gflat, asizes)
    mlp_backward(obs, aWs, abs_, ahidden, aout, acache, ga,
                 out_dws=out_dws, out_dbs=out_dbs)
    return q


def adam_step(params, grads, ms, vs, t, lr, beta1, beta2, eps):
    """One Adam update, in place on params/ms/vs. t is the 1-based step.

    Returns 0 after updating; returns 1 and leaves everything untouched
    when any gradient entry is non-finite.
    """
    for g in grads:
        if not np.isfinite(g).all():
            return 1
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for p, g, m, v in zip(params, grads, ms, vs):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return 0


def adam_flat(p, g, m, v, t, lr, beta1, beta2, eps):
    """adam_step for parameters packed into single flat vectors.

    Elementwise identical to the list form; one array per role instead of
    one per layer. Same non-finite contract: returns 1 and changes nothing
    when g holds a non-finite entry, else updates in place and returns 0.
    """
    if not np.isfinite(g).all():
        return 1
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return 0


def polyak_mix(targets, sources, rate):
    """targets <- (1 - rate) * targets + rate * sources, in place."""
    for tgt, src in zip(targets, sources):
        tgt *= (1.0 - rate)
        tgt += rate * src


def polyak_flat(target, source, rate):
    """polyak_mix for one flat parameter vector per net."""
    target *= (1.0 - rate)
    target += rate * source
