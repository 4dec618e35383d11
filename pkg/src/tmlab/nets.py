"""Dense networks, Adam, soft target updates, and the small loss helpers.

Everything is float64 and deterministic given the numpy Generator handed
in. Weight matrices are (fan_in, fan_out); a layer computes
``x @ W + b``. Gradients are exact (checked against central finite
differences in the test suite), no autograd involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InputError, NumericError, ShapeError

_HIDDEN_CODES = {"relu": kernels.HIDDEN_RELU, "tanh": kernels.HIDDEN_TANH}
_OUTPUT_CODES = {
    "identity": kernels.OUT_IDENTITY,
    "tanh": kernels.OUT_TANH,
    "sigmoid": kernels.OUT_SIGMOID,
}

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


def _as_batch(x, dim, name):
    if type(x) is np.ndarray and x.ndim == 2 and x.shape[1] == dim \
            and x.dtype == np.float64 and x.flags.c_contiguous:
        return x, False
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        if arr.shape[0] != dim:
            raise ShapeError(f"{name} must have length {dim}, got {arr.shape[0]}")
        return np.ascontiguousarray(arr[None, :]), True
    if arr.ndim == 2:
        if arr.shape[1] != dim:
            raise ShapeError(
                f"{name} must have {dim} columns, got {arr.shape[1]}")
        return np.ascontiguousarray(arr), False
    raise ShapeError(f"{name} must be 1- or 2-dimensional, got ndim={arr.ndim}")


@dataclass
class MlpGrads:
    """Parameter gradients for one Mlp, same layout as Mlp.params().

    When the gradients were produced by Mlp.backward, ``flat`` is the
    single buffer the per-layer arrays are views into, letting the
    optimizer consume them in one sweep. Hand-built instances may leave
    it None; everything then works array by array.
    """

    d_weights: list
    d_biases: list
    flat: np.ndarray = None

    def arrays(self):
        out = []
        for dw, db in zip(self.d_weights, self.d_biases):
            out.append(dw)
            out.append(db)
        return out

    def scale(self, factor):
        if self.flat is not None:
            self.flat *= factor
            return self
        for a in self.arrays():
            a *= factor
        return self

    def negate(self):
        if self.flat is not None:
            np.negative(self.flat, out=self.flat)
            return self
        for a in self.arrays():
            np.negative(a, out=a)
        return self

    @classmethod
    def from_flat(cls, flat, sizes):
        """Wrap a flat gradient buffer in per-layer views for net sizes."""
        dws, dbs, off = [], [], 0
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            dws.append(flat[off:off + n_in * n_out].reshape(n_in, n_out))
            off += n_in * n_out
            dbs.append(flat[off:off + n_out])
            off += n_out
        return cls(dws, dbs, flat)


class Mlp:
    """Fully connected net with one hidden activation and one output head."""

    def __init__(self, sizes, hidden="relu", output="identity", rng=None):
        sizes = tuple(int(s) for s in sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise InputError(f"sizes must list >=2 positive widths, got {sizes}")
        if hidden not in _HIDDEN_CODES:
            raise InputError(f"hidden must be one of {sorted(_HIDDEN_CODES)}")
        if output not in _OUTPUT_CODES:
            raise InputError(f"output must be one of {sorted(_OUTPUT_CODES)}")
        self.sizes = sizes
        self.hidden = hidden
        self.output = output
        self._hidden_code = _HIDDEN_CODES[hidden]
        self._output_code = _OUTPUT_CODES[output]
        # all parameters live in one flat vector; weights/biases are views
        # into it, so whole-net ops (Adam, polyak, copies) run in one sweep
        self.theta = np.empty(sum(
            (i + 1) * o for i, o in zip(sizes[:-1], sizes[1:])))
        self._attach_views()
        if rng is None:
            rng = np.random.default_rng(0)
        for n_in, w, b in zip(sizes[:-1], self.weights, self.biases):
            bound = 1.0 / np.sqrt(n_in)
            w[:] = rng.uniform(-bound, bound, size=w.shape)
            b[:] = rng.uniform(-bound, bound, size=b.shape)

    def _attach_views(self):
        self.weights = []
        self.biases = []
        off = 0
        for n_in, n_out in zip(self.sizes[:-1], self.sizes[1:]):
            self.weights.append(
                self.theta[off:off + n_in * n_out].reshape(n_in, n_out))
            off += n_in * n_out
            self.biases.append(self.theta[off:off + n_out])
            off += n_out

    @property
    def in_dim(self):
        return self.sizes[0]

    @property
    def out_dim(self):
        return self.sizes[-1]

    @property
    def n_params(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def params(self):
        """Live references, interleaved W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def copy(self):
        dup = Mlp.__new__(Mlp)
        dup.sizes = self.sizes
        dup.hidden = self.hidden
        dup.output = self.output
        dup._hidden_code = self._hidden_code
        dup._output_code = self._output_code
        dup.theta = self.theta.copy()
        dup._attach_views()
        return dup

    def set_from(self, other):
        if other.sizes != self.sizes:
            raise ShapeError(
                f"cannot copy params between sizes {other.sizes} and {self.sizes}")
        np.copyto(self.theta, other.theta)

    def forward(self, x):
        X, single = _as_batch(x, self.in_dim, "x")
        Y = kernels.mlp_forward(X, self.weights, self.biases,
                                self._hidden_code, self._output_code)
        return Y[0] if single else Y

    def forward_batch(self, X):
        X, _ = _as_batch(X, self.in_dim, "X")
        return kernels.mlp_forward(X, self.weights, self.biases,
                                   self._hidden_code, self._output_code)

    def forward_cached(self, X):
        """Batch forward that also returns the per-layer activation cache."""
        X, _ = _as_batch(X, self.in_dim, "X")
        Y, cache = kernels.mlp_forward(X, self.weights, self.biases,
                                       self._hidden_code, self._output_code,
                                       want_cache=True)
        return X, Y, cache

    def backward(self, X, upstream, cache):
        """Gradients of sum_b <Y[b], upstream[b]> wrt params and input.

        X and cache must come from forward_cached. Returns
        (MlpGrads, d_input) with d_input shaped like X. For a mean-based
        objective, fold the 1/B into upstream.
        """
        GY = np.asarray(upstream, dtype=np.float64)
        if GY.shape != (X.shape[0], self.out_dim):
            raise ShapeError(
                f"upstream must be {(X.shape[0], self.out_dim)}, got {GY.shape}")
        GY = np.ascontiguousarray(GY)
        grads = MlpGrads.from_flat(np.empty(self.theta.shape[0]), self.sizes)
        _, _, GX = kernels.mlp_backward(
            X, self.weights, self.biases, self._hidden_code,
            self._output_code, cache, GY,
            out_dws=grads.d_weights, out_dbs=grads.d_biases)
        return grads, GX

    def input_grad(self, X, upstream, cache):
        """d(sum_b <Y[b], upstream[b]>)/dX alone, skipping parameter grads.

        Cheaper than backward when the net is frozen and only the input
        sensitivity is needed (e.g. pushing value gradients into actions).
        """
        GY = np.asarray(upstream, dtype=np.float64)
        if GY.shape != (X.shape[0], self.out_dim):
            raise ShapeError(
                f"upstream must be {(X.shape[0], self.out_dim)}, got {GY.shape}")
        GY = np.ascontiguousarray(GY)
        return kernels.mlp_input_grad(X, self.weights, self.biases,
                                      self._hidden_code, self._output_code,
                                      cache, GY)


class Adam:
    """Adam bound to one Mlp; updates parameters in place."""

    def __init__(self, net, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        if lr <= 0.0:
            raise InputError(f"lr must be positive, got {lr}")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise InputError("betas must lie in [0, 1)")
        self.net = net
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        # params() returns stable views into net.theta (all state loading
        # goes through copyto), so both lists can be captured once; moments
        # mirror the flat layout with per-param views for checkpointing
        self._params = net.params()
        self._m_flat = np.zeros_like(net.theta)
        self._v_flat = np.zeros_like(net.theta)
        self.m = _views_like(self._m_flat, self._params)
        self.v = _views_like(self._v_flat, self._params)

    def step(self, grads):
        """Apply one descent step. grads: MlpGrads or list matching params()."""
        if isinstance(grads, MlpGrads) and grads.flat is not None and \
                grads.flat.shape == self.net.theta.shape:
            # whole-net sweep; the kernel pre-scans for non-finite grads
            # and applies nothing if it finds any, so state stays clean
            bad = kernels.adam_flat(self.net.theta, grads.flat, self._m_flat,
                                    self._v_flat, self.t + 1, self.lr,
                                    self.beta1, self.beta2, self.eps)
            if bad:
                raise NumericError("non-finite gradient passed to Adam")
            self.t += 1
            return
        arrays = grads.arrays() if isinstance(grads, MlpGrads) else list(grads)
        params = self._params
        if len(arrays) != len(params):
            raise ShapeError(
                f"expected {len(params)} gradient arrays, got {len(arrays)}")
        for g, p in zip(arrays, params):
            if g.shape != p.shape:
                raise ShapeError(
                    f"gradient shape {g.shape} does not match param {p.shape}")
        bad = kernels.adam_step(params, arrays, self.m, self.v, self.t + 1,
                                self.lr, self.beta1, self.beta2, self.eps)
        if bad:
            raise NumericError("non-finite gradient passed to Adam")
        self.t += 1

    def state_arrays(self):
        return self.m + self.v


def _views_like(flat, params):
    """Per-param views into a flat vector laid out like Mlp.theta."""
    out = []
    off = 0
    for p in params:
        out.append(flat[off:off + p.size].reshape(p.shape))
        off += p.size
    return out


def polyak_update(target, source, rate):
    """target <- (1 - rate) * target + rate * source, parameter-wise."""
    if not (0.0 <= rate <= 1.0):
        raise InputError(f"rate must be in [0, 1], got {rate}")
    if target.sizes != source.sizes:
        raise ShapeError(
            f"polyak between different sizes {target.sizes} vs {source.sizes}")
    kernels.polyak_flat(target.theta, source.theta, rate)


def cross_entropy(p, label, eps=1e-7):
    """Binary cross entropy against the winning/losing label.

    label 1 ("winning") maps to target 1.0, label 2 ("losing") to 0.0.
    Probabilities are clamped to [eps, 1-eps] before the log; the
    derivative is evaluated at the clamped value so it stays bounded.
    Works elementwise on scalars or arrays; returns (loss, dloss_dp).
    """
    p_arr = np.asarray(p, dtype=np.float64)
    lab = np.asarray(label)
    if not np.isin(lab, (1, 2)).all():
        raise InputError("labels must be 1 (winning) or 2 (losing)")
    t = (lab == 1).astype(np.float64)
    pc = np.clip(p_arr, eps, 1.0 - eps)
    loss = -(t * np.log(pc) + (1.0 - t) * np.log1p(-pc))
    grad = (pc - t) / (pc * (1.0 - pc))
    if np.isscalar(p) or p_arr.ndim == 0:
        return float(loss), float(grad)
    return loss, grad


def softplus(x):
    return np.logaddexp(0.0, x)


def squash_gaussian(mean, log_std_raw, eps_noise):
    """Deterministic tanh-squashed Gaussian transform.

    Given the policy head outputs and a standard-normal draw, returns
    (action, log_prob, z, log_std) where z = mean + exp(log_std) * eps and
    action = tanh(z). log_std is clamped to [LOG_STD_MIN, LOG_STD_MAX].
    The tanh correction uses log(1 - tanh(z)^2) = 2 (log 2 - z -
    softplus(-2z)), which stays finite for any z. log_prob sums over the
    action dimensions.
    """
    mean = np.asarray(mean, dtype=np.float64)
    log_std = np.clip(np.asarray(log_std_raw, dtype=np.float64),
                      LOG_STD_MIN, LOG_STD_MAX)
    eps_noise = np.asarray(eps_noise, dtype=np.float64)
    z = mean + np.exp(log_std) * eps_noise
    action = np.tanh(z)
    gauss = -0.5 * eps_noise * eps_noise - log_std - _LOG_SQRT_2PI
    correction = 2.0 * (np.log(2.0) - z - softplus(-2.0 * z))
    log_prob = np.sum(gauss - correction, axis=-1)
    return action, log_prob, z, log_std


def squashed_gaussian_sample(mean, log_std_raw, rng):
    """Sample an action in (-1, 1) per dimension and return its log-density."""
    mean = np.asarray(mean, dtype=np.float64)
    eps_noise = rng.standard_normal(mean.shape)
    action, log_prob, _, _ = squash_gaussian(mean, log_std_raw, eps_noise)
    return action, log_prob
