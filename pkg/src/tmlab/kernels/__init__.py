"""Kernel backend selection.

Two interchangeable implementations of the dense-net primitives exist:
a compiled Cython extension (``_core``) and a plain numpy fallback
(``_numpy``). The active one is picked once at import time. Set
TMLAB_KERNELS=compiled|numpy|auto to override; ``auto`` (the default)
prefers the compiled backend and silently falls back when the extension
is missing, while an explicit ``compiled`` raises if it cannot load.
"""

import os

from .. import errors
from . import _numpy
from ._numpy import (
    HIDDEN_RELU,
    HIDDEN_TANH,
    OUT_IDENTITY,
    OUT_SIGMOID,
    OUT_TANH,
)

_choice = os.environ.get("TMLAB_KERNELS", "auto").strip().lower()
if _choice not in ("auto", "compiled", "numpy"):
    raise errors.UsageError(
        f"TMLAB_KERNELS must be auto, compiled or numpy, got {_choice!r}")

_impl = None
if _choice in ("auto", "compiled"):
    try:
        from . import _core as _impl
    except ImportError:
        if _choice == "compiled":
            raise errors.StateError(
                "TMLAB_KERNELS=compiled but the compiled extension is not "
                "available; rebuild the package or use TMLAB_KERNELS=numpy")
        _impl = None
if _impl is None:
    _impl = _numpy

BACKEND_NAME = _impl.BACKEND_NAME
mlp_forward = _impl.mlp_forward
mlp_backward = _impl.mlp_backward
mlp_input_grad = _impl.mlp_input_grad
adam_step = _impl.adam_step
adam_flat = _impl.adam_flat
polyak_mix = _impl.polyak_mix
polyak_flat = _impl.polyak_flat
critic_mse_step = _impl.critic_mse_step
actor_critic_ascent = _impl.actor_critic_ascent

numpy_backend = _numpy


def compiled_backend():
    """Return the compiled backend module, or None when not built."""
    try:
        from . import _core
    except ImportError:
        return None
    return _core


__all__ = [
    "BACKEND_NAME",
    "HIDDEN_RELU",
    "HIDDEN_TANH",
    "OUT_IDENTITY",
    "OUT_TANH",
    "OUT_SIGMOID",
    "mlp_forward",
    "mlp_backward",
    "mlp_input_grad",
    "adam_step",
    "adam_flat",
    "polyak_mix",
    "polyak_flat",
    "critic_mse_step",
    "actor_critic_ascent",
    "numpy_backend",
    "compiled_backend",
]
