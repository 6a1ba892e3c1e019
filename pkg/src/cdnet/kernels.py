"""Hot numeric kernels with a compiled core and a pure-numpy fallback.

The backend is chosen once at import time. ``CDNET_KERNEL_BACKEND`` overrides
the choice: ``cython`` demands the compiled extension (ImportError if it is
missing), ``python`` forces the numpy fallback, ``auto`` / unset prefers the
extension when it imports. ``BACKEND`` records what was picked.

With the extension enabled, each call still routes wide contractions
(in_channels * out_channels above _COMPILED_CHANNEL_LIMIT) to the numpy
implementation: those reduce to a large matrix product where BLAS beats the
compiled loops, while skinny shapes are GEMM-unfriendly and the compiled
streaming loops win (see benchmarks/bench_kernels.py).

Both backends implement the same two functions on pre-padded arrays:

    conv1d_forward(xp, kernels)            xp [B,C,Lp], kernels [O,C,K] -> [B,O,Lo]
    conv1d_backward(grad_out, xp, kernels) -> (grad_xp [B,C,Lp], grad_kernels [O,C,K])

with Lo = Lp - K + 1. Padding and the bias term are handled by the caller.
"""

import os

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _np_conv1d_forward(xp, kernels):
    windows = sliding_window_view(xp, kernels.shape[2], axis=2)  # [B,C,Lo,K]
    out = np.tensordot(windows, kernels, axes=((1, 3), (1, 2)))  # [B,Lo,O]
    return np.ascontiguousarray(out.transpose(0, 2, 1))


def _np_conv1d_backward(grad_out, xp, kernels):
    k_width = kernels.shape[2]
    out_len = grad_out.shape[2]
    windows = sliding_window_view(xp, k_width, axis=2)  # [B,C,Lo,K]
    grad_kernels = np.tensordot(grad_out, windows, axes=((0, 2), (0, 2)))  # [O,C,K]
    spread = np.tensordot(grad_out, kernels, axes=(1, 0))  # [B,Lo,C,K]
    grad_xp = np.zeros_like(xp)
    for j in range(k_width):
        grad_xp[:, :, j:j + out_len] += spread[:, :, :, j].transpose(0, 2, 1)
    return grad_xp, grad_kernels


# Crossover measured on the shapes in benchmarks/bench_kernels.py: the
# compiled kernels win up to channel product 16, lose from 256 up.
_COMPILED_CHANNEL_LIMIT = 128


def _dispatching_forward(xp, kernels):
    if kernels.shape[0] * kernels.shape[1] <= _COMPILED_CHANNEL_LIMIT:
        return _convkernels.conv1d_forward(xp, kernels)
    return _np_conv1d_forward(xp, kernels)


def _dispatching_backward(grad_out, xp, kernels):
    if kernels.shape[0] * kernels.shape[1] <= _COMPILED_CHANNEL_LIMIT:
        return _convkernels.conv1d_backward(grad_out, xp, kernels)
    return _np_conv1d_backward(grad_out, xp, kernels)


_requested = os.environ.get("CDNET_KERNEL_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "cython", "python", ""):
    raise ValueError(
        f"CDNET_KERNEL_BACKEND must be 'auto', 'cython' or 'python', got {_requested!r}"
    )

if _requested == "python":
    BACKEND = "python"
    conv1d_forward = _np_conv1d_forward
    conv1d_backward = _np_conv1d_backward
else:
    try:
        from . import _convkernels
        BACKEND = "cython"
        conv1d_forward = _dispatching_forward
        conv1d_backward = _dispatching_backward
    except ImportError:
        if _requested == "cython":
            raise
        BACKEND = "python"
        conv1d_forward = _np_conv1d_forward
        conv1d_backward = _np_conv1d_backward
