# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled correlation kernels for 1-d convolution layers.

Both functions work on pre-padded inputs: padding policy lives in the caller
so this module stays a plain sliding-dot-product. The inner loops run over the
output length with fixed (batch, channel, tap) indices, which keeps memory
access contiguous and lets the C compiler vectorize them.
"""

import numpy as np


def conv1d_forward(double[:, :, ::1] xp, double[:, :, ::1] kernels):
    """Cross-correlate xp [B, C, Lp] with kernels [O, C, K] -> [B, O, Lp-K+1]."""
    cdef Py_ssize_t B = xp.shape[0]
    cdef Py_ssize_t C = xp.shape[1]
    cdef Py_ssize_t Lp = xp.shape[2]
    cdef Py_ssize_t O = kernels.shape[0]
    cdef Py_ssize_t K = kernels.shape[2]
    cdef Py_ssize_t Lo = Lp - K + 1
    out_arr = np.zeros((B, O, Lo), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t b, o, c, j, l
    cdef double w
    with nogil:
        for b in range(B):
            for o in range(O):
                for c in range(C):
                    for j in range(K):
                        w = kernels[o, c, j]
                        for l in range(Lo):
                            out[b, o, l] += w * xp[b, c, j + l]
    return out_arr


def conv1d_backward(double[:, :, ::1] grad_out, double[:, :, ::1] xp,
                    double[:, :, ::1] kernels):
    """Adjoint of conv1d_forward.

    grad_out is [B, O, Lo]; returns (grad_xp [B, C, Lp], grad_kernels [O, C, K]).
    The bias adjoint is a plain sum the caller does itself.
    """
    cdef Py_ssize_t B = xp.shape[0]
    cdef Py_ssize_t C = xp.shape[1]
    cdef Py_ssize_t Lp = xp.shape[2]
    cdef Py_ssize_t O = kernels.shape[0]
    cdef Py_ssize_t K = kernels.shape[2]
    cdef Py_ssize_t Lo = grad_out.shape[2]
    grad_xp_arr = np.zeros((B, C, Lp), dtype=np.float64)
    grad_k_arr = np.zeros((O, C, K), dtype=np.float64)
    cdef double[:, :, ::1] gxp = grad_xp_arr
    cdef double[:, :, ::1] gk = grad_k_arr
    cdef Py_ssize_t b, o, c, j, l
    cdef double w, acc
    with nogil:
        for b in range(B):
            for o in range(O):
                for c in range(C):
                    for j in range(K):
                        acc = 0.0
                        w = kernels[o, c, j]
                        for l in range(Lo):
                            acc += grad_out[b, o, l] * xp[b, c, j + l]
                            gxp[b, c, j + l] += w * grad_out[b, o, l]
                        gk[o, c, j] += acc
    return grad_xp_arr, grad_k_arr
