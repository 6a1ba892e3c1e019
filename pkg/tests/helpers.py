"""Shared test oracles: numeric differentiation and gradient comparison."""

import numpy as np

from cdnet import tensor as T


def forward_value(build):
    """Evaluate the scalar loss of ``build()`` without recording a tape."""
    return build().item()


def numeric_gradient(build, params, step=1e-6):
    """Central finite differences of build() w.r.t. each parameter, in place."""
    grads = []
    for p in params:
        g = np.zeros_like(p.values)
        flat_v = p.values.ravel()
        flat_g = g.ravel()
        for i in range(flat_v.size):
            orig = flat_v[i]
            flat_v[i] = orig + step
            hi = forward_value(build)
            flat_v[i] = orig - step
            lo = forward_value(build)
            flat_v[i] = orig
            flat_g[i] = (hi - lo) / (2.0 * step)
        grads.append(g)
    return grads


def analytic_gradient(build, params):
    """Gradients from one tape replay of build()."""
    for p in params:
        p.zero_grad()
    with T.Tape() as tape:
        loss = build()
    T.backward(loss, tape)
    return [p.grad.copy() for p in params]


def max_relative_error(analytic, numeric):
    # The denominator floor sits well above the central-difference noise at
    # a true-zero gradient (~|f| * eps / step ~ 1e-10 for O(1) losses), so
    # cancellation noise cannot masquerade as a gradient defect.
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-6)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def gradient_check(build, params, step=1e-6):
    """Max relative error between tape gradients and central differences."""
    analytic = analytic_gradient(build, params)
    numeric = numeric_gradient(build, params, step=step)
    return max_relative_error(analytic, numeric)
