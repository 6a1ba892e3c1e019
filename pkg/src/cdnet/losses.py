"""Pretraining losses: triplet, soft-nearest-neighbor, cross-entropy, and
their uncertainty-weighted composite.

All losses return scalar DiffTensors and are differentiable through the
tensor tape. The composite weights each component L_k by a learnable
uncertainty: total = sum_k L_k / (2 sigma_k^2) + sum_k log sigma_k, with
sigma_k = exp(log_sigma_k); it is stationary exactly where sigma_k^2 = L_k.
"""

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ShapeMismatchError


class UncertaintyWeights:
    """Learnable log-sigma scalars, one per loss component."""

    def __init__(self, log_sigma_ce=0.0, log_sigma_snn=0.0, log_sigma_triplet=0.0):
        self.log_sigma_ce = T.DiffTensor(float(log_sigma_ce), requires_gradient=True)
        self.log_sigma_snn = T.DiffTensor(float(log_sigma_snn), requires_gradient=True)
        self.log_sigma_triplet = T.DiffTensor(float(log_sigma_triplet), requires_gradient=True)

    def parameters(self):
        return [self.log_sigma_ce, self.log_sigma_snn, self.log_sigma_triplet]

    def sigmas(self):
        return tuple(float(np.exp(p.values)) for p in self.parameters())


def composite_value(l_ce, l_snn, l_triplet, sigmas):
    """The composite formula on plain floats (used for reports and checks)."""
    total = 0.0
    for l, s in zip((l_ce, l_snn, l_triplet), sigmas):
        total += l / (2.0 * s * s) + np.log(s)
    return float(total)


@dataclass
class LossReport:
    l_ce: float
    l_snn: float
    l_triplet: float
    l_total: float
    sigmas: tuple

    def __post_init__(self):
        expected = composite_value(self.l_ce, self.l_snn, self.l_triplet, self.sigmas)
        if abs(expected - self.l_total) > 1e-10:
            raise ValueError(
                f"l_total={self.l_total} does not match the composite formula ({expected})"
            )


def _as_matrix(x, name):
    if isinstance(x, T.DiffTensor):
        if x.values.ndim != 2:
            raise ShapeMismatchError(f"{name} must be 2-D, got shape {x.shape}")
        return x
    rows = [np.asarray(r, dtype=np.float64) for r in x]
    if not rows:
        raise ShapeMismatchError(f"{name} is empty")
    widths = {r.shape for r in rows}
    if len(widths) != 1 or rows[0].ndim != 1:
        raise ShapeMismatchError(f"{name} rows disagree in shape: {widths}")
    return T.DiffTensor(np.stack(rows))


def triplet_loss(anchor, positives, negatives, margin):
    """Sum over states t of max(0, ||a - p_t||^2 - ||a - n_t||^2 + margin)."""
    a = T.as_tensor(anchor)
    if a.values.ndim != 1:
        raise ShapeMismatchError(f"anchor must be a vector, got shape {a.shape}")
    pos = _as_matrix(positives, "positives")
    neg = _as_matrix(negatives, "negatives")
    if pos.values.shape != neg.values.shape:
        raise ShapeMismatchError(
            f"positives {pos.values.shape} and negatives {neg.values.shape} differ"
        )
    if pos.values.shape[1] != a.values.shape[0]:
        raise ShapeMismatchError(
            f"anchor width {a.values.shape[0]} != sample width {pos.values.shape[1]}"
        )
    dp = T.sum_last(T.multiply(T.subtract(a, pos), T.subtract(a, pos)))
    dn = T.sum_last(T.multiply(T.subtract(a, neg), T.subtract(a, neg)))
    return T.sum_all(T.relu(T.add(T.subtract(dp, dn), float(margin))))


def triplet_loss_batched(anchors, positives, negatives, margin):
    """Mean over anchors of the per-anchor triplet loss.

    anchors [B, d], positives and negatives [B, T, d].
    """
    a3 = T.reshape(anchors, (anchors.values.shape[0], 1, anchors.values.shape[1]))
    dp = T.sum_last(T.multiply(T.subtract(a3, positives), T.subtract(a3, positives)))
    dn = T.sum_last(T.multiply(T.subtract(a3, negatives), T.subtract(a3, negatives)))
    per_anchor = T.sum_last(T.relu(T.add(T.subtract(dp, dn), float(margin))))
    return T.mean_all(per_anchor)


def _normalize_rows(e):
    sq = T.sum_last(T.multiply(e, e))
    norms = T.sqrt(T.clamp_min(sq, 1e-24))
    return T.divide(e, T.reshape(norms, (e.values.shape[0], 1)))


def snn_loss(embeddings, positive_embeddings, temperature, epsilon):
    """Soft-nearest-neighbor loss over L2-normalized embeddings.

    Per anchor i: -log( exp(E_i . P_i / tau) /
                        (sum_{j != i} exp(E_i . E_j / tau) + eps) + eps ),
    averaged over the batch. P_i is anchor i's designated positive.
    """
    e = _as_matrix(embeddings, "embeddings")
    p = _as_matrix(positive_embeddings, "positive_embeddings")
    if e.values.shape != p.values.shape:
        raise ShapeMismatchError(
            f"embeddings {e.values.shape} and positives {p.values.shape} differ"
        )
    n = e.values.shape[0]
    if n < 2:
        raise ValueError("snn_loss needs at least 2 embeddings")
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    en = _normalize_rows(e)
    pn = _normalize_rows(p)
    sims = T.matmul(en, T.transpose2d(en))
    mask = 1.0 - np.eye(n)
    denom = T.sum_last(T.multiply(T.exp(T.divide(sims, float(temperature))), mask))
    pos_sim = T.sum_last(T.multiply(en, pn))
    num = T.exp(T.divide(pos_sim, float(temperature)))
    ratio = T.divide(num, T.add(denom, float(epsilon)))
    return T.multiply(T.mean_all(T.log(T.add(ratio, float(epsilon)))), -1.0)


def ce_loss(probabilities, labels):
    """Mean negative log-likelihood of the true-class probabilities.

    probabilities[i] is the model's probability for sample i's true class;
    labels are kept for validation. Probabilities are clamped at 1e-12.
    """
    p = T.as_tensor(probabilities)
    if p.values.ndim != 1:
        raise ShapeMismatchError(f"probabilities must be a vector, got shape {p.shape}")
    y = np.asarray(labels)
    if y.shape != p.values.shape:
        raise ShapeMismatchError(
            f"{p.values.shape[0]} probabilities vs {y.size} labels"
        )
    if p.values.size == 0:
        raise ValueError("ce_loss on an empty batch")
    if not np.all(np.isin(y, (0, 1))):
        raise ValueError("labels must be 0 or 1")
    return T.multiply(T.mean_all(T.log(T.clamp_min(p, 1e-12))), -1.0)


def _weighted_term(loss, log_sigma):
    inv_var = T.exp(T.multiply(log_sigma, -2.0))
    return T.add(T.multiply(T.multiply(T.as_tensor(loss), inv_var), 0.5), log_sigma)


def composite_loss(l_ce, l_snn, l_triplet, weights):
    """Uncertainty-weighted total; differentiable through losses and log-sigmas."""
    total = _weighted_term(l_ce, weights.log_sigma_ce)
    total = T.add(total, _weighted_term(l_snn, weights.log_sigma_snn))
    return T.add(total, _weighted_term(l_triplet, weights.log_sigma_triplet))


def make_report(l_ce, l_snn, l_triplet, weights):
    sigmas = weights.sigmas()
    return LossReport(
        l_ce=float(l_ce), l_snn=float(l_snn), l_triplet=float(l_triplet),
        l_total=composite_value(float(l_ce), float(l_snn), float(l_triplet), sigmas),
        sigmas=sigmas,
    )
