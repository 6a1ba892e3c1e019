"""Base classifier, contrastive pretraining, and head-only fine-tuning.

The built-in backbone is a small 1-d CNN: body conv(16,k7)+relu ->
conv(32,k5)+relu -> global average pool -> dense(d)+relu, and a dense(2)
head. Pretraining embeds anchors together with their generated positives and
negatives in one batched body pass, combines triplet, soft-nearest-neighbor,
and cross-entropy losses under learned uncertainty weights, and updates the
whole network. Fine-tuning freezes the body by construction: embeddings are
cached once outside any tape and only the head sees an optimizer.
"""

from dataclasses import asdict, dataclass

import numpy as np

from . import tensor as T
from .losses import (UncertaintyWeights, ce_loss, composite_loss, make_report,
                     snn_loss, triplet_loss_batched)
from .optim import Adam
from .seeding import derive_rng


@dataclass
class TrainConfig:
    epochs_pretrain: int = 100
    epochs_finetune: int = 50
    batch_size: int = 16
    learning_rate: float = 1e-3
    seed: int = 0
    margin: float = 1.0
    temperature: float = 0.1
    epsilon_snn: float = 1e-8
    t_steps: int = 5
    beta_min: float = 0.05
    beta_max: float = 0.3
    noise_std: float = 0.25
    embedding_dim: int = 32
    chain_epochs: int = 200

    def __post_init__(self):
        for field in ("epochs_pretrain", "epochs_finetune", "batch_size",
                      "t_steps", "embedding_dim", "chain_epochs"):
            v = getattr(self, field)
            if not isinstance(v, int) or v < 1:
                raise ValueError(f"{field} must be a positive integer, got {v!r}")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0 (0 disables updates)")
        if self.margin < 0:
            raise ValueError("margin must be >= 0")
        if self.temperature <= 0 or self.epsilon_snn <= 0:
            raise ValueError("temperature and epsilon_snn must be positive")
        if not 0 < self.beta_min <= self.beta_max < 1:
            raise ValueError("need 0 < beta_min <= beta_max < 1")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


class BaseClassifier:
    """Body conv(16,k7,same)+relu -> conv(32,k5,same)+relu -> GAP ->
    dense(d)+relu; head dense(2)."""

    def __init__(self, input_length, embedding_dim, rng):
        if input_length < 8:
            raise ValueError(f"input length must be >= 8, got {input_length}")
        self.input_length = int(input_length)
        self.embedding_dim = int(embedding_dim)
        self.conv1_k = T.uniform_init(rng, (16, 1, 7), fan_in=7)
        self.conv1_b = T.uniform_init(rng, (16,), fan_in=7)
        self.conv2_k = T.uniform_init(rng, (32, 16, 5), fan_in=16 * 5)
        self.conv2_b = T.uniform_init(rng, (32,), fan_in=16 * 5)
        self.dense_w = T.uniform_init(rng, (embedding_dim, 32), fan_in=32)
        self.dense_b = T.uniform_init(rng, (embedding_dim,), fan_in=32)
        self.head_w = T.uniform_init(rng, (2, embedding_dim), fan_in=embedding_dim)
        self.head_b = T.uniform_init(rng, (2,), fan_in=embedding_dim)

    def body_parameters(self):
        return [self.conv1_k, self.conv1_b, self.conv2_k, self.conv2_b,
                self.dense_w, self.dense_b]

    def head_parameters(self):
        return [self.head_w, self.head_b]

    def parameters(self):
        return self.body_parameters() + self.head_parameters()

    def _wrap(self, x):
        if isinstance(x, T.DiffTensor):
            return x
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2:
            raise ValueError(f"expected series [M] or batch [B, M], got shape {x.shape}")
        if x.shape[1] != self.input_length:
            raise ValueError(
                f"series length {x.shape[1]} does not match model length "
                f"{self.input_length}"
            )
        return T.DiffTensor(x[:, None, :])

    def embed(self, x):
        """x: [M], [B, M], or DiffTensor [B, 1, M] -> embeddings [B, d]."""
        h = T.relu(T.conv1d(self._wrap(x), self.conv1_k, self.conv1_b, padding="same"))
        h = T.relu(T.conv1d(h, self.conv2_k, self.conv2_b, padding="same"))
        pooled = T.mean_last(h)
        return T.relu(T.dense(pooled, self.dense_w, self.dense_b))

    def logits_from_embedding(self, embeddings):
        return T.dense(embeddings, self.head_w, self.head_b)

    def forward(self, x):
        return self.logits_from_embedding(self.embed(x))


def build_small_cnn(input_length, embedding_dim=32, rng=None):
    if rng is None:
        rng = derive_rng(0, "classifier-init")
    return BaseClassifier(input_length, embedding_dim, rng)


def predict(classifier, series):
    """-> (label, probabilities [p0, p1]); equal logits break toward label 0."""
    series = np.asarray(series, dtype=np.float64)
    if series.ndim != 1 or series.size != classifier.input_length:
        raise ValueError(
            f"expected a series of length {classifier.input_length}, "
            f"got shape {series.shape}"
        )
    logits = classifier.forward(series)
    probs = T.softmax(logits).values[0]
    return int(np.argmax(probs)), probs


def _split_series(dataset_or_split):
    split = getattr(dataset_or_split, "train", dataset_or_split)
    split = list(split)
    if not split:
        raise ValueError("need at least one labeled series")
    return split


def _stack_sets(contrastive_sets, input_length):
    if not contrastive_sets:
        raise ValueError("need at least one contrastive set")
    t_steps = contrastive_sets[0].positives.shape[0]
    for s in contrastive_sets:
        m = s.anchor.values.size
        if m != input_length:
            raise ValueError(
                f"contrastive set length {m} does not match model length "
                f"{input_length}"
            )
        if s.positives.shape != (t_steps, m) or s.negatives.shape != (t_steps, m):
            raise ValueError("contrastive sets disagree on T or M")
    anchors = np.stack([s.anchor.values for s in contrastive_sets])
    positives = np.stack([s.positives for s in contrastive_sets])
    negatives = np.stack([s.negatives for s in contrastive_sets])
    labels = np.array([s.anchor.label for s in contrastive_sets], dtype=np.int64)
    return anchors, positives, negatives, labels, t_steps


def pretrain(classifier, contrastive_sets, weights, config):
    """Joint contrastive + CE pretraining. Returns one LossReport per epoch
    (epoch-mean component losses under the epoch-final sigmas)."""
    anchors, positives, negatives, labels, t_steps = _stack_sets(
        contrastive_sets, classifier.input_length)
    n = anchors.shape[0]
    if config.batch_size > n:
        raise ValueError(
            f"batch_size {config.batch_size} exceeds dataset size {n}")
    params = classifier.parameters() + weights.parameters()
    optimizer = Adam(params, learning_rate=config.learning_rate) \
        if config.learning_rate > 0 else None
    rng = derive_rng(config.seed, "pretrain")
    log = []
    for _epoch in range(config.epochs_pretrain):
        order = rng.permutation(n)
        sums = np.zeros(3)
        batches = 0
        for start in range(0, n, config.batch_size):
            chunk = order[start:start + config.batch_size]
            b = chunk.size
            # One body pass over anchors + all their generated samples:
            # rows [0, b) anchors, then per anchor T positives then T negatives.
            rows = np.concatenate([
                anchors[chunk][:, None, :],
                positives[chunk].reshape(b * t_steps, 1, -1),
                negatives[chunk].reshape(b * t_steps, 1, -1),
            ])
            with T.Tape() as tape:
                emb = classifier.embed(T.DiffTensor(rows))
                a_emb = T.take_rows(emb, np.arange(b))
                p_emb = T.reshape(
                    T.take_rows(emb, b + np.arange(b * t_steps)),
                    (b, t_steps, classifier.embedding_dim))
                n_emb = T.reshape(
                    T.take_rows(emb, b + b * t_steps + np.arange(b * t_steps)),
                    (b, t_steps, classifier.embedding_dim))
                l_tri = triplet_loss_batched(a_emb, p_emb, n_emb, config.margin)
                # SNN batch: anchors plus their t=1 positives; each row's
                # positive is its counterpart in the other half.
                first_pos = b + np.arange(b) * t_steps
                snn_e = T.take_rows(emb, np.concatenate([np.arange(b), first_pos]))
                snn_p = T.take_rows(emb, np.concatenate([first_pos, np.arange(b)]))
                l_snn = snn_loss(snn_e, snn_p, config.temperature, config.epsilon_snn)
                probs = T.softmax(classifier.logits_from_embedding(a_emb))
                l_ce = ce_loss(T.take_per_row(probs, labels[chunk]), labels[chunk])
                total = composite_loss(l_ce, l_snn, l_tri, weights)
            if optimizer is not None:
                T.backward(total, tape)
                optimizer.step()
            sums += (l_ce.item(), l_snn.item(), l_tri.item())
            batches += 1
        means = sums / batches
        log.append(make_report(means[0], means[1], means[2], weights))
    return log


def finetune(classifier, dataset, config):
    """Head-only training on true labels. Body embeddings are computed once
    with no tape, so body parameters cannot receive gradients."""
    split = _split_series(dataset)
    labels = np.array([s.label for s in split], dtype=np.int64)
    values = np.stack([s.values for s in split])
    cached = classifier.embed(values).values  # plain array; body now inert
    n = cached.shape[0]
    optimizer = Adam(classifier.head_parameters(),
                     learning_rate=config.learning_rate) \
        if config.learning_rate > 0 else None
    rng = derive_rng(config.seed, "finetune")
    batch = min(config.batch_size, n)
    for _epoch in range(config.epochs_finetune):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            chunk = order[start:start + batch]
            with T.Tape() as tape:
                logits = classifier.logits_from_embedding(T.DiffTensor(cached[chunk]))
                probs = T.softmax(logits)
                loss = ce_loss(T.take_per_row(probs, labels[chunk]), labels[chunk])
            if optimizer is not None:
                T.backward(loss, tape)
                optimizer.step()
    return classifier


def train_ce(classifier, dataset, config, epochs=None):
    """Plain supervised training of the full network with CE only; the
    baseline arm in comparisons. Default budget matches pretrain + finetune."""
    split = _split_series(dataset)
    labels = np.array([s.label for s in split], dtype=np.int64)
    values = np.stack([s.values for s in split])
    if values.shape[1] != classifier.input_length:
        raise ValueError("series length does not match model length")
    n = values.shape[0]
    if epochs is None:
        epochs = config.epochs_pretrain + config.epochs_finetune
    optimizer = Adam(classifier.parameters(),
                     learning_rate=config.learning_rate) \
        if config.learning_rate > 0 else None
    rng = derive_rng(config.seed, "baseline-train")
    batch = min(config.batch_size, n)
    for _epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            chunk = order[start:start + batch]
            with T.Tape() as tape:
                probs = T.softmax(classifier.forward(values[chunk]))
                loss = ce_loss(T.take_per_row(probs, labels[chunk]), labels[chunk])
            if optimizer is not None:
                T.backward(loss, tape)
                optimizer.step()
    return classifier
