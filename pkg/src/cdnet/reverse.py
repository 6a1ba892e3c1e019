"""Reverse denoising chains and contrastive sample generation.

Four chains are trained per model, one per (process, class) pair: within(0),
within(1), across(0->1), across(1->0), each holding T independent step
denoisers with no parameter sharing. Denoiser t learns the reverse transition
x^t -> x^{t-1} by squared reconstruction error over freshly drawn forward
trajectories whose origin lies in the chain's source class.

Generation runs a partner's forward trajectory toward the anchor and pulls
each state back through the matching chain: positives through the anchor
class's within-chain, negatives through the across-chain that ends in the
anchor's class (so the composed output drifts back toward the negative
partner's own class, staying a credible negative).
"""

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .diffusion import ALL_KINDS, ChainKind, forward_trajectory
from .errors import ClassCoverageError
from .optim import Adam
from .seeding import derive_rng


class StepDenoiser:
    """Residual 1-d CNN for one reverse step: three same-padded convs plus an
    input skip, so the small-beta near-identity regime is trivially reachable."""

    CHANNELS = 16
    KERNEL = 5

    def __init__(self, t, length, rng):
        self.t = t
        self.length = length
        c, k = self.CHANNELS, self.KERNEL
        self.conv1_k = T.uniform_init(rng, (c, 1, k), fan_in=k)
        self.conv1_b = T.uniform_init(rng, (c,), fan_in=k)
        self.conv2_k = T.uniform_init(rng, (c, c, k), fan_in=c * k)
        self.conv2_b = T.uniform_init(rng, (c,), fan_in=c * k)
        self.conv3_k = T.uniform_init(rng, (1, c, k), fan_in=c * k)
        self.conv3_b = T.uniform_init(rng, (1,), fan_in=c * k)

    def parameters(self):
        return [self.conv1_k, self.conv1_b, self.conv2_k, self.conv2_b,
                self.conv3_k, self.conv3_b]

    def forward(self, x):
        """x: DiffTensor [B, 1, M] (or [1, M]) -> same shape."""
        h = T.relu(T.conv1d(x, self.conv1_k, self.conv1_b, padding="same"))
        h = T.relu(T.conv1d(h, self.conv2_k, self.conv2_b, padding="same"))
        h = T.conv1d(h, self.conv3_k, self.conv3_b, padding="same")
        return T.add(h, x)

    def denoise(self, states):
        """Inference on plain arrays: [n, M] -> [n, M], no tape."""
        states = np.asarray(states, dtype=np.float64)
        out = self.forward(T.DiffTensor(states[:, None, :]))
        return out.values[:, 0, :]


class ReverseChain:
    def __init__(self, kind, denoisers, length):
        if len(denoisers) < 1:
            raise ValueError("a chain needs at least one denoiser")
        self.kind = kind
        self.denoisers = list(denoisers)
        self.length = length
        self.val_history = None  # [epochs, T] validation MSE, filled by training

    @property
    def t_steps(self):
        return len(self.denoisers)

    def parameters(self):
        return [p for d in self.denoisers for p in d.parameters()]


def _class_members(split, label):
    return [s for s in split if s.label == label]


def _check_coverage(split, kind):
    for label in sorted({kind.source, kind.target}):
        n = len(_class_members(split, label))
        if n < 2:
            raise ClassCoverageError(
                f"chain {kind.name} references class {label}, which has {n} "
                f"training sample(s); need at least 2"
            )


def _draw_pairs(origin, target, kind, rng):
    """One (origin sample, partner) pair per origin sample, partner resampled
    uniformly from the target class (excluding the origin itself within-class)."""
    pairs = []
    for i, anchor in enumerate(origin):
        if kind.source == kind.target:
            j = rng.integers(0, len(target) - 1)
            if j >= i:
                j += 1
        else:
            j = rng.integers(0, len(target))
        pairs.append((anchor, target[j]))
    return pairs


def _trajectory_batch(pairs, schedule, noise_std, rng):
    """Stack trajectories: returns (inputs [T, n, M], targets [T, n, M])."""
    t_steps = schedule.t_steps
    n = len(pairs)
    m = pairs[0][0].values.size
    inputs = np.empty((t_steps, n, m))
    targets = np.empty((t_steps, n, m))
    for i, (anchor, partner) in enumerate(pairs):
        traj = forward_trajectory(anchor, partner, schedule, noise_std, rng)
        prev = anchor.values
        for t in range(t_steps):
            inputs[t, i] = traj.states[t]
            targets[t, i] = prev
            prev = traj.states[t]
    return inputs, targets


def _mse(pred, target):
    diff = T.subtract(pred, target)
    return T.mean_all(T.multiply(diff, diff))


def train_reverse_chain(dataset, kind, schedule, config, rng):
    """Train one chain's T denoisers on the dataset's train split.

    Per epoch each origin-class sample contributes one fresh trajectory
    (new partner, new noise). A fixed validation batch, generated up front,
    is scored every epoch into chain.val_history. The shipped parameters are
    the average over the final quarter of epochs: constant-rate Adam keeps
    wobbling around the optimum, and the denoising gain at the easiest steps
    is smaller than that wobble, so a single snapshot is unreliable.
    """
    split = dataset.train
    _check_coverage(split, kind)
    origin = _class_members(split, kind.source)
    target = _class_members(split, kind.target)
    length = origin[0].values.size
    t_steps = schedule.t_steps

    denoisers = [StepDenoiser(t + 1, length, rng) for t in range(t_steps)]
    optimizers = None
    if config.learning_rate > 0:
        optimizers = [Adam(d.parameters(), learning_rate=config.learning_rate)
                      for d in denoisers]

    # Several trajectories per origin sample; a one-draw validation batch is
    # noisy enough that its own optimum drifts from the population loss.
    val_pairs = []
    for _ in range(max(2, -(-32 // len(origin)))):
        val_pairs.extend(_draw_pairs(origin, target, kind, rng))
    val_in, val_tgt = _trajectory_batch(val_pairs, schedule, config.noise_std, rng)

    batch = max(1, int(config.batch_size))
    history = np.empty((config.chain_epochs, t_steps))
    average_from = (3 * config.chain_epochs) // 4
    averages = None
    averaged = 0
    for epoch in range(config.chain_epochs):
        pairs = _draw_pairs(origin, target, kind, rng)
        inputs, targets = _trajectory_batch(pairs, schedule, config.noise_std, rng)
        order = rng.permutation(len(pairs))
        for start in range(0, len(pairs), batch):
            chunk = order[start:start + batch]
            for t in range(t_steps):
                x = T.DiffTensor(inputs[t][chunk][:, None, :])
                y = targets[t][chunk][:, None, :]
                with T.Tape() as tape:
                    loss = _mse(denoisers[t].forward(x), y)
                if optimizers is not None:
                    T.backward(loss, tape)
                    optimizers[t].step()
        if epoch >= average_from:
            params = [p.values for d in denoisers for p in d.parameters()]
            if averages is None:
                averages = [v.copy() for v in params]
            else:
                for acc, v in zip(averages, params):
                    acc += v
            averaged += 1
        for t in range(t_steps):
            pred = denoisers[t].denoise(val_in[t])
            history[epoch, t] = float(np.mean((pred - val_tgt[t][:, :]) ** 2))
    if averages is not None:
        flat = [p for d in denoisers for p in d.parameters()]
        for p, acc in zip(flat, averages):
            p.values[...] = acc / averaged
        # Rescore so the recorded endpoint describes the shipped parameters.
        for t in range(t_steps):
            pred = denoisers[t].denoise(val_in[t])
            history[-1, t] = float(np.mean((pred - val_tgt[t][:, :]) ** 2))
    chain = ReverseChain(kind, denoisers, length)
    chain.val_history = history
    return chain


def train_all_chains(dataset, schedule, config, seed):
    """Train the four chains with independent derived streams; returns a dict
    keyed by ChainKind."""
    chains = {}
    for kind in ALL_KINDS:
        rng = derive_rng(seed, "chain", kind.name)
        chains[kind] = train_reverse_chain(dataset, kind, schedule, config, rng)
    return chains


def denoise_compose(chain, state, t):
    """Pull one state back through denoisers t, t-1, ..., 1."""
    if not 1 <= t <= chain.t_steps:
        raise ValueError(f"t must lie in [1, {chain.t_steps}], got {t}")
    state = np.asarray(state, dtype=np.float64)
    out = state[None, :]
    for step in range(t, 0, -1):
        out = chain.denoisers[step - 1].denoise(out)
    return out[0]


def compose_all(chain, states):
    """Compose every state of a trajectory batch in T batched passes.

    states: [B, T, M] with states[:, t-1] = x^t. Returns [B, T, M] where
    out[:, t-1] = f^1(...f^t(x^t)). Row blocks enter the working set at their
    own step index, so block t receives exactly denoisers t..1.
    """
    b, t_steps, m = states.shape
    if t_steps != chain.t_steps:
        raise ValueError(f"trajectory has {t_steps} states, chain has {chain.t_steps}")
    work = np.empty((0, m))
    for step in range(t_steps, 0, -1):
        work = np.concatenate([work, states[:, step - 1, :]], axis=0)
        work = chain.denoisers[step - 1].denoise(work)
    out = np.empty_like(states)
    for block, step in enumerate(range(t_steps, 0, -1)):
        out[:, step - 1, :] = work[block * b:(block + 1) * b]
    return out


@dataclass
class ContrastiveSet:
    anchor: object                 # LabeledSeries
    positives: np.ndarray          # [T, M], positives[t-1] = x^{t+}
    negatives: np.ndarray          # [T, M]
    positive_partner_index: int    # index into dataset.train
    negative_partner_index: int

    def __post_init__(self):
        if self.positives.shape != self.negatives.shape:
            raise ValueError("positives and negatives must have matching shapes")
        if not (np.all(np.isfinite(self.positives))
                and np.all(np.isfinite(self.negatives))):
            raise ValueError("generated samples must be finite")


def _partner_indices(split, anchor, rng):
    same = [i for i, s in enumerate(split) if s.label == anchor.label and s is not anchor]
    other = [i for i, s in enumerate(split) if s.label != anchor.label]
    if not same or not other:
        raise ClassCoverageError(
            f"contrastive generation needs >= 2 samples of class {anchor.label} "
            f"and >= 1 of class {1 - anchor.label}"
        )
    return same[rng.integers(0, len(same))], other[rng.integers(0, len(other))]


def generate_contrastive_set(anchor, dataset, chains, schedule, noise_std, rng):
    """Build one anchor's positives and negatives.

    The within-class partner x_j and across-class partner x_c are drawn from
    the train split; their trajectories interpolate toward the anchor, and
    each state is composed back through the matching chain.
    """
    split = dataset.train
    j, c = _partner_indices(split, anchor, rng)
    pos_traj = forward_trajectory(split[j], anchor, schedule, noise_std, rng,
                                  anchor_index=j)
    neg_traj = forward_trajectory(split[c], anchor, schedule, noise_std, rng,
                                  anchor_index=c)
    within = chains[ChainKind(anchor.label, anchor.label)]
    across = chains[ChainKind(1 - anchor.label, anchor.label)]
    t_steps = schedule.t_steps
    positives = np.stack([denoise_compose(within, pos_traj.states[t - 1], t)
                          for t in range(1, t_steps + 1)])
    negatives = np.stack([denoise_compose(across, neg_traj.states[t - 1], t)
                          for t in range(1, t_steps + 1)])
    return ContrastiveSet(anchor=anchor, positives=positives, negatives=negatives,
                          positive_partner_index=j, negative_partner_index=c)


def generate_contrastive_sets(dataset, chains, schedule, noise_std, seed,
                              anchors=None):
    """Contrastive sets for many anchors, with composition batched per chain.

    Anchor i draws from the stream (seed, "contrastive", i), so the output
    matches per-anchor generate_contrastive_set calls with those streams.
    """
    split = dataset.train
    if anchors is None:
        anchors = split
    t_steps = schedule.t_steps
    pos_states = {0: [], 1: []}
    neg_states = {0: [], 1: []}
    meta = {0: [], 1: []}
    for i, anchor in enumerate(anchors):
        rng = derive_rng(seed, "contrastive", i)
        j, c = _partner_indices(split, anchor, rng)
        pos_traj = forward_trajectory(split[j], anchor, schedule, noise_std, rng)
        neg_traj = forward_trajectory(split[c], anchor, schedule, noise_std, rng)
        pos_states[anchor.label].append(pos_traj.states)
        neg_states[anchor.label].append(neg_traj.states)
        meta[anchor.label].append((i, anchor, j, c))
    results = [None] * len(anchors)
    for label in (0, 1):
        if not meta[label]:
            continue
        within = chains[ChainKind(label, label)]
        across = chains[ChainKind(1 - label, label)]
        pos = compose_all(within, np.stack(pos_states[label]))
        neg = compose_all(across, np.stack(neg_states[label]))
        for row, (i, anchor, j, c) in enumerate(meta[label]):
            results[i] = ContrastiveSet(
                anchor=anchor, positives=pos[row], negatives=neg[row],
                positive_partner_index=j, negative_partner_index=c,
            )
    return results
