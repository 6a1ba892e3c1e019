"""Evaluation, baseline-vs-CDNet comparison, level sweeps, and rank statistics.

compare_methods runs both arms on the same dataset object and the same seed
list: the baseline is the backbone trained with plain CE for the combined
budget, the CDNet arm is chains -> contrastive sets -> pretrain -> finetune.
Both arms build their classifier from the same derived init stream, so the
starting weights are identical and the delta isolates the training recipe.
"""

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classifier import (TrainConfig, build_small_cnn, finetune, predict,
                         pretrain, train_ce)
from .diffusion import linear_schedule
from .losses import UncertaintyWeights
from .reverse import generate_contrastive_sets, train_all_chains
from .seeding import derive_rng, derive_seed
from .simgen import SimConfig, generate_sim_dataset

#: Studentized-range q values, alpha=0.05, infinite df, k = 2..10.
NEMENYI_Q = {2: 1.960, 3: 2.343, 4: 2.569, 5: 2.728, 6: 2.850,
             7: 2.949, 8: 3.031, 9: 3.102, 10: 3.164}

BASELINE = "baseline"
CDNET = "cdnet"


@dataclass
class RunResult:
    dataset_name: str
    method_name: str
    accuracy: float
    seed: int
    config_echo: dict
    wall_time: float

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy must lie in [0,1], got {self.accuracy}")


def evaluate(classifier, test_split):
    """Exact fraction of correct predictions on a non-empty split."""
    split = list(getattr(test_split, "test", test_split))
    if not split:
        raise ValueError("cannot evaluate on an empty split")
    correct = sum(predict(classifier, s.values)[0] == s.label for s in split)
    return correct / len(split)


def _seeded(config, seed):
    return TrainConfig.from_dict({**config.to_dict(), "seed": int(seed)})


def train_cdnet(dataset, config, seed):
    """Full CDNet pipeline on one seed; returns (classifier, chains, weights)."""
    cfg = _seeded(config, seed)
    length = dataset.train[0].values.size
    schedule = linear_schedule(cfg.t_steps, cfg.beta_min, cfg.beta_max)
    chains = train_all_chains(dataset, schedule, cfg,
                              seed=derive_seed(seed, "chains"))
    sets = generate_contrastive_sets(dataset, chains, schedule, cfg.noise_std,
                                     seed=derive_seed(seed, "contrastive"))
    classifier = build_small_cnn(length, cfg.embedding_dim,
                                 derive_rng(seed, "classifier-init"))
    weights = UncertaintyWeights()
    pretrain(classifier, sets, weights, cfg)
    finetune(classifier, dataset.train, cfg)
    return classifier, chains, weights


def train_baseline(dataset, config, seed):
    """CE-only arm with the same init stream and combined epoch budget."""
    cfg = _seeded(config, seed)
    length = dataset.train[0].values.size
    classifier = build_small_cnn(length, cfg.embedding_dim,
                                 derive_rng(seed, "classifier-init"))
    train_ce(classifier, dataset.train, cfg)
    return classifier


@dataclass
class ComparisonResult:
    dataset_name: str
    seeds: list
    results: list            # RunResult, ordered (seed-major, baseline first)
    baseline_mean: float
    cdnet_mean: float
    delta: float

    def accuracies(self, method_name):
        return [r.accuracy for r in self.results if r.method_name == method_name]


def compare_methods(dataset, config, seeds):
    if not seeds:
        raise ValueError("need at least one seed")
    results = []
    for seed in seeds:
        echo = {"train_config": _seeded(config, seed).to_dict(),
                "dataset": dataset.name, "seed": int(seed)}
        t0 = time.perf_counter()
        baseline = train_baseline(dataset, config, seed)
        base_acc = evaluate(baseline, dataset.test)
        results.append(RunResult(dataset.name, BASELINE, base_acc, int(seed),
                                 echo, time.perf_counter() - t0))
        t0 = time.perf_counter()
        cdnet, _, _ = train_cdnet(dataset, config, seed)
        cd_acc = evaluate(cdnet, dataset.test)
        results.append(RunResult(dataset.name, CDNET, cd_acc, int(seed),
                                 echo, time.perf_counter() - t0))
    base_mean = float(np.mean([r.accuracy for r in results
                               if r.method_name == BASELINE]))
    cd_mean = float(np.mean([r.accuracy for r in results
                             if r.method_name == CDNET]))
    return ComparisonResult(dataset_name=dataset.name, seeds=[int(s) for s in seeds],
                            results=results, baseline_mean=base_mean,
                            cdnet_mean=cd_mean, delta=cd_mean - base_mean)


KNOB_FIELDS = {"noise": "noise_level", "similarity": "similarity_level",
               "multimodality": "multimodality_level"}


@dataclass
class SweepRow:
    level: int
    baseline_accuracy: float
    cdnet_accuracy: float
    delta: float


@dataclass
class SweepResult:
    knob: str
    rows: list                       # one SweepRow per level, in input order
    runs: list = field(default_factory=list)   # every underlying RunResult


def sweep_levels(knob, levels, config, seeds, sim_config=None):
    """Both arms on one simgen dataset per (level, seed).

    The generator seed is the sweep seed itself, so within a seed the
    levels are paired: only the knob moves, and the level contrast is
    not confounded by independent dataset draws.
    """
    if knob not in KNOB_FIELDS:
        raise ValueError(f"unknown knob {knob!r}; expected one of "
                         f"{sorted(KNOB_FIELDS)}")
    levels = list(levels)
    if not levels:
        raise ValueError("need at least one level")
    for level in levels:
        if not isinstance(level, int) or not 0 <= level <= 5:
            raise ValueError(f"levels must be integers in [0,5], got {level!r}")
    if not seeds:
        raise ValueError("need at least one seed")
    base = sim_config if sim_config is not None else SimConfig()
    rows, runs = [], []
    for level in levels:
        base_accs, cd_accs = [], []
        for seed in seeds:
            sim = SimConfig(**{**base.to_dict(),
                               KNOB_FIELDS[knob]: level,
                               "seed": seed})
            dataset = generate_sim_dataset(sim)
            cmp = compare_methods(dataset, config, [seed])
            runs.extend(cmp.results)
            base_accs.append(cmp.baseline_mean)
            cd_accs.append(cmp.cdnet_mean)
        rows.append(SweepRow(level=level,
                             baseline_accuracy=float(np.mean(base_accs)),
                             cdnet_accuracy=float(np.mean(cd_accs)),
                             delta=float(np.mean(cd_accs) - np.mean(base_accs))))
    return SweepResult(knob=knob, rows=rows, runs=runs)


# --- rank statistics ---------------------------------------------------------

@dataclass
class RankTable:
    methods: list
    datasets: list
    ranks: np.ndarray          # [k, N], rank of method i on dataset j
    mean_ranks: np.ndarray     # [k]
    friedman_statistic: float
    nemenyi_cd: float

    def __post_init__(self):
        k = len(self.methods)
        expected = k * (k + 1) / 2.0
        sums = self.ranks.sum(axis=0)
        if not np.allclose(sums, expected, atol=1e-9):
            raise ValueError(
                f"per-dataset ranks must sum to {expected}, got {sums}")

    def to_dict(self):
        return {
            "methods": list(self.methods),
            "datasets": list(self.datasets),
            "ranks": self.ranks.tolist(),
            "mean_ranks": self.mean_ranks.tolist(),
            "friedman_statistic": self.friedman_statistic,
            "nemenyi_cd": self.nemenyi_cd,
        }


def _rank_column(column):
    """Descending-accuracy ranks with tie averaging; rank 1 is best."""
    k = column.size
    order = np.argsort(-column, kind="stable")
    ranks = np.empty(k)
    i = 0
    while i < k:
        j = i
        while j + 1 < k and column[order[j + 1]] == column[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def rank_methods(accuracies, methods=None, datasets=None):
    matrix = np.asarray(accuracies, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError(f"expected a 2-d methods x datasets matrix, "
                         f"got shape {matrix.shape}")
    k, n = matrix.shape
    if k < 2 or n < 2:
        raise ValueError("need at least 2 methods and 2 datasets")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("accuracy matrix has missing or non-finite entries")
    if methods is None:
        methods = [f"method{i}" for i in range(k)]
    if datasets is None:
        datasets = [f"dataset{j}" for j in range(n)]
    if len(methods) != k or len(datasets) != n:
        raise ValueError("methods/datasets labels do not match matrix shape")
    ranks = np.column_stack([_rank_column(matrix[:, j]) for j in range(n)])
    mean_ranks = ranks.mean(axis=1)
    friedman = (12.0 * n / (k * (k + 1))) * (
        float(np.sum(mean_ranks ** 2)) - k * (k + 1) ** 2 / 4.0)
    if k not in NEMENYI_Q:
        raise ValueError(f"Nemenyi table covers 2..10 methods, got {k}")
    cd = NEMENYI_Q[k] * np.sqrt(k * (k + 1) / (6.0 * n))
    return RankTable(methods=list(methods), datasets=list(datasets),
                     ranks=ranks, mean_ranks=mean_ranks,
                     friedman_statistic=float(friedman), nemenyi_cd=float(cd))


# --- CSV / JSON output -------------------------------------------------------

RESULTS_HEADER = ["dataset", "method", "seed", "accuracy", "wall_time"]
SWEEP_HEADER = ["level", "baseline_accuracy", "cdnet_accuracy", "delta"]


def write_results_csv(results, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULTS_HEADER)
        for r in results:
            writer.writerow([r.dataset_name, r.method_name, r.seed,
                             repr(r.accuracy), repr(r.wall_time)])
    return path


def read_results_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != RESULTS_HEADER:
            raise ValueError(f"unexpected results header {header}")
        return [{"dataset": row[0], "method": row[1], "seed": int(row[2]),
                 "accuracy": float(row[3]), "wall_time": float(row[4])}
                for row in reader]


def write_sweep_csv(sweep, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_HEADER)
        for row in sweep.rows:
            writer.writerow([row.level, repr(row.baseline_accuracy),
                             repr(row.cdnet_accuracy), repr(row.delta)])
    return path


def read_sweep_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != SWEEP_HEADER:
            raise ValueError(f"unexpected sweep header {header}")
        return [SweepRow(level=int(r[0]), baseline_accuracy=float(r[1]),
                         cdnet_accuracy=float(r[2]), delta=float(r[3]))
                for r in reader]


def write_summary_json(payload, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
