"""Contrastive diffusion augmentation for binary time-series classification.

The pipeline: four reverse denoising chains learn to undo an inter-sample
forward diffusion (mix toward a partner, add noise); composing them over a
partner's trajectory generates per-step positives and negatives for each
anchor; a small CNN pretrains on triplet + soft-nearest-neighbor + CE losses
under learned uncertainty weights, then fine-tunes its head on true labels.
"""

from .checkpoint import FORMAT_VERSION, Checkpoint, load_checkpoint, save_checkpoint
from .classifier import (BaseClassifier, TrainConfig, build_small_cnn, finetune,
                         predict, pretrain, train_ce)
from .dataio import (Dataset, LabeledSeries, load_dataset, load_ucr_split,
                     map_labels, save_dataset, znormalize)
from .diffusion import (ALL_KINDS, ChainKind, ForwardTrajectory, NoiseSchedule,
                        forward_step, forward_trajectory, kind_from_name,
                        linear_schedule)
from .errors import (ClassCoverageError, DataFormatError, IntervalCollapseError,
                     ShapeMismatchError, TapeReuseError)
from .evaluation import (BASELINE, CDNET, ComparisonResult, RankTable, RunResult,
                         SweepResult, SweepRow, compare_methods, evaluate,
                         rank_methods, read_results_csv, read_sweep_csv,
                         sweep_levels, train_baseline, train_cdnet,
                         write_results_csv, write_summary_json, write_sweep_csv)
from .kernels import BACKEND
from .losses import (LossReport, UncertaintyWeights, ce_loss, composite_loss,
                     composite_value, make_report, snn_loss, triplet_loss,
                     triplet_loss_batched)
from .optim import Adam, adam_step
from .reverse import (ContrastiveSet, ReverseChain, StepDenoiser, compose_all,
                      denoise_compose, generate_contrastive_set,
                      generate_contrastive_sets, train_all_chains,
                      train_reverse_chain)
from .seeding import derive_rng, derive_seed
from .simgen import (PatternParams, SimConfig, base_pattern, class_intervals,
                     combined_pattern, generate_sim_dataset, noise_sigma)
from .tensor import DiffTensor, Tape, backward

__version__ = "0.1.0"

__all__ = [
    "Adam", "ALL_KINDS", "BACKEND", "BASELINE", "BaseClassifier", "CDNET",
    "ChainKind", "Checkpoint", "ClassCoverageError", "ComparisonResult",
    "ContrastiveSet", "DataFormatError", "Dataset", "DiffTensor",
    "FORMAT_VERSION", "ForwardTrajectory", "IntervalCollapseError",
    "LabeledSeries", "LossReport", "NoiseSchedule", "PatternParams",
    "RankTable", "ReverseChain", "RunResult", "ShapeMismatchError",
    "SimConfig", "StepDenoiser", "SweepResult", "SweepRow", "Tape",
    "TapeReuseError", "TrainConfig", "UncertaintyWeights", "adam_step",
    "backward", "base_pattern", "build_small_cnn", "ce_loss",
    "class_intervals", "combined_pattern", "compare_methods", "compose_all",
    "composite_loss", "composite_value", "denoise_compose", "derive_rng",
    "derive_seed", "evaluate", "finetune", "forward_step",
    "forward_trajectory", "generate_contrastive_set",
    "generate_contrastive_sets", "generate_sim_dataset", "kind_from_name",
    "linear_schedule", "load_checkpoint", "load_dataset", "load_ucr_split",
    "make_report", "map_labels", "noise_sigma", "predict", "pretrain",
    "rank_methods", "read_results_csv", "read_sweep_csv", "save_checkpoint",
    "save_dataset", "snn_loss", "sweep_levels", "train_all_chains",
    "train_baseline", "train_cdnet", "train_ce", "train_reverse_chain",
    "triplet_loss", "triplet_loss_batched", "write_results_csv",
    "write_summary_json", "write_sweep_csv", "znormalize",
]
