"""Command-line front end.

Subcommands cover the full workflow: simulate data, train reverse chains,
pretrain and finetune the classifier, evaluate checkpoints, compare the
baseline against the augmented pipeline, sweep generator difficulty knobs,
and rank methods across result files.

Flags mirror the TrainConfig and SimConfig fields (underscores become
hyphens; the generator seed is exposed as --sim-seed to keep it distinct
from the training seed). A flat JSON file passed via --config supplies the
same keys; explicit flags win over the file, which wins over defaults.
Outputs land in --out, falling back to $CDNET_RUN_DIR, then ./runs.
"""

import argparse
import csv
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import evaluation as ev
from .checkpoint import load_checkpoint, save_checkpoint
from .classifier import TrainConfig, build_small_cnn, finetune, pretrain
from .dataio import load_dataset, save_dataset
from .diffusion import linear_schedule
from .losses import UncertaintyWeights
from .reverse import generate_contrastive_sets, train_all_chains
from .seeding import derive_rng, derive_seed
from .simgen import SimConfig, generate_sim_dataset

PRETRAIN_LOG_HEADER = ["epoch", "l_ce", "l_snn", "l_triplet",
                       "sigma_ce", "sigma_snn", "sigma_triplet", "l_total"]

# SimConfig.seed collides with TrainConfig.seed, so it travels as sim_seed
# on the command line and in config files.
_SIM_RENAME = {"seed": "sim_seed"}

_TRAIN_KEYS = {f.name for f in dataclasses.fields(TrainConfig)}
_SIM_KEYS = {_SIM_RENAME.get(f.name, f.name) for f in dataclasses.fields(SimConfig)}


def _add_dataclass_flags(parser, cls, rename=None):
    """One --flag per dataclass field; None means 'not given'."""
    rename = rename or {}
    group = parser.add_argument_group(f"{cls.__name__.lower()} fields")
    for field in dataclasses.fields(cls):
        name = rename.get(field.name, field.name)
        group.add_argument(f"--{name.replace('_', '-')}", dest=name,
                           type=type(field.default), default=None,
                           help=f"{cls.__name__}.{field.name} "
                                f"(default {field.default})")


def _load_config_file(path):
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config file must hold a flat JSON object")
    unknown = sorted(set(data) - _TRAIN_KEYS - _SIM_KEYS)
    if unknown:
        raise ValueError(f"unknown config key(s): {', '.join(unknown)}")
    return data


def _build_config(cls, args, file_data, rename=None, base=None):
    """Merge CLI flags over config-file keys over `base` over defaults."""
    rename = rename or {}
    values = dict(base or {})
    for field in dataclasses.fields(cls):
        key = rename.get(field.name, field.name)
        if file_data and key in file_data:
            values[field.name] = file_data[key]
        cli_value = getattr(args, key, None)
        if cli_value is not None:
            values[field.name] = cli_value
        if field.name in values and isinstance(field.default, float):
            values[field.name] = float(values[field.name])
    return cls(**values)


def _run_dir(args):
    out = args.out or os.environ.get("CDNET_RUN_DIR") or "runs"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_data(args):
    return load_dataset(args.data_dir, args.dataset,
                        normalize=not args.no_normalize)


def _load_model(path):
    loaded = load_checkpoint(path)
    if loaded.classifier is None:
        raise ValueError(f"{path} holds no classifier")
    return loaded


# --- subcommand bodies -------------------------------------------------------

def _cmd_simulate(args, file_data):
    config = _build_config(SimConfig, args, file_data, rename=_SIM_RENAME)
    dataset = generate_sim_dataset(config)
    out = _run_dir(args)
    save_dataset(dataset, out)
    ev.write_summary_json(
        {"command": "simulate", "sim_config": config.to_dict(),
         "dataset": dataset.name, "length": dataset.length,
         "train_size": len(dataset.train), "test_size": len(dataset.test)},
        out / "simulate.json")
    print(f"wrote {dataset.name} ({len(dataset.train)} train / "
          f"{len(dataset.test)} test) to {out}")
    return 0


def _cmd_train_chains(args, file_data):
    config = _build_config(TrainConfig, args, file_data)
    dataset = _load_data(args)
    schedule = linear_schedule(config.t_steps, config.beta_min, config.beta_max)
    chains = train_all_chains(dataset, schedule, config,
                              seed=derive_seed(config.seed, "chains"))
    out = _run_dir(args)
    path = save_checkpoint(out / "chains.npz", chains=chains, config=config,
                           label_map=dataset.label_map,
                           dataset_name=dataset.name)
    final = {kind.name: [float(v) for v in chain.val_history[-1]]
             for kind, chain in chains.items()}
    ev.write_summary_json(
        {"command": "train-chains", "train_config": config.to_dict(),
         "dataset": dataset.name, "checkpoint": str(path),
         "final_validation_mse": final},
        out / "train_chains.json")
    print(f"trained {len(chains)} chains on {dataset.name}, saved {path}")
    return 0


def _write_pretrain_log(reports, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PRETRAIN_LOG_HEADER)
        for epoch, r in enumerate(reports):
            writer.writerow([epoch, repr(r.l_ce), repr(r.l_snn),
                             repr(r.l_triplet), repr(r.sigmas[0]),
                             repr(r.sigmas[1]), repr(r.sigmas[2]),
                             repr(r.l_total)])
    return path


def _cmd_pretrain(args, file_data):
    loaded = load_checkpoint(args.chains)
    if not loaded.chains:
        raise ValueError(f"{args.chains} holds no reverse chains")
    base = loaded.config.to_dict() if loaded.config is not None else None
    config = _build_config(TrainConfig, args, file_data, base=base)
    chain_steps = next(iter(loaded.chains.values())).t_steps
    if chain_steps != config.t_steps:
        raise ValueError(
            f"checkpoint chains run {chain_steps} steps but the config asks "
            f"for {config.t_steps}; pass --t-steps {chain_steps} or retrain")
    dataset = _load_data(args)
    schedule = linear_schedule(config.t_steps, config.beta_min, config.beta_max)
    sets = generate_contrastive_sets(dataset, loaded.chains, schedule,
                                     config.noise_std,
                                     seed=derive_seed(config.seed, "contrastive"))
    classifier = build_small_cnn(dataset.length, config.embedding_dim,
                                 derive_rng(config.seed, "classifier-init"))
    weights = UncertaintyWeights()
    reports = pretrain(classifier, sets, weights, config)
    out = _run_dir(args)
    path = save_checkpoint(out / "model.npz", classifier=classifier,
                           config=config, weights=weights,
                           label_map=dataset.label_map,
                           dataset_name=dataset.name)
    _write_pretrain_log(reports, out / "pretrain_log.csv")
    last = reports[-1]
    ev.write_summary_json(
        {"command": "pretrain", "train_config": config.to_dict(),
         "dataset": dataset.name, "checkpoint": str(path),
         "final_losses": {"l_ce": last.l_ce, "l_snn": last.l_snn,
                          "l_triplet": last.l_triplet, "l_total": last.l_total},
         "final_sigmas": list(last.sigmas)},
        out / "pretrain.json")
    print(f"pretrained on {dataset.name} for {config.epochs_pretrain} epochs "
          f"(final composite {last.l_total:.4f}), saved {path}")
    return 0


def _cmd_finetune(args, file_data):
    loaded = _load_model(args.model)
    base = loaded.config.to_dict() if loaded.config is not None else None
    config = _build_config(TrainConfig, args, file_data, base=base)
    dataset = _load_data(args)
    finetune(loaded.classifier, dataset.train, config)
    accuracy = ev.evaluate(loaded.classifier, dataset.test)
    out = _run_dir(args)
    path = save_checkpoint(out / "model_finetuned.npz",
                           classifier=loaded.classifier, config=config,
                           weights=loaded.weights,
                           label_map=dataset.label_map,
                           dataset_name=dataset.name)
    ev.write_summary_json(
        {"command": "finetune", "train_config": config.to_dict(),
         "dataset": dataset.name, "checkpoint": str(path),
         "test_accuracy": accuracy},
        out / "finetune.json")
    print(f"finetuned on {dataset.name}: test accuracy {accuracy:.4f}, "
          f"saved {path}")
    return 0


def _cmd_evaluate(args, file_data):
    loaded = _load_model(args.model)
    dataset = _load_data(args)
    accuracy = ev.evaluate(loaded.classifier, dataset.test)
    out = _run_dir(args)
    ev.write_summary_json(
        {"command": "evaluate", "dataset": dataset.name,
         "model": str(args.model), "accuracy": accuracy},
        out / "evaluate.json")
    print(f"accuracy {accuracy:.4f} on {dataset.name}")
    return 0


def _cmd_compare(args, file_data):
    config = _build_config(TrainConfig, args, file_data)
    dataset = _load_data(args)
    comparison = ev.compare_methods(dataset, config, args.seeds)
    out = _run_dir(args)
    ev.write_results_csv(comparison.results, out / "results.csv")
    ev.write_summary_json(
        {"command": "compare", "train_config": config.to_dict(),
         "dataset": dataset.name, "seeds": comparison.seeds,
         "baseline_mean": comparison.baseline_mean,
         "cdnet_mean": comparison.cdnet_mean, "delta": comparison.delta},
        out / "compare.json")
    print(f"baseline {comparison.baseline_mean:.4f}  "
          f"cdnet {comparison.cdnet_mean:.4f}  "
          f"delta {comparison.delta:+.4f}")
    return 0


def _cmd_sweep(args, file_data):
    config = _build_config(TrainConfig, args, file_data)
    sim_config = _build_config(SimConfig, args, file_data, rename=_SIM_RENAME)
    sweep = ev.sweep_levels(args.knob, args.levels, config, args.seeds,
                            sim_config=sim_config)
    out = _run_dir(args)
    ev.write_sweep_csv(sweep, out / "sweep.csv")
    ev.write_results_csv(sweep.runs, out / "sweep_runs.csv")
    ev.write_summary_json(
        {"command": "sweep", "knob": sweep.knob,
         "train_config": config.to_dict(), "sim_config": sim_config.to_dict(),
         "seeds": [int(s) for s in args.seeds],
         "rows": [{"level": row.level,
                   "baseline_accuracy": row.baseline_accuracy,
                   "cdnet_accuracy": row.cdnet_accuracy,
                   "delta": row.delta} for row in sweep.rows]},
        out / "sweep.json")
    for row in sweep.rows:
        print(f"{sweep.knob} {row.level}: baseline {row.baseline_accuracy:.4f}"
              f"  cdnet {row.cdnet_accuracy:.4f}  delta {row.delta:+.4f}")
    return 0


def _cmd_rank(args, file_data):
    rows = []
    for path in args.results:
        rows.extend(ev.read_results_csv(path))
    if not rows:
        raise ValueError("no result rows found")
    methods, datasets = [], []
    sums, counts = {}, {}
    for row in rows:
        if row["method"] not in methods:
            methods.append(row["method"])
        if row["dataset"] not in datasets:
            datasets.append(row["dataset"])
        key = (row["method"], row["dataset"])
        sums[key] = sums.get(key, 0.0) + row["accuracy"]
        counts[key] = counts.get(key, 0) + 1
    missing = [f"{m}/{d}" for m in methods for d in datasets
               if (m, d) not in counts]
    if missing:
        raise ValueError(f"incomplete results matrix, missing {missing}")
    matrix = np.array([[sums[m, d] / counts[m, d] for d in datasets]
                       for m in methods])
    table = ev.rank_methods(matrix, methods=methods, datasets=datasets)
    out = _run_dir(args)
    ev.write_summary_json(table.to_dict(), out / "ranks.json")
    for method, rank in zip(table.methods, table.mean_ranks):
        print(f"{method}: mean rank {rank:.3f}")
    print(f"friedman {table.friedman_statistic:.4f}  "
          f"nemenyi CD {table.nemenyi_cd:.4f}")
    return 0


# --- parser ------------------------------------------------------------------

def _add_common_flags(parser):
    parser.add_argument("--config", default=None,
                        help="flat JSON file of TrainConfig/SimConfig fields "
                             "(generator seed under 'sim_seed')")
    parser.add_argument("--out", default=None,
                        help="output directory (default $CDNET_RUN_DIR, "
                             "then ./runs)")


def _add_data_flags(parser):
    parser.add_argument("--data-dir", default=".",
                        help="directory holding <name>_TRAIN.tsv and "
                             "<name>_TEST.tsv")
    parser.add_argument("--dataset", required=True,
                        help="dataset name (the TSV file prefix)")
    parser.add_argument("--no-normalize", action="store_true",
                        help="skip per-series z-normalization at load time")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cdnet",
        description="Contrastive diffusion augmentation for binary "
                    "time-series classification.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset as TSVs")
    _add_common_flags(p)
    _add_dataclass_flags(p, SimConfig, rename=_SIM_RENAME)
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("train-chains",
                       help="train the four reverse chains on a dataset")
    _add_common_flags(p)
    _add_data_flags(p)
    _add_dataclass_flags(p, TrainConfig)
    p.set_defaults(handler=_cmd_train_chains)

    p = sub.add_parser("pretrain",
                       help="contrastive pretraining from a chain checkpoint")
    _add_common_flags(p)
    _add_data_flags(p)
    p.add_argument("--chains", required=True,
                   help="chain checkpoint from train-chains")
    _add_dataclass_flags(p, TrainConfig)
    p.set_defaults(handler=_cmd_pretrain)

    p = sub.add_parser("finetune",
                       help="train the classification head on true labels")
    _add_common_flags(p)
    _add_data_flags(p)
    p.add_argument("--model", required=True,
                   help="model checkpoint from pretrain")
    _add_dataclass_flags(p, TrainConfig)
    p.set_defaults(handler=_cmd_finetune)

    p = sub.add_parser("evaluate",
                       help="test-split accuracy of a saved model")
    _add_common_flags(p)
    _add_data_flags(p)
    p.add_argument("--model", required=True, help="model checkpoint")
    p.set_defaults(handler=_cmd_evaluate)

    p = sub.add_parser("compare",
                       help="baseline vs full pipeline over several seeds")
    _add_common_flags(p)
    _add_data_flags(p)
    p.add_argument("--seeds", nargs="+", type=int, required=True,
                   help="training seeds, one paired run each")
    _add_dataclass_flags(p, TrainConfig)
    p.set_defaults(handler=_cmd_compare)

    p = sub.add_parser("sweep",
                       help="compare methods across generator difficulty "
                            "levels")
    _add_common_flags(p)
    p.add_argument("--knob", required=True, choices=sorted(ev.KNOB_FIELDS),
                   help="generator knob to sweep")
    p.add_argument("--levels", nargs="+", type=int, required=True,
                   help="knob levels, each an integer in [0,5]")
    p.add_argument("--seeds", nargs="+", type=int, required=True,
                   help="training seeds, one paired run per level and seed")
    _add_dataclass_flags(p, TrainConfig)
    _add_dataclass_flags(p, SimConfig, rename=_SIM_RENAME)
    p.set_defaults(handler=_cmd_sweep)

    p = sub.add_parser("rank",
                       help="Friedman/Nemenyi rank table from results CSVs")
    _add_common_flags(p)
    p.add_argument("--results", nargs="+", required=True,
                   help="results CSV files (the compare output format)")
    p.set_defaults(handler=_cmd_rank)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config_path = getattr(args, "config", None)
        file_data = _load_config_file(config_path) if config_path else None
        return args.handler(args, file_data)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
