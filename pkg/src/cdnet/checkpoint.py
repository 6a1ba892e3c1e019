"""Single-file model checkpoints.

Everything lives in one .npz: a "meta_json" entry (format version, config
echo, label map, architecture dimensions) plus one float64 array per
parameter under stable names ("classifier/conv1_kernels",
"chain/within0/t1/conv2_bias", ...). Arrays are stored raw, so a reload
reproduces predictions bit-exactly.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classifier import BaseClassifier, TrainConfig
from .diffusion import kind_from_name
from .losses import UncertaintyWeights
from .reverse import ReverseChain, StepDenoiser
from .seeding import derive_rng

FORMAT_VERSION = 1

_CLASSIFIER_ARRAYS = (
    ("conv1_kernels", "conv1_k"), ("conv1_bias", "conv1_b"),
    ("conv2_kernels", "conv2_k"), ("conv2_bias", "conv2_b"),
    ("dense_weights", "dense_w"), ("dense_bias", "dense_b"),
    ("head_weights", "head_w"), ("head_bias", "head_b"),
)
_DENOISER_ARRAYS = (
    ("conv1_kernels", "conv1_k"), ("conv1_bias", "conv1_b"),
    ("conv2_kernels", "conv2_k"), ("conv2_bias", "conv2_b"),
    ("conv3_kernels", "conv3_k"), ("conv3_bias", "conv3_b"),
)
_SIGMA_ARRAYS = ("log_sigma_ce", "log_sigma_snn", "log_sigma_triplet")


@dataclass
class Checkpoint:
    classifier: BaseClassifier | None = None
    chains: dict | None = None
    config: TrainConfig | None = None
    weights: UncertaintyWeights | None = None
    label_map: dict = field(default_factory=dict)
    dataset_name: str = ""
    meta: dict = field(default_factory=dict)


def save_checkpoint(path, classifier=None, chains=None, config=None,
                    weights=None, label_map=None, dataset_name=""):
    if classifier is None and chains is None:
        raise ValueError("a checkpoint needs a classifier, chains, or both")
    path = Path(path)
    arrays = {}
    if classifier is not None:
        for stored, attr in _CLASSIFIER_ARRAYS:
            arrays[f"classifier/{stored}"] = getattr(classifier, attr).values
    chain_meta = {}
    if chains is not None:
        for kind, chain in chains.items():
            chain_meta[kind.name] = {"t_steps": chain.t_steps,
                                     "length": chain.length}
            for t, denoiser in enumerate(chain.denoisers, start=1):
                for stored, attr in _DENOISER_ARRAYS:
                    key = f"chain/{kind.name}/t{t}/{stored}"
                    arrays[key] = getattr(denoiser, attr).values
    if weights is not None:
        for name, param in zip(_SIGMA_ARRAYS, weights.parameters()):
            arrays[f"weights/{name}"] = param.values
    meta = {
        "format_version": FORMAT_VERSION,
        "dataset_name": dataset_name,
        "label_map": label_map or {},
        "has_classifier": classifier is not None,
        "input_length": classifier.input_length if classifier else None,
        "embedding_dim": classifier.embedding_dim if classifier else None,
        "chains": chain_meta,
        "config": config.to_dict() if config is not None else None,
        "has_weights": weights is not None,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, meta_json=np.array(json.dumps(meta)), **arrays)
    return path


def _fetch(data, key):
    if key not in data:
        raise ValueError(f"checkpoint is missing array {key!r}")
    return np.asarray(data[key], dtype=np.float64)


def load_checkpoint(path):
    path = Path(path)
    with np.load(path, allow_pickle=False) as data:
        if "meta_json" not in data:
            raise ValueError(f"{path} is not a model checkpoint (no meta_json)")
        meta = json.loads(str(data["meta_json"]))
        version = meta.get("format_version")
        if version != FORMAT_VERSION:
            raise ValueError(
                f"unsupported checkpoint format version {version!r}; "
                f"this build reads version {FORMAT_VERSION}"
            )
        rng = derive_rng(0, "checkpoint-load")
        classifier = None
        if meta.get("has_classifier", True):
            classifier = BaseClassifier(meta["input_length"],
                                        meta["embedding_dim"], rng)
            for stored, attr in _CLASSIFIER_ARRAYS:
                loaded = _fetch(data, f"classifier/{stored}")
                target = getattr(classifier, attr)
                if loaded.shape != target.values.shape:
                    raise ValueError(
                        f"classifier/{stored} has shape {loaded.shape}, "
                        f"expected {target.values.shape}"
                    )
                target.values[...] = loaded
        chains = None
        if meta["chains"]:
            chains = {}
            for name, info in meta["chains"].items():
                kind = kind_from_name(name)
                denoisers = []
                for t in range(1, info["t_steps"] + 1):
                    denoiser = StepDenoiser(t, info["length"], rng)
                    for stored, attr in _DENOISER_ARRAYS:
                        loaded = _fetch(data, f"chain/{name}/t{t}/{stored}")
                        getattr(denoiser, attr).values[...] = loaded
                    denoisers.append(denoiser)
                chains[kind] = ReverseChain(kind, denoisers, info["length"])
        weights = None
        if meta.get("has_weights"):
            weights = UncertaintyWeights()
            for name, param in zip(_SIGMA_ARRAYS, weights.parameters()):
                param.values[...] = _fetch(data, f"weights/{name}")
        config = (TrainConfig.from_dict(meta["config"])
                  if meta.get("config") is not None else None)
    return Checkpoint(classifier=classifier, chains=chains, config=config,
                      weights=weights, label_map=meta["label_map"],
                      dataset_name=meta["dataset_name"], meta=meta)
