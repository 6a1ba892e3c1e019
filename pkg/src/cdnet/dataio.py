"""Dataset types and UCR-style text ingestion.

On-disk layout: one series per line, first field the class label, remaining
fields the values, tab- or comma-separated (auto-detected from the first
line). A dataset on disk is a directory holding <name>_TRAIN.tsv and
<name>_TEST.tsv. Binary problems only: the two original labels are mapped to
{0, 1} by ascending numeric order (lexicographic if non-numeric).
"""

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError

MIN_LENGTH = 8


@dataclass
class LabeledSeries:
    values: np.ndarray
    label: int
    source_id: str | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise DataFormatError(f"series must be 1-D, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise DataFormatError(f"series {self.source_id!r} contains non-finite values")
        if self.label not in (0, 1):
            raise DataFormatError(f"label must be 0 or 1, got {self.label!r}")


@dataclass
class Dataset:
    train: list
    test: list
    name: str = "dataset"
    label_map: dict = field(default_factory=dict)

    @property
    def length(self):
        return len(self.train[0].values) if self.train else len(self.test[0].values)

    def split(self, which):
        if which not in ("train", "test"):
            raise ValueError(f"split must be 'train' or 'test', got {which!r}")
        return self.train if which == "train" else self.test


def znormalize(values):
    """Per-series z-normalization with population std; constant series -> zeros."""
    values = np.asarray(values, dtype=np.float64)
    centered = values - values.mean()
    std = values.std()
    if std < 1e-9:
        return np.zeros_like(values)
    return centered / std


def _detect_delimiter(first_line, path):
    if "\t" in first_line:
        return "\t"
    if "," in first_line:
        return ","
    raise DataFormatError(f"{path}: no tab or comma delimiter found on line 1")


def _parse_rows(path):
    """Yield (original label string, value array) per non-blank line."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.rstrip("\r\n") for line in fh]
    lines = [(i + 1, line) for i, line in enumerate(lines) if line.strip()]
    if not lines:
        raise DataFormatError(f"{path}: file holds no data rows")
    delim = _detect_delimiter(lines[0][1], path)
    rows = []
    width = None
    for lineno, line in lines:
        fields = line.split(delim)
        if width is None:
            width = len(fields)
            if width < 2:
                raise DataFormatError(f"{path}: row {lineno} has no series values")
        elif len(fields) != width:
            raise DataFormatError(
                f"{path}: row {lineno} has {len(fields)} fields, expected {width}"
            )
        values = np.empty(width - 1, dtype=np.float64)
        for col, token in enumerate(fields[1:], start=2):
            try:
                values[col - 2] = float(token)
            except ValueError:
                raise DataFormatError(
                    f"{path}: row {lineno}, column {col}: cannot parse {token.strip()!r}"
                ) from None
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0]) + 2
            raise DataFormatError(f"{path}: row {lineno}, column {bad}: non-finite value")
        rows.append((fields[0].strip(), values))
    return rows


def map_labels(originals):
    """Map distinct original labels to {0, 1}: ascending numeric, else lexicographic."""
    distinct = sorted(set(originals))
    if len(distinct) > 2:
        raise DataFormatError(
            f"binary only: found {len(distinct)} distinct labels {distinct}"
        )
    try:
        ordered = sorted(distinct, key=float)
    except ValueError:
        ordered = distinct
    return {orig: idx for idx, orig in enumerate(ordered)}


def load_ucr_split(path, normalize=True):
    """Load one UCR-format file -> (list of LabeledSeries, label_map)."""
    rows = _parse_rows(path)
    label_map = map_labels(label for label, _ in rows)
    out = []
    for i, (label, values) in enumerate(rows):
        if normalize:
            values = znormalize(values)
        out.append(LabeledSeries(values, label_map[label],
                                 source_id=f"{os.path.basename(path)}:{i}"))
    return out, label_map


def _split_path(directory, name, which):
    return os.path.join(directory, f"{name}_{which}.tsv")


def load_dataset(directory, name, normalize=True):
    """Load <name>_TRAIN.tsv / <name>_TEST.tsv from directory into a Dataset.

    The label map is built over the union of both files so a split that
    happens to contain one class cannot silently remap labels.
    """
    raw = {which: _parse_rows(_split_path(directory, name, which))
           for which in ("TRAIN", "TEST")}
    label_map = map_labels(
        label for rows in raw.values() for label, _ in rows
    )
    if len(label_map) != 2:
        raise DataFormatError(
            f"dataset {name!r} must carry exactly two labels, found {sorted(label_map)}"
        )
    splits = {}
    for which, rows in raw.items():
        out = []
        for i, (label, values) in enumerate(rows):
            if normalize:
                values = znormalize(values)
            out.append(LabeledSeries(values, label_map[label],
                                     source_id=f"{name}_{which}:{i}"))
        splits[which] = out
    lengths = {s.values.size for split in splits.values() for s in split}
    if len(lengths) != 1:
        raise DataFormatError(f"dataset {name!r} mixes series lengths {sorted(lengths)}")
    if min(lengths) < MIN_LENGTH:
        raise DataFormatError(
            f"dataset {name!r} series length {min(lengths)} is below the minimum {MIN_LENGTH}"
        )
    return Dataset(train=splits["TRAIN"], test=splits["TEST"],
                   name=name, label_map=label_map)


def save_dataset(dataset, directory):
    """Write dataset as <name>_TRAIN.tsv / <name>_TEST.tsv under directory.

    Values are written with repr() (shortest round-trip form), so reloading
    reproduces them bit-exactly; labels are written in canonical {0,1} form.
    """
    if not dataset.train or not dataset.test:
        raise ValueError("refusing to save a dataset with an empty split")
    os.makedirs(directory, exist_ok=True)
    for which, split in (("TRAIN", dataset.train), ("TEST", dataset.test)):
        path = _split_path(directory, dataset.name, which)
        with open(path, "w", encoding="utf-8") as fh:
            for series in split:
                fields = [str(series.label)]
                fields.extend(repr(float(v)) for v in series.values)
                fh.write("\t".join(fields) + "\n")
