"""Core data model: series, instances, datasets, resampling, and file I/O.

A time series is a plain 1-D ``float64`` numpy array. Instances and datasets
are thin immutable wrappers around rectangular arrays: every instance in a
dataset has the same number of dimensions ``d`` and the same length ``m``.
Variable-length data is rejected at construction / parse time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    BoundsError,
    DatasetParseError,
    DimensionError,
    StratificationError,
)

__all__ = [
    "Instance",
    "Dataset",
    "ResampleSpec",
    "z_normalize",
    "subsequence",
    "stratified_resample",
    "load_dataset",
    "save_dataset",
]


def _readonly(values, dtype=float) -> np.ndarray:
    # Always copy so freezing the flags never affects a caller-owned array.
    arr = np.array(values, dtype=dtype, order="C")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Instance:
    """A multivariate instance: ``d`` aligned equal-length series, one label."""

    values: np.ndarray  # shape (d, m)
    label: str

    def __post_init__(self):
        arr = _readonly(self.values)
        if arr.ndim != 2:
            raise DimensionError(f"instance values must be 2-D (d, m), got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError(f"instance needs d >= 1 and m >= 1, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DimensionError("instance contains non-finite values")
        object.__setattr__(self, "values", arr)

    @property
    def n_dims(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Dataset:
    """A named collection of instances over a fixed, ordered class alphabet."""

    name: str
    values: np.ndarray  # shape (n, d, m)
    labels: tuple[str, ...]
    classes: tuple[str, ...]

    def __post_init__(self):
        arr = _readonly(self.values)
        if arr.ndim != 3:
            raise DimensionError(f"dataset values must be 3-D (n, d, m), got shape {arr.shape}")
        n, d, m = arr.shape
        if n < 1 or d < 1 or m < 1:
            raise DimensionError(f"dataset needs n, d, m >= 1, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DimensionError("dataset contains non-finite values")
        labels = tuple(str(x) for x in self.labels)
        classes = tuple(str(x) for x in self.classes)
        if len(labels) != n:
            raise DimensionError(f"{len(labels)} labels for {n} instances")
        if len(set(classes)) != len(classes) or not classes:
            raise DimensionError("classes must be a non-empty ordered set of distinct labels")
        unknown = sorted(set(labels) - set(classes))
        if unknown:
            raise DimensionError(f"labels {unknown} not in class alphabet {list(classes)}")
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "classes", classes)

    @classmethod
    def from_instances(
        cls, name: str, instances: Sequence[Instance], classes: Sequence[str] | None = None
    ) -> "Dataset":
        if not instances:
            raise DimensionError("dataset needs at least one instance")
        shapes = {inst.values.shape for inst in instances}
        if len(shapes) != 1:
            raise DimensionError(f"instances disagree on (d, m): {sorted(shapes)}")
        labels = tuple(inst.label for inst in instances)
        if classes is None:
            classes = tuple(dict.fromkeys(labels))  # first-seen order
        return cls(
            name=name,
            values=np.stack([inst.values for inst in instances]),
            labels=labels,
            classes=tuple(classes),
        )

    @property
    def n_instances(self) -> int:
        return self.values.shape[0]

    @property
    def n_dims(self) -> int:
        return self.values.shape[1]

    @property
    def length(self) -> int:
        return self.values.shape[2]

    def __len__(self) -> int:
        return self.n_instances

    def __getitem__(self, i: int) -> Instance:
        return Instance(values=self.values[i], label=self.labels[i])

    def __iter__(self) -> Iterator[Instance]:
        for i in range(self.n_instances):
            yield self[i]

    def class_counts(self) -> dict[str, int]:
        counts = {c: 0 for c in self.classes}
        for lab in self.labels:
            counts[lab] += 1
        return counts


@dataclass(frozen=True)
class ResampleSpec:
    """Identifies one seeded resample: fold 0 reproduces the original split."""

    fold: int
    seed: int
    # Only consulted when a split must be synthesized from scratch; the
    # resample of an existing train/test pair preserves its per-class counts.
    train_proportion: float = 0.5

    def __post_init__(self):
        if self.fold < 0:
            raise StratificationError(f"fold must be >= 0, got {self.fold}")
        if not 0.0 < self.train_proportion < 1.0:
            raise StratificationError(
                f"train_proportion must be in (0, 1), got {self.train_proportion}"
            )


def z_normalize(series: np.ndarray) -> np.ndarray:
    """Shift/scale to mean 0 and population (divide-by-N) std 1.

    A constant series (zero variance), including a single sample, maps to all
    zeros instead of raising: constant windows occur in real sensor data and
    must compare as a flat shape.
    """
    arr = np.asarray(series, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise DimensionError(f"expected a non-empty 1-D series, got shape {arr.shape}")
    std = arr.std()
    # max == min catches constant inputs whose float mean is inexact and
    # would otherwise yield a tiny nonzero std; std == 0 catches underflow.
    if std == 0.0 or arr.max() == arr.min():
        return np.zeros_like(arr)
    return (arr - arr.mean()) / std


def subsequence(instance: Instance, dim: int, start: int, length: int) -> np.ndarray:
    """Contiguous slice ``values[start:start+length]`` of one dimension."""
    d, m = instance.values.shape
    if not 0 <= dim < d:
        raise BoundsError(f"dim {dim} out of range for {d} dimensions")
    if length < 1:
        raise BoundsError(f"length {length} must be >= 1")
    if start < 0:
        raise BoundsError(f"start {start} must be >= 0")
    if start + length > m:
        raise BoundsError(f"start {start} + length {length} exceeds series length {m}")
    return instance.values[dim, start : start + length].copy()


def _resample_rng(seed: int, fold: int) -> np.random.Generator:
    # One stream per (seed, fold); SeedSequence mixes the pair so nearby
    # folds do not share state.
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), int(fold)]))


def stratified_resample(
    train: Dataset, test: Dataset, spec: ResampleSpec
) -> tuple[Dataset, Dataset]:
    """Redraw a train/test split preserving the original per-class counts.

    Fold 0 returns the inputs unchanged. For fold >= 1 the instances of both
    splits are pooled per class and re-dealt: the first ``original train
    count`` shuffled instances of each class go to the new train split, the
    rest to test. Deterministic in ``(spec.seed, spec.fold)``.
    """
    if train.n_dims != test.n_dims or train.length != test.length:
        raise DimensionError(
            f"train (d={train.n_dims}, m={train.length}) and "
            f"test (d={test.n_dims}, m={test.length}) disagree"
        )
    if set(train.classes) != set(test.classes):
        raise StratificationError(
            f"class alphabets differ: {list(train.classes)} vs {list(test.classes)}"
        )
    missing = sorted(set(test.labels) - set(train.labels))
    if missing:
        raise StratificationError(f"classes {missing} present in test but absent from train")

    if spec.fold == 0:
        return train, test

    rng = _resample_rng(spec.seed, spec.fold)
    train_counts = train.class_counts()

    new_train: list[Instance] = []
    new_test: list[Instance] = []
    for cls in train.classes:
        pool = [inst for inst in train if inst.label == cls]
        pool += [inst for inst in test if inst.label == cls]
        order = rng.permutation(len(pool))
        take = train_counts[cls]
        new_train += [pool[i] for i in order[:take]]
        new_test += [pool[i] for i in order[take:]]

    return (
        Dataset.from_instances(train.name, new_train, classes=train.classes),
        Dataset.from_instances(test.name, new_test, classes=test.classes),
    )


# ---------------------------------------------------------------------------
# Text file format
#
#   @problemName <token>
#   @dimensions <d>
#   @seriesLength <m>
#   @classLabel true <label1> ... <labelc>
#   @data
#   v1,v2,...,vm:v1,...,vm:...:<label>
#
# One instance per line after @data; the d dimensions are colon-separated
# blocks of m comma-separated numbers, the final token is the class label.
# Lines starting with '#' are comments. UTF-8; LF or CRLF accepted on read,
# LF written.
# ---------------------------------------------------------------------------

_HEADER_KEYS = ("@problemName", "@dimensions", "@seriesLength", "@classLabel")


def load_dataset(path: str) -> Dataset:
    """Parse a dataset file; any format violation reports path and line number."""

    def fail(message: str, line_no: int):
        raise DatasetParseError(message, path=str(path), line=line_no)

    try:
        with open(path, "r", encoding="utf-8", newline=None) as fh:
            lines = fh.read().split("\n")
    except OSError as exc:
        raise DatasetParseError(f"cannot read file: {exc}", path=str(path)) from exc

    header: dict[str, list[str]] = {}
    data_start = None
    for idx, raw in enumerate(lines):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not line.startswith("@"):
            fail(f"expected a header line or @data, got: {line[:40]!r}", idx + 1)
        tokens = line.split()
        key = tokens[0]
        if key == "@data":
            data_start = idx + 1
            break
        if key not in _HEADER_KEYS:
            fail(f"unknown header key {key!r}", idx + 1)
        if key in header:
            fail(f"duplicate header key {key!r}", idx + 1)
        header[key] = tokens[1:]

    if data_start is None:
        fail("missing @data section", len(lines))
    for key in _HEADER_KEYS:
        if key not in header:
            fail(f"missing header key {key!r}", data_start)

    if len(header["@problemName"]) != 1:
        fail("@problemName takes exactly one token", data_start)
    name = header["@problemName"][0]
    try:
        d = int(header["@dimensions"][0])
        m = int(header["@seriesLength"][0])
    except (IndexError, ValueError):
        fail("@dimensions and @seriesLength take one integer each", data_start)
    cl = header["@classLabel"]
    if len(cl) < 2 or cl[0] != "true":
        fail("@classLabel must be 'true' followed by the class alphabet", data_start)
    classes = tuple(cl[1:])
    if len(set(classes)) != len(classes):
        fail("@classLabel lists a duplicate class", data_start)

    instances: list[Instance] = []
    for idx in range(data_start, len(lines)):
        line = lines[idx].strip()
        line_no = idx + 1
        if not line or line.startswith("#"):
            continue
        blocks = line.split(":")
        if len(blocks) != d + 1:
            fail(f"expected {d} dimension blocks plus a label, got {len(blocks)} fields", line_no)
        label = blocks[-1].strip()
        if label not in classes:
            fail(f"unknown class label {label!r}", line_no)
        series = np.empty((d, m), dtype=float)
        for j, block in enumerate(blocks[:-1]):
            parts = block.split(",")
            if len(parts) != m:
                fail(f"dimension {j} has {len(parts)} values, expected {m}", line_no)
            try:
                row = np.array([float(p) for p in parts], dtype=float)
            except ValueError:
                fail(f"dimension {j} contains a non-numeric value", line_no)
            if not np.all(np.isfinite(row)):
                fail(f"dimension {j} contains a non-finite value", line_no)
            series[j] = row
        instances.append(Instance(values=series, label=label))

    if not instances:
        fail("no instances after @data", len(lines))
    return Dataset.from_instances(name, instances, classes=classes)


def _format_value(v: float) -> str:
    # Up to 6 significant digits; integral values shed the trailing '.0'.
    if v == math.floor(v) and abs(v) < 1e15:
        return str(int(v))
    return format(v, ".6g")


def save_dataset(dataset: Dataset, path: str) -> None:
    """Write a dataset in the text format (LF newlines, 6 significant digits)."""
    bad = [c for c in dataset.classes if any(ch in c for ch in ",:#@ \t")]
    if bad:
        raise DatasetParseError(f"class labels {bad} contain format separator characters", path=str(path))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"@problemName {dataset.name}\n")
        fh.write(f"@dimensions {dataset.n_dims}\n")
        fh.write(f"@seriesLength {dataset.length}\n")
        fh.write("@classLabel true " + " ".join(dataset.classes) + "\n")
        fh.write("@data\n")
        for inst in dataset:
            blocks = [",".join(_format_value(v) for v in dim) for dim in inst.values]
            fh.write(":".join(blocks) + ":" + inst.label + "\n")
