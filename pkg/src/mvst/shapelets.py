"""Random shapelet search, quality assessment, and the feature transform.

Three candidate flavors are supported:

* ``INDEPENDENT`` - single-channel subsequences drawn from any one dimension
  and matched against that same dimension.
* ``MULTI_DEPENDENT`` - d-channel subsequences matched with one shared
  best-match offset across all channels.
* ``MULTI_INDEPENDENT`` - d-channel subsequences where every channel finds
  its own best offset; the per-channel distances are summed.

Candidates are sampled uniformly over the full candidate space (every
(instance, length, position[, dimension]) tuple), scored by binary
information gain against the origin instance's class, and the k best are
kept under a per-class cap. The search is budgeted either by a total number
of sampled candidates (deterministic given the seed) or by wall-clock time
(checked between batches; not reproducible by nature).
"""

from __future__ import annotations

import enum
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .data import Dataset, Instance, z_normalize
from .distances import z_normalize_rows
from .errors import ConfigError, ContractError, DimensionError, StatisticsError

__all__ = [
    "ShapeletVariant",
    "ShapeletCandidate",
    "SearchConfig",
    "FeatureMatrix",
    "count_candidates",
    "sample_candidate",
    "shapelet_distance",
    "shapelet_distances",
    "binary_labels",
    "information_gain",
    "assess_candidate",
    "search",
    "transform",
    "shapelet_set_to_dict",
    "shapelet_set_from_dict",
]

# Instances are processed in blocks so the z-normalized window tensor stays
# within a bounded number of float64 elements.
_MAX_BLOCK_ELEMENTS = 1 << 22

# Candidates assessed between wall-clock checks in time-budget mode.
_ASSESS_BATCH = 32


class ShapeletVariant(enum.Enum):
    INDEPENDENT = "independent"
    MULTI_DEPENDENT = "multi-dependent"
    MULTI_INDEPENDENT = "multi-independent"

    @property
    def multi_channel(self) -> bool:
        return self is not ShapeletVariant.INDEPENDENT


@dataclass(frozen=True)
class ShapeletCandidate:
    """An extracted subsequence with origin coordinates and assessed quality."""

    variant: ShapeletVariant
    channels: np.ndarray  # (n_channels, length)
    origin_instance: int
    origin_position: int
    origin_dim: int | None  # set only for INDEPENDENT candidates
    length: int
    target_class: str
    quality: float | None = None

    def __post_init__(self):
        arr = np.array(self.channels, dtype=float, order="C")
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[1] != self.length:
            raise DimensionError(
                f"channels shape {arr.shape} does not match length {self.length}"
            )
        if self.variant is ShapeletVariant.INDEPENDENT and arr.shape[0] != 1:
            raise DimensionError("independent candidates carry exactly one channel")
        arr.setflags(write=False)
        object.__setattr__(self, "channels", arr)

    def coordinates(self) -> tuple:
        """Origin identity used for duplicate detection and tie-breaking."""
        dim = -1 if self.origin_dim is None else self.origin_dim
        return (self.origin_instance, dim, self.origin_position, self.length)


@dataclass(frozen=True)
class SearchConfig:
    """Search-space bounds and budget for one shapelet search.

    ``max_length=None`` resolves to the series length and ``k=None`` to
    ``min(10 * n_classes, candidate space size)`` when the search starts. At
    least one of ``time_budget`` (seconds) / ``total_shapelets`` (candidate
    draws) must be set; with both set, whichever limit hits first wins.
    """

    variant: ShapeletVariant
    min_length: int = 3
    max_length: int | None = None
    k: int | None = None
    seed: int = 0
    time_budget: float | None = None
    total_shapelets: int | None = None
    normalize: bool = True

    def __post_init__(self):
        if self.min_length < 1:
            raise ConfigError(f"min_length must be >= 1, got {self.min_length}")
        if self.max_length is not None and self.max_length < self.min_length:
            raise ConfigError(
                f"max_length {self.max_length} < min_length {self.min_length}"
            )
        if self.k is not None and self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.time_budget is None and self.total_shapelets is None:
            raise ConfigError("one of time_budget / total_shapelets must be set")
        if self.time_budget is not None and self.time_budget <= 0:
            raise ConfigError(f"time_budget must be > 0, got {self.time_budget}")
        if self.total_shapelets is not None and self.total_shapelets < 1:
            raise ConfigError(f"total_shapelets must be >= 1, got {self.total_shapelets}")

    def resolved(self, dataset: Dataset) -> "SearchConfig":
        """Fill dataset-dependent defaults and validate against its shape."""
        m = dataset.length
        max_length = m if self.max_length is None else self.max_length
        if not 1 <= self.min_length <= max_length <= m:
            raise ConfigError(
                f"need 1 <= min {self.min_length} <= max {max_length} <= m {m}"
            )
        k = self.k
        if k is None:
            resolved = replace(self, max_length=max_length, k=1)
            k = min(10 * len(dataset.classes), count_candidates(dataset, resolved))
        return replace(self, max_length=max_length, k=k)


def _length_blocks(m: int, min_len: int, max_len: int) -> tuple[np.ndarray, np.ndarray]:
    lengths = np.arange(min_len, max_len + 1)
    bounds = np.concatenate([[0], np.cumsum(m - lengths + 1)])
    return lengths, bounds


def count_candidates(dataset: Dataset, config: SearchConfig) -> int:
    """Size of the full candidate space for this dataset and config."""
    config = config if config.max_length is not None else config.resolved(dataset)
    _, bounds = _length_blocks(dataset.length, config.min_length, config.max_length)
    per_series = int(bounds[-1])
    if config.variant is ShapeletVariant.INDEPENDENT:
        return dataset.n_instances * dataset.n_dims * per_series
    return dataset.n_instances * per_series


def _candidate_from_index(index: int, dataset: Dataset, config: SearchConfig) -> ShapeletCandidate:
    """Decode a flat index over the candidate space into an extracted candidate.

    The index layout is instance-major, then (for INDEPENDENT) dimension,
    then length ascending, then position; at d=1 the INDEPENDENT and
    multi-channel layouts coincide, so identical seeds draw identical
    coordinates for all variants.
    """
    m = dataset.length
    lengths, bounds = _length_blocks(m, config.min_length, config.max_length)
    per_series = int(bounds[-1])
    if config.variant is ShapeletVariant.INDEPENDENT:
        instance_idx, rem = divmod(index, dataset.n_dims * per_series)
        dim, offset = divmod(rem, per_series)
    else:
        instance_idx, offset = divmod(index, per_series)
        dim = None
    block = int(np.searchsorted(bounds, offset, side="right")) - 1
    length = int(lengths[block])
    position = int(offset - bounds[block])

    if dim is None:
        raw = dataset.values[instance_idx, :, position : position + length]
    else:
        raw = dataset.values[instance_idx, dim : dim + 1, position : position + length]
    channels = (
        np.stack([z_normalize(row) for row in raw]) if config.normalize else np.array(raw)
    )
    return ShapeletCandidate(
        variant=config.variant,
        channels=channels,
        origin_instance=int(instance_idx),
        origin_position=position,
        origin_dim=None if dim is None else int(dim),
        length=length,
        target_class=dataset.labels[instance_idx],
    )


def sample_candidate(
    rng: np.random.Generator, dataset: Dataset, config: SearchConfig
) -> ShapeletCandidate:
    """Draw one candidate uniformly over the whole candidate space."""
    config = config if config.max_length is not None else config.resolved(dataset)
    space = count_candidates(dataset, config)
    return _candidate_from_index(int(rng.integers(space)), dataset, config)


# ---------------------------------------------------------------------------
# Shapelet-to-series distances
# ---------------------------------------------------------------------------


def _window_tensor(values: np.ndarray, length: int, normalize: bool) -> np.ndarray:
    windows = sliding_window_view(values, length, axis=-1)
    return z_normalize_rows(windows) if normalize else windows


def shapelet_distances(
    candidate: ShapeletCandidate, dataset: Dataset, normalize: bool = True
) -> np.ndarray:
    """Distance from one candidate to every instance of a dataset."""
    if candidate.length > dataset.length:
        raise DimensionError(
            f"candidate length {candidate.length} exceeds series length {dataset.length}"
        )
    if candidate.variant.multi_channel and candidate.channels.shape[0] != dataset.n_dims:
        raise DimensionError(
            f"candidate has {candidate.channels.shape[0]} channels, dataset has "
            f"{dataset.n_dims} dimensions"
        )
    if candidate.variant is ShapeletVariant.INDEPENDENT:
        if candidate.origin_dim is None or not 0 <= candidate.origin_dim < dataset.n_dims:
            raise DimensionError(
                f"independent candidate needs origin_dim in [0, {dataset.n_dims})"
            )

    shape = (
        np.stack([z_normalize(ch) for ch in candidate.channels])
        if normalize
        else candidate.channels
    )
    n = dataset.n_instances
    n_offsets = dataset.length - candidate.length + 1
    per_instance = dataset.n_dims * n_offsets * candidate.length
    block = max(1, _MAX_BLOCK_ELEMENTS // per_instance)

    out = np.empty(n)
    for start in range(0, n, block):
        stop = min(n, start + block)
        if candidate.variant is ShapeletVariant.INDEPENDENT:
            windows = _window_tensor(
                dataset.values[start:stop, candidate.origin_dim, :], candidate.length, normalize
            )  # (b, offsets, len)
            diff = windows - shape[0]
            sq = np.einsum("iwl,iwl->iw", diff, diff)
            out[start:stop] = np.sqrt(sq.min(axis=1))
        else:
            windows = _window_tensor(
                dataset.values[start:stop], candidate.length, normalize
            )  # (b, d, offsets, len)
            diff = windows - shape[:, None, :]
            sq = np.einsum("idwl,idwl->idw", diff, diff)
            if candidate.variant is ShapeletVariant.MULTI_DEPENDENT:
                out[start:stop] = np.sqrt(sq.sum(axis=1).min(axis=1))
            else:
                out[start:stop] = np.sqrt(sq.min(axis=2)).sum(axis=1)
    return out


def shapelet_distance(
    candidate: ShapeletCandidate, instance: Instance, normalize: bool = True
) -> float:
    """Distance from one candidate to one instance (variant-specific matching)."""
    single = Dataset(
        name="_query",
        values=instance.values[None, :, :],
        labels=(instance.label,),
        classes=(instance.label,),
    )
    return float(shapelet_distances(candidate, single, normalize=normalize)[0])


# ---------------------------------------------------------------------------
# Quality assessment
# ---------------------------------------------------------------------------


def binary_labels(labels: Sequence[str], target: str) -> np.ndarray:
    """One-vs-all encoding: True where the label equals the target class."""
    return np.array([lab == target for lab in labels], dtype=bool)


def _entropy(pos: int, total: int) -> float:
    if total == 0 or pos == 0 or pos == total:
        return 0.0
    p = pos / total
    return -(p * math.log2(p) + (1.0 - p) * math.log2(1.0 - p))


def information_gain(distances, labels) -> float:
    """Best binary-split entropy reduction over an orderline.

    Split thresholds sit between consecutive distinct sorted distances, so
    tied distances always stay together on the <= side. Entropy is base 2;
    with binary labels the result lies in [0, 1].
    """
    dist = np.asarray(distances, dtype=float)
    lab = np.asarray(labels, dtype=bool)
    if dist.shape != lab.shape or dist.ndim != 1:
        raise StatisticsError(
            f"distances {dist.shape} and labels {lab.shape} must be equal-length 1-D"
        )
    n = dist.shape[0]
    if n < 2:
        raise StatisticsError(f"need at least 2 items to split, got {n}")

    order = np.argsort(dist, kind="stable")
    sorted_dist = dist[order]
    sorted_pos = lab[order]
    total_pos = int(sorted_pos.sum())
    base = _entropy(total_pos, n)
    if base == 0.0:
        return 0.0

    best = 0.0
    left_pos = 0
    for i in range(n - 1):
        left_pos += int(sorted_pos[i])
        if sorted_dist[i + 1] == sorted_dist[i]:
            continue
        left_n = i + 1
        right_n = n - left_n
        gain = (
            base
            - (left_n / n) * _entropy(left_pos, left_n)
            - (right_n / n) * _entropy(total_pos - left_pos, right_n)
        )
        if gain > best:
            best = gain
    return best


def assess_candidate(
    candidate: ShapeletCandidate, dataset: Dataset, normalize: bool = True
) -> float:
    """Information gain of the candidate's orderline against its origin class."""
    dists = shapelet_distances(candidate, dataset, normalize=normalize)
    return information_gain(dists, binary_labels(dataset.labels, candidate.target_class))


# ---------------------------------------------------------------------------
# Search
# ---------------------------------------------------------------------------


def _selection_key(candidate: ShapeletCandidate) -> tuple:
    # Higher quality first; ties broken by shorter length, then origin
    # coordinates, so the result is a total order independent of evaluation
    # order.
    inst, dim, pos, length = candidate.coordinates()
    return (-candidate.quality, length, inst, pos, dim)


def _select_k_best(candidates: list[ShapeletCandidate], k: int, n_classes: int) -> list[ShapeletCandidate]:
    cap = math.ceil(k / n_classes)
    ordered = sorted(candidates, key=_selection_key)
    kept: list[ShapeletCandidate] = []
    overflow: list[ShapeletCandidate] = []
    per_class: dict[str, int] = {}
    for cand in ordered:
        taken = per_class.get(cand.target_class, 0)
        if len(kept) < k and taken < cap:
            kept.append(cand)
            per_class[cand.target_class] = taken + 1
        else:
            overflow.append(cand)
    if len(kept) < k:
        kept.extend(overflow[: k - len(kept)])
    return sorted(kept, key=_selection_key)


def search(dataset: Dataset, config: SearchConfig, threads: int = 1) -> list[ShapeletCandidate]:
    """Sample, assess, and keep the k best shapelets.

    With ``total_shapelets`` set the sampled coordinate sequence, qualities,
    and returned order are reproducible for a fixed seed, regardless of
    ``threads``. If the whole candidate space fits inside ``total_shapelets``
    it is enumerated instead, making the result seed-independent. In pure
    time-budget mode sampling stops once the clock runs out or the space is
    exhausted, whichever is first.
    """
    config = config.resolved(dataset)
    space = count_candidates(dataset, config)
    rng = np.random.default_rng(config.seed)
    start = time.monotonic()
    deadline = None if config.time_budget is None else start + config.time_budget
    exhaustive = config.total_shapelets is not None and config.total_shapelets >= space

    def assess_one(candidate: ShapeletCandidate) -> ShapeletCandidate:
        quality = assess_candidate(candidate, dataset, normalize=config.normalize)
        return replace(candidate, quality=quality)

    executor = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    assessed: list[ShapeletCandidate] = []
    seen: set[tuple] = set()
    try:
        enumerator = iter(range(space)) if exhaustive else None
        draws = 0
        done = False
        while not done:
            batch: list[ShapeletCandidate] = []
            while len(batch) < _ASSESS_BATCH and not done:
                if exhaustive:
                    index = next(enumerator, None)
                    if index is None:
                        done = True
                        break
                else:
                    if config.total_shapelets is not None and draws >= config.total_shapelets:
                        done = True
                        break
                    if len(seen) >= space:
                        done = True  # nothing new left to sample
                        break
                    index = int(rng.integers(space))
                    draws += 1
                candidate = _candidate_from_index(index, dataset, config)
                coords = candidate.coordinates()
                if coords in seen:
                    continue
                seen.add(coords)
                batch.append(candidate)
            if batch:
                if executor is None:
                    assessed.extend(assess_one(c) for c in batch)
                else:
                    assessed.extend(executor.map(assess_one, batch))
            if deadline is not None and time.monotonic() >= deadline:
                done = True
    finally:
        if executor is not None:
            executor.shutdown()

    if not assessed:
        raise ContractError("search budget expired before any candidate was assessed")
    return _select_k_best(assessed, config.k, len(dataset.classes))


@dataclass(frozen=True)
class FeatureMatrix:
    """Per-instance minimum distances to each of the k kept shapelets."""

    values: np.ndarray  # (n, k)
    shapelets: tuple[ShapeletCandidate, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=float)
        if arr.ndim != 2 or arr.shape != (len(self.labels), len(self.shapelets)):
            raise DimensionError(
                f"feature matrix shape {arr.shape} does not match "
                f"{len(self.labels)} instances x {len(self.shapelets)} shapelets"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "shapelets", tuple(self.shapelets))
        object.__setattr__(self, "labels", tuple(self.labels))


def transform(
    dataset: Dataset, shapelets: Sequence[ShapeletCandidate], normalize: bool = True
) -> FeatureMatrix:
    """Build the n x k matrix of shapelet distances for a dataset."""
    shapelets = tuple(shapelets)
    if not shapelets:
        raise DimensionError("transform needs at least one shapelet")
    columns = [shapelet_distances(s, dataset, normalize=normalize) for s in shapelets]
    return FeatureMatrix(
        values=np.column_stack(columns), shapelets=shapelets, labels=dataset.labels
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _config_to_dict(config: SearchConfig) -> dict:
    return {
        "variant": config.variant.value,
        "min_length": config.min_length,
        "max_length": config.max_length,
        "k": config.k,
        "seed": config.seed,
        "time_budget": config.time_budget,
        "total_shapelets": config.total_shapelets,
        "normalize": config.normalize,
    }


def _config_from_dict(d: dict) -> SearchConfig:
    return SearchConfig(
        variant=ShapeletVariant(d["variant"]),
        min_length=d["min_length"],
        max_length=d["max_length"],
        k=d["k"],
        seed=d["seed"],
        time_budget=d["time_budget"],
        total_shapelets=d["total_shapelets"],
        normalize=d.get("normalize", True),
    )


def shapelet_set_to_dict(shapelets: Sequence[ShapeletCandidate], config: SearchConfig) -> dict:
    """JSON-ready view of a search result; floats survive round-trips exactly."""
    return {
        "config": _config_to_dict(config),
        "shapelets": [
            {
                "variant": s.variant.value,
                "channels": [[float(v) for v in ch] for ch in s.channels],
                "origin_instance": s.origin_instance,
                "origin_position": s.origin_position,
                "origin_dim": s.origin_dim,
                "length": s.length,
                "target_class": s.target_class,
                "quality": s.quality,
            }
            for s in shapelets
        ],
    }


def shapelet_set_from_dict(d: dict) -> tuple[list[ShapeletCandidate], SearchConfig]:
    config = _config_from_dict(d["config"])
    shapelets = [
        ShapeletCandidate(
            variant=ShapeletVariant(s["variant"]),
            channels=np.array(s["channels"], dtype=float),
            origin_instance=s["origin_instance"],
            origin_position=s["origin_position"],
            origin_dim=s["origin_dim"],
            length=s["length"],
            target_class=s["target_class"],
            quality=s["quality"],
        )
        for s in d["shapelets"]
    ]
    return shapelets, config
