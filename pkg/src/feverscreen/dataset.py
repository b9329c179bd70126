"""Synthetic screening cohort, lagged feature windows, splits and CSV I/O."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import InsufficientDataError, ParseError, SchemaError, SpecError, SplitError
from .sensor import SensorModel, simulate_reading_series

SPLIT_NAMES = ("train", "val", "test")
SPLIT_RATIOS = (0.70, 0.15)


@dataclass(frozen=True)
class Sample:
    features: np.ndarray
    label: int


@dataclass(frozen=True)
class Split:
    train: tuple
    val: tuple
    test: tuple

    def as_dict(self) -> dict:
        return {name: list(getattr(self, name)) for name in SPLIT_NAMES}

    def sizes(self) -> tuple:
        return tuple(len(getattr(self, name)) for name in SPLIT_NAMES)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labelled feature windows.

    ``features`` is an (n, L) array of raw readings in degrees C and
    ``labels`` an (n,) int array (1 = febrile). ``body_temps`` and
    ``distances`` record the generator's hidden variables when the dataset
    came from :func:`generate_cohort`; they are not persisted to CSV.
    """

    features: np.ndarray
    labels: np.ndarray
    split: Optional[Split] = None
    body_temps: Optional[np.ndarray] = field(default=None, repr=False)
    distances: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=float)
        labels = np.asarray(self.labels, dtype=int)
        if feats.ndim != 2 or labels.shape != (feats.shape[0],):
            raise SchemaError(f"features {feats.shape} / labels {labels.shape} mismatch")
        if not np.all(np.isfinite(feats)):
            raise SpecError("features must be finite")
        if not np.all((labels == 0) | (labels == 1)):
            raise SpecError("labels must be 0 or 1")
        feats.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.features.shape[0]

    def __iter__(self) -> Iterator[Sample]:
        for x, y in zip(self.features, self.labels):
            yield Sample(x, int(y))

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (np.array_equal(self.features, other.features)
                and np.array_equal(self.labels, other.labels)
                and self.split == other.split)

    @property
    def window_length(self) -> int:
        return self.features.shape[1]

    def subset(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """(features, labels) of one split; ``name`` may also be ``"overall"``."""
        if name == "overall":
            return self.features, self.labels
        if self.split is None:
            raise SplitError("dataset has not been split")
        idx = np.asarray(getattr(self.split, name), dtype=int)
        return self.features[idx], self.labels[idx]


@dataclass(frozen=True)
class CohortSpec:
    n_positive: int = 693
    n_negative: int = 693
    positive_temp_mean: float = 38.8
    positive_temp_std: float = 0.5
    negative_temp_mean: float = 36.8
    negative_temp_std: float = 0.4
    fever_threshold: float = 38.0
    # negatives are truncated below this, leaving a gap under the threshold
    negative_ceiling: float = 37.5
    distance_range: tuple = (0.0, 0.1)
    noise_std: float = 0.05
    n_steps: int = 200
    dt: float = 0.1
    input_delays: int = 9
    output_delays: int = 2
    seed: int = 42

    def validate(self):
        if self.n_positive < 1 or self.n_negative < 1:
            raise SpecError("both classes need at least one subject")
        if self.n_positive + self.n_negative < 10:
            raise SpecError("cohort needs at least 10 subjects")
        if min(self.positive_temp_std, self.negative_temp_std, self.noise_std) < 0:
            raise SpecError("standard deviations must be >= 0")
        if self.negative_ceiling > self.fever_threshold:
            raise SpecError("negative_ceiling must not exceed fever_threshold")
        lo, hi = self.distance_range
        if not 0 <= lo <= hi:
            raise SpecError(f"bad distance_range {self.distance_range}")
        if self.input_delays < 1 or self.output_delays < 0:
            raise SpecError("input_delays >= 1 and output_delays >= 0 required")
        if self.n_steps < self.input_delays + self.output_delays:
            raise SpecError("n_steps shorter than the feature window")


def _truncated_normal(rng, mean, std, n, *, lower=-math.inf, upper=math.inf):
    # rejection sampling keeps the draw order (and so the output) seed-stable
    out = np.empty(0)
    while out.size < n:
        draw = rng.normal(mean, std, size=2 * n)
        out = np.concatenate([out, draw[(draw >= lower) & (draw < upper)]])
        if std == 0 and out.size == 0:
            raise SpecError("zero-std class mean lies outside its truncation bounds")
    return out[:n]


def round_sig(values, digits: int = 9) -> np.ndarray:
    """Round to ``digits`` significant decimal digits (the CSV precision)."""
    return np.array([float(f"{v:.{digits}g}") for v in np.ravel(values)]).reshape(np.shape(values))


def generate_cohort(spec: CohortSpec, sensor: SensorModel = SensorModel()) -> Dataset:
    """Simulate one reading window per synthetic subject.

    Each subject gets a body temperature from its class distribution and a
    standoff distance drawn uniformly from ``spec.distance_range``; the
    feature window is the last ``L`` readings of the simulated trace.
    Positives come first in the output, negatives after.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    pos = _truncated_normal(rng, spec.positive_temp_mean, spec.positive_temp_std,
                            spec.n_positive, lower=spec.fever_threshold)
    neg = _truncated_normal(rng, spec.negative_temp_mean, spec.negative_temp_std,
                            spec.n_negative, upper=spec.negative_ceiling)
    body = np.concatenate([pos, neg])
    labels = np.concatenate([np.ones(spec.n_positive, int), np.zeros(spec.n_negative, int)])
    n = body.size
    distances = rng.uniform(*spec.distance_range, size=n)
    seeds = rng.integers(0, 2**32, size=n)
    L = spec.input_delays + spec.output_delays
    feats = np.empty((n, L))
    for i in range(n):
        series = simulate_reading_series(body[i], distances[i], spec.n_steps, spec.dt,
                                         spec.noise_std, int(seeds[i]), sensor)
        feats[i] = series[-L:]
    return Dataset(round_sig(feats), labels, body_temps=body, distances=distances)


def extract_features(readings: Sequence[float], input_delays: int = 9,
                     output_delays: int = 2) -> np.ndarray:
    """All sliding windows of length ``input_delays + output_delays``.

    Row ``i`` is ``readings[i:i+L]``.
    """
    r = np.asarray(readings, dtype=float)
    L = input_delays + output_delays
    if L < 1:
        raise InsufficientDataError("window length must be >= 1")
    if r.size < L:
        raise InsufficientDataError(f"need at least {L} readings, got {r.size}")
    return np.lib.stride_tricks.sliding_window_view(r, L).copy()


def split_sizes(n: int) -> tuple[int, int, int]:
    n_train = math.floor(SPLIT_RATIOS[0] * n)
    n_val = math.floor(SPLIT_RATIOS[1] * n)
    return n_train, n_val, n - n_train - n_val


def _apportion(total: int, weights: Sequence[int]) -> list[int]:
    # largest-remainder allocation of `total` items proportionally to weights
    s = sum(weights)
    quotas = [total * w / s for w in weights]
    counts = [math.floor(q) for q in quotas]
    order = sorted(range(len(weights)), key=lambda k: (-(quotas[k] - counts[k]), k))
    for k in order[: total - sum(counts)]:
        counts[k] += 1
    return counts


def split_dataset(dataset: Dataset, seed: int = 42) -> Dataset:
    """Stratified 70:15:15 train/validation/test partition.

    Sizes follow the floor rule; each class is shuffled with its own draw
    from the seeded generator and dealt out in proportion to the split
    sizes.
    """
    n = len(dataset)
    if n < 20:
        raise SplitError(f"need at least 20 samples to split, got {n}")
    sizes = split_sizes(n)
    rng = np.random.default_rng(seed)
    labels = dataset.labels
    pos_idx = rng.permutation(np.flatnonzero(labels == 1))
    neg_idx = rng.permutation(np.flatnonzero(labels == 0))
    pos_counts = _apportion(pos_idx.size, sizes)
    # the negatives fill whatever the positives left in each split
    neg_counts = [size - k for size, k in zip(sizes, pos_counts)]
    parts = []
    p0 = q0 = 0
    for kp, kn in zip(pos_counts, neg_counts):
        members = np.concatenate([pos_idx[p0:p0 + kp], neg_idx[q0:q0 + kn]])
        parts.append(tuple(int(i) for i in np.sort(members)))
        p0 += kp
        q0 += kn
    return replace(dataset, split=Split(*parts))


def header(window_length: int) -> list[str]:
    return [f"r{k}" for k in range(1, window_length + 1)] + ["label"]


def write_csv(dataset: Dataset, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header(dataset.window_length))
        for x, y in zip(dataset.features, dataset.labels):
            writer.writerow([f"{v:.9g}" for v in x] + [int(y)])


def read_csv(path, window_length: Optional[int] = None) -> Dataset:
    """Load a dataset written by :func:`write_csv`.

    The header must read ``r1,...,rL,label``; ``L`` is taken from the
    header unless ``window_length`` pins it. The split manifest is not
    consulted here, see :func:`read_split`.
    """
    path = Path(path)
    feats, labels = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            head = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if window_length is None:
            window_length = len(head) - 1
        if window_length < 1 or head != header(window_length):
            raise SchemaError(f"{path}: expected header {','.join(header(window_length))}")
        ncol = window_length + 1
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != ncol:
                raise SchemaError(f"{path}: line {line}: expected {ncol} columns, got {len(row)}")
            try:
                x = [float(v) for v in row[:-1]]
            except ValueError as exc:
                raise ParseError(f"bad reading ({exc})", line) from None
            if not all(math.isfinite(v) for v in x):
                raise ParseError("non-finite reading", line)
            if row[-1].strip() not in ("0", "1"):
                raise ParseError(f"label must be 0 or 1, got {row[-1]!r}", line)
            feats.append(x)
            labels.append(int(row[-1]))
    if not feats:
        raise SchemaError(f"{path}: no data rows")
    return Dataset(np.array(feats), np.array(labels))


def split_manifest_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".split.json")


def write_split(split: Split, path) -> None:
    Path(path).write_text(json.dumps(split.as_dict()) + "\n", encoding="utf-8")


def read_split(path, n: int) -> Split:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        parts = [tuple(int(i) for i in raw[name]) for name in SPLIT_NAMES]
    except (ValueError, KeyError, TypeError) as exc:
        raise SchemaError(f"{path}: bad split manifest ({exc})") from None
    seen = [i for part in parts for i in part]
    if sorted(seen) != list(range(n)):
        raise SchemaError(f"{path}: split indices must partition 0..{n - 1}")
    return Split(*parts)
