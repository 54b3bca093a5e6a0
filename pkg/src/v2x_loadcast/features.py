"""Preprocessing and fusion: speed discretization, z-scoring, windowing.

The raw per-interval sample is (flow, speed level, call count). Speed is
discretized into 8 levels; every feature is z-scored with statistics fitted
on the training split only; windows of M consecutive samples with the next
T call counts as target are cut per split so that no window straddles a
split boundary or a day gap.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .calls import CallSeries
from .errors import DegenerateFeature, InsufficientData
from .road import POINTS_PER_DAY, RoadSeries

FEATURE_NAMES = ("flow", "speed_level", "calls")
CALLS_COLUMN = 2

_LO, _HI, _BINS = 20.0, 60.0, 6  # levels 2..7 partition [20, 60) into 6 equal bins


def discretize_speed(speed: float) -> int:
    """Map mph to a level in 1..8: 1 below 20 mph, 8 at 60 mph and above."""
    if speed < 0:
        raise ValueError(f"speed {speed} < 0")
    if speed < _LO:
        return 1
    if speed >= _HI:
        return 8
    return 2 + min(int((speed - _LO) * _BINS / (_HI - _LO)), _BINS - 1)


def discretize_speeds(speeds: np.ndarray) -> np.ndarray:
    """Vectorized `discretize_speed`."""
    speeds = np.asarray(speeds, dtype=np.float64)
    if (speeds < 0).any():
        raise ValueError("speeds must be non-negative")
    inner = 2 + np.minimum(
        ((speeds - _LO) * _BINS / (_HI - _LO)).astype(np.int64), _BINS - 1
    )
    return np.where(speeds < _LO, 1, np.where(speeds >= _HI, 8, inner)).astype(np.int64)


def build_feature_matrix(
    road: RoadSeries, calls: CallSeries, discretize: bool = True
) -> np.ndarray:
    """Raw (n, 3) matrix of flow, speed level, call count.

    `discretize=False` keeps raw mph in the speed column for comparing the
    two preprocessing paths; the standard pipeline uses the 8-level form.
    """
    if len(calls) != len(road):
        raise ValueError(f"call series length {len(calls)} != road series length {len(road)}")
    speed_col = discretize_speeds(road.speeds) if discretize else road.speeds
    return np.column_stack(
        [
            road.flows.astype(np.float64),
            speed_col.astype(np.float64),
            calls.counts.astype(np.float64),
        ]
    )


@dataclass(frozen=True)
class NormStats:
    """Per-feature mean/std fitted on the training split (population std)."""

    mean: np.ndarray
    std: np.ndarray
    feature_names: tuple[str, ...]

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def inverse_transform(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) * self.std + self.mean

    def checksum(self) -> str:
        digest = hashlib.sha256()
        digest.update(repr(self.feature_names).encode())
        digest.update(self.mean.tobytes())
        digest.update(self.std.tobytes())
        return digest.hexdigest()


def fit_normalizer(
    samples: np.ndarray, feature_names: Sequence[str] = FEATURE_NAMES
) -> NormStats:
    """Fit per-feature z-score statistics; raises DegenerateFeature on zero variance."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise InsufficientData(f"need >= 2 samples to fit a normalizer, got {x.shape[0]}")
    if x.shape[1] != len(feature_names):
        raise ValueError(f"{x.shape[1]} columns but {len(feature_names)} feature names")
    mean = x.mean(axis=0)
    std = x.std(axis=0)  # population estimator, divisor n
    for name, s in zip(feature_names, std):
        if s == 0.0:
            raise DegenerateFeature(f"feature {name!r} has zero variance on the training split")
    mean.setflags(write=False)
    std.setflags(write=False)
    return NormStats(mean, std, tuple(feature_names))


@dataclass(frozen=True)
class WindowSet:
    """Contiguous sequence windows: inputs (k, M, d) and targets (k, T)."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        if self.inputs.ndim != 3 or self.targets.ndim != 2:
            raise ValueError("inputs must be (k, M, d) and targets (k, T)")
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError("inputs and targets disagree on window count")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def window_length(self) -> int:
        return self.inputs.shape[1]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[2]

    @property
    def horizon(self) -> int:
        return self.targets.shape[1]


class SplitWindows(NamedTuple):
    train: WindowSet
    val: WindowSet
    test: WindowSet


def slice_windows(
    x: np.ndarray,
    y: np.ndarray,
    m: int,
    t: int,
    gap_indices: Sequence[int] = (),
    offset: int = 0,
) -> WindowSet:
    """Cut every window of M inputs + T targets that avoids the given gaps.

    `gap_indices` are absolute sample indices (offset by `offset` for a
    segment of a larger series) whose sample is discontinuous with its
    predecessor; no window may contain such a boundary strictly inside.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if m < 1 or t < 1:
        raise ValueError("window length and horizon must be >= 1")
    span = m + t
    if n - span + 1 <= 0:
        raise InsufficientData(f"{n} samples cannot host a window of {m}+{t}")

    starts = np.arange(n - span + 1)
    local_gaps = [g - offset for g in gap_indices if 0 < g - offset < n]
    if local_gaps:
        keep = np.ones(len(starts), dtype=bool)
        for g in local_gaps:
            keep &= (starts + span <= g) | (starts >= g)
        starts = starts[keep]
        if starts.size == 0:
            raise InsufficientData("every candidate window straddles a gap")

    inputs = np.stack([x[s : s + m] for s in starts])
    targets = np.stack([y[s + m : s + span] for s in starts])
    return WindowSet(inputs, targets)


def split_day_counts(days: int, ratios: tuple[int, int, int]) -> tuple[int, int, int]:
    """Allocate whole days to train/val/test by ratio; val/test floored, min 1."""
    if any(r <= 0 for r in ratios):
        raise ValueError(f"split ratios must be positive, got {ratios}")
    total = sum(ratios)
    val_days = max(1, days * ratios[1] // total)
    test_days = max(1, days * ratios[2] // total)
    train_days = days - val_days - test_days
    if train_days < 1:
        raise InsufficientData(f"{days} days cannot be split {ratios} by whole days")
    return train_days, val_days, test_days


def make_windows(
    x: np.ndarray,
    y: np.ndarray,
    m: int,
    t: int,
    split: tuple[int, int, int] | None = (3, 1, 1),
    points_per_day: int = POINTS_PER_DAY,
    gap_indices: Sequence[int] = (),
) -> SplitWindows | WindowSet:
    """Windows per split, split by whole days; `split=None` windows everything.

    Windows are contiguous slices that never straddle a split boundary or a
    day gap; each split holds len_split - M - T + 1 windows when gap-free.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] != y.shape[0]:
        raise ValueError("x and y must align")
    if split is None:
        return slice_windows(x, y, m, t, gap_indices)

    n = x.shape[0]
    if n % points_per_day != 0:
        raise InsufficientData(f"{n} samples is not a whole number of {points_per_day}-slot days")
    days = n // points_per_day
    counts = split_day_counts(days, split)
    sets = []
    start = 0
    for d in counts:
        end = start + d * points_per_day
        sets.append(slice_windows(x[start:end], y[start:end], m, t, gap_indices, offset=start))
        start = end
    return SplitWindows(*sets)


def select_mode_columns(matrix: np.ndarray, mode: str) -> np.ndarray:
    """Columns for the feature ablation: `net` keeps calls only, `net_road` all three."""
    if mode == "net":
        return matrix[:, [CALLS_COLUMN]]
    if mode == "net_road":
        return matrix
    raise ValueError(f"unknown feature mode {mode!r}")
