"""End-to-end runs: simulate calls, build features, train, evaluate.

`run_experiment` executes one (scenario, feature mode, seed) cell and
returns a RunReport; `run_scenario_grid` sweeps a list of experiment specs
(typically the built-in seven-scenario grid in both feature modes) and
collects the per-run reports into a Net vs Net&Road comparison.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np

from .calls import ScenarioConfig, simulate_calls
from .errors import EmptyBatch, InsufficientData, LoadcastError
from .features import (
    CALLS_COLUMN,
    FEATURE_NAMES,
    SplitWindows,
    WindowSet,
    build_feature_matrix,
    fit_normalizer,
    make_windows,
    select_mode_columns,
    split_day_counts,
)
from .metrics import metric_mae
from .rng import derive_int, derive_rng
from .road import RoadSeries
from .training import TrainingConfig, TrainingResult, evaluate_mae, train_forecaster

THREADS_ENV = "V2X_LOADCAST_THREADS"
FEATURE_MODES = ("net", "net_road")


@dataclass(frozen=True)
class ExperimentSpec:
    """One cell of the ablation: scenario x feature mode x seed."""

    scenario: ScenarioConfig
    feature_mode: str = "net_road"
    window: int = 18  # M, observation steps
    horizon: int = 1  # T, prediction steps
    split: tuple[int, int, int] = (3, 1, 1)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    seed: int = 1

    def __post_init__(self):
        if self.feature_mode not in FEATURE_MODES:
            raise ValueError(f"feature_mode must be one of {FEATURE_MODES}")
        if self.window < 1 or self.horizon < 1:
            raise ValueError("window and horizon must be >= 1")
        if any(r <= 0 for r in self.split):
            raise ValueError(f"split parts must be positive, got {self.split}")

    @property
    def scenario_id(self) -> str:
        s = self.scenario
        return f"r{s.cell_range_miles:g}_l{s.lam:g}_h{s.handover_prob:g}"


@dataclass
class RunReport:
    """Everything one run produced; JSON round-trips losslessly."""

    scenario_id: str
    lam: float
    handover_prob: float
    cell_range_miles: float
    mode: str
    seed: int
    test_mae: float
    test_mae_raw: float
    val_mae: float
    baseline_mae: float
    epochs: int
    best_epoch: int
    train_losses: list[float]
    val_maes: list[float]
    norm_checksum: str
    wall_ms: float

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> "RunReport":
        return cls(**payload)


def derive_scenario(spec: ExperimentSpec) -> ScenarioConfig:
    """Scenario with its simulation seed derived from the run seed."""
    return replace(spec.scenario, seed=derive_int(spec.seed, "simulate"))


def prepare_windows(
    spec: ExperimentSpec, road: RoadSeries
) -> tuple[SplitWindows, Any, float]:
    """Simulate, fuse, normalize (train statistics only) and window the data.

    Returns the split windows, the fitted normalizer and the raw-scale std of
    the call-count feature (for de-normalizing reported errors).
    """
    calls = simulate_calls(road, derive_scenario(spec))
    raw = build_feature_matrix(road, calls)
    selected = select_mode_columns(raw, spec.feature_mode)
    names = FEATURE_NAMES if spec.feature_mode == "net_road" else (FEATURE_NAMES[CALLS_COLUMN],)

    train_days, _, _ = split_day_counts(road.days, spec.split)
    train_rows = train_days * road.points_per_day
    stats = fit_normalizer(selected[:train_rows], names)
    normalized = stats.transform(selected)

    calls_col = normalized.shape[1] - 1  # calls is always the last selected column
    windows = make_windows(
        normalized,
        normalized[:, calls_col],
        spec.window,
        spec.horizon,
        spec.split,
        road.points_per_day,
        road.gap_indices(),
    )
    calls_std = float(stats.std[calls_col])
    return windows, stats, calls_std


def naive_baseline(windows: WindowSet, calls_feature: int | None = None) -> float:
    """Persistence floor: predict the last observed call count for every horizon step."""
    if len(windows) == 0:
        raise EmptyBatch("no windows to score")
    col = windows.input_dim - 1 if calls_feature is None else calls_feature
    last = windows.inputs[:, -1, col]
    preds = np.repeat(last[:, None], windows.horizon, axis=1)
    return metric_mae(preds, windows.targets)


def run_experiment(spec: ExperimentSpec, road: RoadSeries) -> RunReport:
    """Train on the first split, early-stop on the second, report on the third."""
    started = time.perf_counter()
    windows, stats, calls_std = prepare_windows(spec, road)
    if len(windows.train) == 0 or len(windows.val) == 0 or len(windows.test) == 0:
        raise InsufficientData("one of the splits produced no windows")

    result: TrainingResult = train_forecaster(
        windows.train, windows.val, spec.training, derive_rng(spec.seed, "train")
    )
    test_mae = evaluate_mae(result.params, windows.test)
    wall_ms = (time.perf_counter() - started) * 1e3

    return RunReport(
        scenario_id=spec.scenario_id,
        lam=spec.scenario.lam,
        handover_prob=spec.scenario.handover_prob,
        cell_range_miles=spec.scenario.cell_range_miles,
        mode=spec.feature_mode,
        seed=spec.seed,
        test_mae=test_mae,
        test_mae_raw=test_mae * calls_std,
        val_mae=min(result.val_maes),
        baseline_mae=naive_baseline(windows.test),
        epochs=result.epochs_run,
        best_epoch=result.best_epoch,
        train_losses=result.train_losses,
        val_maes=result.val_maes,
        norm_checksum=stats.checksum(),
        wall_ms=wall_ms,
    )


@dataclass
class GridRow:
    """Outcome of one grid cell: a report, or the error that stopped it."""

    spec: ExperimentSpec
    report: RunReport | None = None
    error: str | None = None


def _max_workers() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_scenario_grid(
    specs: Sequence[ExperimentSpec], road: RoadSeries, max_workers: int | None = None
) -> list[GridRow]:
    """Run every spec; per-row failures are recorded and the grid continues."""
    if not specs:
        raise ValueError("empty scenario grid")
    workers = _max_workers() if max_workers is None else max(1, max_workers)

    def one(spec: ExperimentSpec) -> GridRow:
        try:
            return GridRow(spec, report=run_experiment(spec, road))
        except LoadcastError as exc:
            return GridRow(spec, error=f"{type(exc).__name__}: {exc}")

    if workers == 1:
        return [one(s) for s in specs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, specs))


def table_scenarios(
    delta_s: int = 300, exact_flow: bool = False
) -> list[ScenarioConfig]:
    """The built-in seven-scenario grid (handover sweep, rate bump, wide cell)."""
    one = 60.0 / delta_s  # one request per interval, expressed per minute
    three = 180.0 / delta_s
    rows = [
        (one, 1.0, 1.5),
        (one, 0.8, 1.5),
        (one, 0.5, 1.5),
        (one, 0.2, 1.5),
        (one, 0.0, 1.5),
        (three, 0.5, 1.5),
        (one, 0.5, 6.0),
    ]
    return [
        ScenarioConfig(lam, h, rng_miles, delta_s=delta_s, exact_flow=exact_flow)
        for lam, h, rng_miles in rows
    ]


def grid_specs(
    scenarios: Sequence[ScenarioConfig],
    seeds: Sequence[int],
    modes: Sequence[str] = FEATURE_MODES,
    window: int = 18,
    horizon: int = 1,
    split: tuple[int, int, int] = (3, 1, 1),
    training: TrainingConfig | None = None,
) -> list[ExperimentSpec]:
    training = training or TrainingConfig()
    return [
        ExperimentSpec(scenario, mode, window, horizon, split, training, seed)
        for scenario in scenarios
        for mode in modes
        for seed in seeds
    ]


def comparison_table(rows: Sequence[GridRow]) -> str:
    """Two-column text table of mean test MAE per scenario: Net | Net&Road."""
    cells: dict[str, dict[str, list[float]]] = {}
    meta: dict[str, tuple[float, float, float]] = {}
    for row in rows:
        if row.report is None:
            continue
        r = row.report
        cells.setdefault(r.scenario_id, {}).setdefault(r.mode, []).append(r.test_mae)
        meta[r.scenario_id] = (r.lam, r.handover_prob, r.cell_range_miles)
    lines = [f"{'scenario':<22}{'lam':>7}{'h':>6}{'range':>7}{'Net':>10}{'Net&Road':>10}"]
    for sid, modes in cells.items():
        lam, h, rng_miles = meta[sid]
        net = np.mean(modes["net"]) if "net" in modes else float("nan")
        fused = np.mean(modes["net_road"]) if "net_road" in modes else float("nan")
        lines.append(
            f"{sid:<22}{lam:>7.2f}{h:>6.2f}{rng_miles:>7.1f}{net:>10.4f}{fused:>10.4f}"
        )
    return "\n".join(lines)
