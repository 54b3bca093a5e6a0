"""Road measurement series: parsing, validation, synthesis, correlation.

A road series is a sequence of 5-minute observations (timestamp, vehicle
flow, average speed) covering whole days of 288 slots each. Parsing enforces
the slot grid and sanity bounds; `synthesize_road_series` produces a
deterministic stand-in with weekday commute structure (two flow peaks, speed
collapse under congestion) for runs without a real measurement CSV.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime, timezone
from functools import cached_property

import numpy as np

from .errors import BoundsError, DegenerateSeries, GapError, MalformedRow

SLOT_SECONDS = 300
POINTS_PER_DAY = 288  # 24 h / 5 min
SPEED_MAX_MPH = 120.0
FLOW_MAX_SYNTH = 600
SPEED_FLOOR_SYNTH = 5.0
SPEED_CEIL_SYNTH = 75.0

# Monday 2021-03-29 00:00:00 UTC; any 00:00-aligned epoch works.
DEFAULT_START_EPOCH = 1_616_976_000


@dataclass(frozen=True)
class RoadRecord:
    """One 5-minute observation: epoch seconds (UTC), vehicles per interval, mph."""

    timestamp: int
    flow: int
    speed: float

    def __post_init__(self):
        if self.flow < 0:
            raise BoundsError(f"flow {self.flow} < 0 at timestamp {self.timestamp}")
        if self.speed < 0 or self.speed > SPEED_MAX_MPH:
            raise BoundsError(
                f"speed {self.speed} outside [0, {SPEED_MAX_MPH}] at timestamp {self.timestamp}"
            )


@dataclass(frozen=True)
class RoadSeries:
    """Validated, whole-day road series.

    Invariants enforced at construction: length is a multiple of 288,
    timestamps strictly increase, and within each day block of 288 records
    consecutive timestamps differ by exactly 300 s. Blocks may be separated
    by larger gaps (skipped weekends in work-day data).
    """

    records: tuple[RoadRecord, ...]

    def __post_init__(self):
        n = len(self.records)
        if n == 0:
            raise GapError("empty road series")
        if n % POINTS_PER_DAY != 0:
            raise GapError(
                f"series length {n} is not a whole number of {POINTS_PER_DAY}-slot days"
            )
        ts = [r.timestamp for r in self.records]
        for k in range(1, n):
            if ts[k] <= ts[k - 1]:
                raise MalformedRow(f"timestamps not strictly increasing at index {k}")
            if k % POINTS_PER_DAY != 0 and ts[k] - ts[k - 1] != SLOT_SECONDS:
                raise GapError(
                    f"non-{SLOT_SECONDS}s spacing inside a day at timestamp {ts[k]}",
                    slot=ts[k - 1] + SLOT_SECONDS,
                )

    @property
    def days(self) -> int:
        return len(self.records) // POINTS_PER_DAY

    @property
    def points_per_day(self) -> int:
        return POINTS_PER_DAY

    def __len__(self) -> int:
        return len(self.records)

    @cached_property
    def timestamps(self) -> np.ndarray:
        return np.array([r.timestamp for r in self.records], dtype=np.int64)

    @cached_property
    def flows(self) -> np.ndarray:
        return np.array([r.flow for r in self.records], dtype=np.int64)

    @cached_property
    def speeds(self) -> np.ndarray:
        return np.array([r.speed for r in self.records], dtype=np.float64)

    def gap_indices(self) -> tuple[int, ...]:
        """Indices i whose record is not 300 s after record i-1 (day-boundary gaps)."""
        dt = np.diff(self.timestamps)
        return tuple(int(i) + 1 for i in np.flatnonzero(dt != SLOT_SECONDS))


def _parse_timestamp(text: str, line: int) -> int:
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        stamp = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError as exc:
        raise MalformedRow(f"line {line}: bad timestamp {text!r}") from exc
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return int(stamp.timestamp())


def _parse_flow(text: str, line: int) -> int:
    try:
        value = float(text)
    except ValueError as exc:
        raise MalformedRow(f"line {line}: bad flow {text!r}") from exc
    if not value.is_integer():
        raise MalformedRow(f"line {line}: flow {text!r} is not an integer count")
    if value < 0:
        raise BoundsError(f"line {line}: flow {text!r} < 0")
    return int(value)


def _parse_speed(text: str, line: int) -> float:
    try:
        value = float(text)
    except ValueError as exc:
        raise MalformedRow(f"line {line}: bad speed {text!r}") from exc
    if not np.isfinite(value):
        raise MalformedRow(f"line {line}: non-finite speed {text!r}")
    if value < 0 or value > SPEED_MAX_MPH:
        raise BoundsError(f"line {line}: speed {text!r} outside [0, {SPEED_MAX_MPH}]")
    return value


def _slot_iso(slot: int) -> str:
    return datetime.fromtimestamp(slot, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_road_csv(
    path: str,
    column_map: dict[str, str] | None = None,
    impute: str | None = None,
) -> RoadSeries:
    """Read a `timestamp,flow,speed` CSV into a validated RoadSeries.

    `column_map` renames the documented columns to those present in the file
    (e.g. {"flow": "Total Flow"}). Timestamps may be epoch seconds or
    ISO-8601 (naive values are taken as UTC). Missing 5-minute slots raise
    GapError unless `impute="hold"`, which repeats the most recent earlier
    record into each missing slot.
    """
    if impute not in (None, "hold"):
        raise ValueError(f"unknown impute mode {impute!r}")
    names = {"timestamp": "timestamp", "flow": "flow", "speed": "speed"}
    if column_map:
        unknown = set(column_map) - set(names)
        if unknown:
            raise ValueError(f"column_map keys must be timestamp/flow/speed, got {sorted(unknown)}")
        names.update(column_map)

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in names.values() if c not in header]
        if missing:
            raise MalformedRow(f"header {header} lacks required column(s) {missing}")
        rows: list[tuple[int, int, float]] = []
        for line, row in enumerate(reader, start=2):
            ts = _parse_timestamp(row[names["timestamp"]] or "", line)
            if ts % SLOT_SECONDS != 0:
                raise MalformedRow(
                    f"line {line}: timestamp {ts} not aligned to the {SLOT_SECONDS}s slot grid"
                )
            rows.append(
                (ts, _parse_flow(row[names["flow"]] or "", line), _parse_speed(row[names["speed"]] or "", line))
            )

    if not rows:
        raise GapError("CSV contains no data rows")
    rows.sort(key=lambda r: r[0])
    for a, b in zip(rows, rows[1:]):
        if a[0] == b[0]:
            raise MalformedRow(f"duplicate timestamp {a[0]}")

    present = {ts: (flow, speed) for ts, flow, speed in rows}
    days = sorted({ts // 86_400 for ts, _, _ in rows})
    records: list[RoadRecord] = []
    last: tuple[int, float] | None = None
    for day in days:
        base = day * 86_400
        for k in range(POINTS_PER_DAY):
            slot = base + k * SLOT_SECONDS
            if slot in present:
                flow, speed = present[slot]
                last = (flow, speed)
            elif impute == "hold" and last is not None:
                flow, speed = last
            else:
                raise GapError(f"missing 5-minute slot at {_slot_iso(slot)}", slot=slot)
            records.append(RoadRecord(slot, flow, speed))
    return RoadSeries(tuple(records))


def serialize_road_csv(series: RoadSeries, path: str) -> None:
    """Write the documented `timestamp,flow,speed` CSV (epoch-second timestamps)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "flow", "speed"])
        for r in series.records:
            writer.writerow([r.timestamp, r.flow, repr(r.speed)])


def _gaussian_bump(hours: np.ndarray, center: float, width: float) -> np.ndarray:
    return np.exp(-0.5 * ((hours - center) / width) ** 2)


def synthesize_road_series(
    days: int, seed: int, start_epoch: int = DEFAULT_START_EPOCH
) -> RoadSeries:
    """Deterministic weekday-like series: bimodal flow, congestion speed dips.

    Flow follows a two-peak commute profile with per-day amplitude variation
    and multiplicative slot noise; speed starts near free flow, sags as flow
    approaches capacity, and collapses during randomly injected congestion
    events (preferentially inside the peaks). Flow lands in [0, 600] veh/5min
    and speed in [5, 75] mph; at peak hours the two are negatively correlated.
    """
    if days < 1:
        raise ValueError("days must be >= 1")
    if start_epoch % SLOT_SECONDS != 0:
        raise ValueError("start_epoch must lie on the 300 s slot grid")
    rng = np.random.default_rng(seed)

    hours = (np.arange(POINTS_PER_DAY) * SLOT_SECONDS / 3600.0) % 24.0
    all_flow = np.empty(days * POINTS_PER_DAY)
    all_speed = np.empty(days * POINTS_PER_DAY)

    # Slow multiplicative demand envelope (AR(1), ~2 h correlation time)
    # carried across days; commute peaks move, rescale and stretch day by day.
    env_phi = 0.96
    env_step = 0.14 * np.sqrt(1.0 - env_phi**2)
    env_state = rng.normal(0.0, 0.14)

    for day in range(days):
        amp_morning = 430.0 * (1.0 + 0.22 * rng.standard_normal())
        amp_evening = 470.0 * (1.0 + 0.22 * rng.standard_normal())
        center_morning = 7.9 + rng.normal(0.0, 0.7)
        center_evening = 17.3 + rng.normal(0.0, 0.7)
        width_morning = 1.1 * rng.uniform(0.85, 1.25)
        width_evening = 1.4 * rng.uniform(0.85, 1.25)
        profile = (
            25.0
            + amp_morning * _gaussian_bump(hours, center_morning, width_morning)
            + amp_evening * _gaussian_bump(hours, center_evening, width_evening)
            + 240.0 * _gaussian_bump(hours, 12.8, 3.6)
        )
        envelope = np.empty(POINTS_PER_DAY)
        for k in range(POINTS_PER_DAY):
            env_state = env_phi * env_state + rng.normal(0.0, env_step)
            envelope[k] = env_state
        flow = profile * np.exp(envelope + rng.normal(0.0, 0.015, POINTS_PER_DAY))

        # Free-flow speed minus a congestion sag as flow nears capacity.
        free_flow = 67.0
        sag = 26.0 / (1.0 + np.exp(-(flow - 380.0) / 60.0))
        speed = free_flow - sag + rng.normal(0.0, 1.2, POINTS_PER_DAY)

        # Stop-and-go congestion regimes inside the commute peaks (plus
        # occasional midday incidents): while a regime lasts, jam episodes of
        # light/heavy/severe depth alternate with partial recoveries, so speed
        # keeps crossing discretization levels the way queued traffic does.
        regimes = []
        for (lo, hi), prob, dur_lo, dur_hi in (
            ((6.4, 9.0), 0.97, 50.0, 130.0),
            ((15.3, 18.2), 0.97, 50.0, 130.0),
            ((9.5, 15.0), 0.5, 20.0, 60.0),
        ):
            if rng.random() < prob:
                onset = rng.uniform(lo, hi)
                regimes.append((onset, onset + rng.uniform(dur_lo, dur_hi) / 60.0))
        for onset, end in regimes:
            idx = np.flatnonzero((hours >= onset) & (hours < end))
            k = 0
            jammed = True
            while k < idx.size:
                if jammed:
                    span = int(rng.integers(2, 6))
                    cap = rng.choice([17.5, 22.0, 30.0]) + rng.normal(0.0, 1.5)
                else:
                    span = int(rng.integers(1, 4))
                    cap = rng.uniform(45.0, 60.0)
                sl = idx[k : k + span]
                speed[sl] = np.minimum(
                    speed[sl], cap + rng.normal(0.0, 1.0, sl.size)
                )
                flow[sl] *= rng.uniform(0.78, 0.9) if jammed else rng.uniform(0.9, 1.0)
                jammed = not jammed
                k += span

        sl = slice(day * POINTS_PER_DAY, (day + 1) * POINTS_PER_DAY)
        all_flow[sl] = flow
        all_speed[sl] = speed

    flow_int = np.clip(np.rint(all_flow), 0, FLOW_MAX_SYNTH).astype(np.int64)
    speed_clipped = np.clip(all_speed, SPEED_FLOOR_SYNTH, SPEED_CEIL_SYNTH)
    records = tuple(
        RoadRecord(start_epoch + i * SLOT_SECONDS, int(flow_int[i]), float(speed_clipped[i]))
        for i in range(days * POINTS_PER_DAY)
    )
    return RoadSeries(records)


def correlation_report(series: RoadSeries, calls: np.ndarray | None = None) -> np.ndarray:
    """Pearson correlation matrix of (flow, speed[, calls]).

    Returns a symmetric matrix with unit diagonal and entries clipped to
    [-1, 1]; raises DegenerateSeries when any variable has zero variance.
    """
    columns = [("flow", series.flows.astype(np.float64)), ("speed", series.speeds)]
    if calls is not None:
        calls = np.asarray(calls, dtype=np.float64)
        if calls.shape != (len(series),) :
            raise ValueError("calls must align 1:1 with the road series")
        columns.append(("calls", calls))
    for name, col in columns:
        if np.ptp(col) == 0.0:
            raise DegenerateSeries(f"variable {name!r} has zero variance")
    mat = np.corrcoef(np.vstack([col for _, col in columns]))
    mat = np.clip(mat, -1.0, 1.0)
    np.fill_diagonal(mat, 1.0)
    return mat
