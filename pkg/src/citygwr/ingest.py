"""Taxi CSV parsing, planar projection, and day-by-day grouping.

The input container is the Porto ECML/PKDD taxi CSV layout: a header row
with TRIP_ID, CALL_TYPE, ORIGIN_CALL, ORIGIN_STAND, TAXI_ID, TIMESTAMP,
DAY_TYPE, MISSING_DATA, POLYLINE, where POLYLINE holds a JSON array of
[lon, lat] pairs. Parsing never aborts on a bad record: every rejected row
is surfaced as a Diagnostic with exactly one reason, so each input record
is either yielded or accounted for.

Day attribution uses the trip START timestamp in the configured local
timezone. The grouper tolerates out-of-order input within a slack window
(re-sorted inside the buffer) and rejects anything older as LATE_ARRIVAL;
calendar gaps are emitted as flagged empty days rather than silently
skipped.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta
from typing import Callable, Iterable, Iterator
from zoneinfo import ZoneInfo

import numpy as np

from .errors import InputError
from .geo import BoundingBox, UtmConverter

__all__ = [
    "DayBatch",
    "Diagnostic",
    "RawTrip",
    "Trajectory",
    "parse_trips",
    "stream_by_day",
    "to_trajectory",
]

REASON_BAD_ROW = "bad_row"
REASON_BAD_TIMESTAMP = "bad_timestamp"
REASON_BAD_POLYLINE = "bad_polyline"
REASON_BAD_COORDINATES = "bad_coordinates"
REASON_EMPTY_POLYLINE = "empty_polyline"
REASON_MISSING_DATA = "missing_data"
REASON_OUT_OF_BOUNDS = "out_of_bounds"
REASON_LATE_ARRIVAL = "late_arrival"
REASON_EMPTY_DAY = "empty_day"

_REQUIRED_COLUMNS = ("TRIP_ID", "TIMESTAMP", "MISSING_DATA", "POLYLINE")

DiagnosticSink = Callable[["Diagnostic"], None]


@dataclass(frozen=True)
class Diagnostic:
    stage: str
    reason: str
    ref: str
    detail: str = ""


@dataclass(frozen=True)
class RawTrip:
    trip_id: str
    start_ts: int
    polyline: np.ndarray  # (n, 2) of [lon, lat] degrees
    missing_data: bool


@dataclass(frozen=True)
class Trajectory:
    trip_id: str
    start_ts: int
    points: np.ndarray  # (n, 2) of [x, y] kilometers

    @property
    def origin(self) -> tuple[float, float]:
        return float(self.points[0, 0]), float(self.points[0, 1])


@dataclass(frozen=True)
class DayBatch:
    day: date
    trajectories: list[Trajectory]

    @property
    def empty(self) -> bool:
        return not self.trajectories


def parse_trips(lines: Iterable[str], on_diagnostic: DiagnosticSink | None = None) -> Iterator[RawTrip]:
    """Yield RawTrip records from CSV lines, in file order.

    Malformed rows go to ``on_diagnostic`` and are skipped. A missing or
    incomplete header is fatal (InputError): there is nothing to stream.
    """
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise InputError("input is empty: no CSV header") from None
    columns = {name.strip(): i for i, name in enumerate(header)}
    for name in _REQUIRED_COLUMNS:
        if name not in columns:
            raise InputError(f"input header is missing required column {name}")
    i_trip = columns["TRIP_ID"]
    i_ts = columns["TIMESTAMP"]
    i_missing = columns["MISSING_DATA"]
    i_poly = columns["POLYLINE"]
    width = max(i_trip, i_ts, i_missing, i_poly) + 1

    def reject(ref: str, reason: str, detail: str = "") -> None:
        if on_diagnostic is not None:
            on_diagnostic(Diagnostic(stage="parse", reason=reason, ref=ref, detail=detail))

    for row_no, row in enumerate(reader, start=2):
        ref = f"row {row_no}"
        if len(row) < width:
            reject(ref, REASON_BAD_ROW, f"expected >= {width} fields, got {len(row)}")
            continue
        trip_id = row[i_trip].strip()
        if trip_id:
            ref = trip_id
        try:
            start_ts = int(row[i_ts])
        except ValueError:
            reject(ref, REASON_BAD_TIMESTAMP, f"TIMESTAMP {row[i_ts]!r} is not an integer")
            continue
        missing = row[i_missing].strip().lower() == "true"
        if missing:
            reject(ref, REASON_MISSING_DATA)
            continue
        try:
            points = json.loads(row[i_poly])
        except json.JSONDecodeError as exc:
            reject(ref, REASON_BAD_POLYLINE, str(exc))
            continue
        if not isinstance(points, list):
            reject(ref, REASON_BAD_POLYLINE, "POLYLINE is not a JSON array")
            continue
        if not points:
            reject(ref, REASON_EMPTY_POLYLINE)
            continue
        try:
            polyline = np.asarray(points, dtype=np.float64)
        except ValueError:
            reject(ref, REASON_BAD_POLYLINE, "POLYLINE entries are not numeric pairs")
            continue
        if polyline.ndim != 2 or polyline.shape[1] != 2:
            reject(ref, REASON_BAD_POLYLINE, f"POLYLINE has shape {polyline.shape}")
            continue
        lon = polyline[:, 0]
        lat = polyline[:, 1]
        if not (
            np.all(np.isfinite(polyline))
            and np.all(np.abs(lon) <= 180.0)
            and np.all(np.abs(lat) <= 90.0)
        ):
            reject(ref, REASON_BAD_COORDINATES, "coordinates outside valid degree ranges")
            continue
        yield RawTrip(trip_id=trip_id, start_ts=start_ts, polyline=polyline, missing_data=missing)


def to_trajectory(
    trip: RawTrip, converter: UtmConverter, bbox: BoundingBox
) -> Trajectory | Diagnostic:
    """Project a trip to planar kilometers; reject origins outside the box."""
    xs, ys = converter.lonlat_to_km(trip.polyline[:, 0], trip.polyline[:, 1])
    points = np.column_stack([xs, ys])
    ox, oy = float(points[0, 0]), float(points[0, 1])
    if not bbox.contains(ox, oy):
        return Diagnostic(
            stage="project",
            reason=REASON_OUT_OF_BOUNDS,
            ref=trip.trip_id,
            detail=f"origin ({ox:.3f}, {oy:.3f}) km outside bounding box",
        )
    return Trajectory(trip_id=trip.trip_id, start_ts=trip.start_ts, points=points)


def stream_by_day(
    trajectories: Iterable[Trajectory],
    tz: ZoneInfo,
    slack_seconds: int = 86400,
    on_diagnostic: DiagnosticSink | None = None,
) -> Iterator[DayBatch]:
    """Group trajectories into local-calendar days, emitted in day order.

    Trips may arrive out of order by up to ``slack_seconds``; the buffer
    re-sorts them by start timestamp (stable on ties). Older trips are
    rejected as LATE_ARRIVAL. Days with no trips between the first and last
    observed day are emitted as empty batches.
    """

    def reject(traj: Trajectory, detail: str) -> None:
        if on_diagnostic is not None:
            on_diagnostic(
                Diagnostic(stage="group", reason=REASON_LATE_ARRIVAL, ref=traj.trip_id, detail=detail)
            )

    def day_end_ts(day: date) -> float:
        nxt = datetime.combine(day + timedelta(days=1), time.min, tzinfo=tz)
        return nxt.timestamp()

    buffer: dict[date, list[tuple[int, int, Trajectory]]] = {}
    watermark: int | None = None
    next_day: date | None = None

    def emit(day: date) -> DayBatch:
        entries = buffer.pop(day, [])
        entries.sort(key=lambda e: (e[0], e[1]))
        return DayBatch(day=day, trajectories=[t for _, _, t in entries])

    for seq, traj in enumerate(trajectories):
        ts = traj.start_ts
        if watermark is not None and ts < watermark - slack_seconds:
            reject(traj, f"timestamp {ts} is {watermark - ts}s behind the stream watermark")
            continue
        watermark = ts if watermark is None else max(watermark, ts)
        day = datetime.fromtimestamp(ts, tz).date()
        buffer.setdefault(day, []).append((ts, seq, traj))
        if next_day is None:
            next_day = day
        while next_day is not None and day_end_ts(next_day) <= watermark - slack_seconds:
            yield emit(next_day)
            next_day = next_day + timedelta(days=1)

    if next_day is not None and buffer:
        last = max(buffer)
        while next_day <= last:
            yield emit(next_day)
            next_day = next_day + timedelta(days=1)
