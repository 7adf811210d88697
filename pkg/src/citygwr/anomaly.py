"""Robust drop detection on the daily activity series, with region-wise explanations.

A day is anomalous when its activity falls more than ``mad_multiplier``
scaled-MADs below the rolling median of recent ordinary days. Flagged days
are excluded from later baselines so a multi-day event cannot mask its own
tail. The detector is a relative rule on purpose: the absolute plateau
level of the activity series is dataset specific, a robust drop rule
transfers across cities. Its parameters are configuration, not claims.

An explanation compares the day's observed density vector against the
matched prototype, element by element, giving a signed per-region
deviation map a human can interrogate.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from typing import Sequence

import numpy as np

from .citywide import ActivityRecord, CityModel
from .errors import ConfigError, ExportError, PipelineOrderError
from .geo import UtmConverter
from .regions import RegionMap
from .voronoi import VoronoiPartition

__all__ = [
    "AnomalyPolicy",
    "AnomalyReport",
    "DayEvaluation",
    "DropDetector",
    "TopRegion",
    "evaluate_day",
    "explain",
    "export_deviation_map",
]

# Scales a median absolute deviation to a Gaussian-consistent sigma.
MAD_SCALE = 1.4826

REASON_INSUFFICIENT_HISTORY = "insufficient_history"


@dataclass(frozen=True)
class AnomalyPolicy:
    warmup_days: int = 30
    window: int = 28
    mad_multiplier: float = 3.0
    min_history: int | None = None  # defaults to window

    def validate(self) -> None:
        if self.warmup_days < 0:
            raise ConfigError(f"warmup_days must be >= 0, got {self.warmup_days}")
        if self.window < 7:
            raise ConfigError(f"window must be >= 7, got {self.window}")
        if not self.mad_multiplier > 0:
            raise ConfigError(f"mad_multiplier must be > 0, got {self.mad_multiplier}")
        if self.min_history is not None and self.min_history < 1:
            raise ConfigError(f"min_history must be >= 1, got {self.min_history}")

    @property
    def effective_min_history(self) -> int:
        return self.window if self.min_history is None else self.min_history


@dataclass(frozen=True)
class DayEvaluation:
    day: date
    activity: float
    flagged: bool
    baseline: float | None = None
    spread: float | None = None  # scaled MAD
    threshold: float | None = None
    reason: str | None = None  # why the day could not be flagged, if so


def evaluate_day(
    policy: AnomalyPolicy, history: Sequence[DayEvaluation], record: ActivityRecord
) -> DayEvaluation:
    """Evaluate one day against the trailing window of non-flagged history.

    The baseline is the median activity of the last ``window`` non-flagged
    days, spread the scaled MAD over the same days. Days inside the warmup
    period, or with fewer than ``min_history`` usable baseline days, are
    never flagged and carry an insufficient-history reason.
    """
    day_index = len(history)
    eligible = [ev.activity for ev in history if not ev.flagged][-policy.window :]
    if day_index < policy.warmup_days or len(eligible) < policy.effective_min_history:
        return DayEvaluation(
            day=record.day,
            activity=record.activity,
            flagged=False,
            reason=REASON_INSUFFICIENT_HISTORY,
        )
    arr = np.asarray(eligible, dtype=np.float64)
    baseline = float(np.median(arr))
    spread = MAD_SCALE * float(np.median(np.abs(arr - baseline)))
    threshold = baseline - policy.mad_multiplier * spread
    flagged = record.activity < threshold
    return DayEvaluation(
        day=record.day,
        activity=record.activity,
        flagged=flagged,
        baseline=baseline,
        spread=spread,
        threshold=threshold,
    )


class DropDetector:
    """Stateful wrapper that remembers its own verdicts for baseline exclusion."""

    def __init__(self, policy: AnomalyPolicy):
        policy.validate()
        self.policy = policy
        self.evaluations: list[DayEvaluation] = []

    def evaluate(self, record: ActivityRecord) -> DayEvaluation:
        evaluation = evaluate_day(self.policy, self.evaluations, record)
        self.evaluations.append(evaluation)
        return evaluation

    def to_snapshot(self) -> list[dict]:
        return [
            {
                "day": ev.day.isoformat(),
                "activity": ev.activity,
                "flagged": ev.flagged,
                "baseline": ev.baseline,
                "spread": ev.spread,
                "threshold": ev.threshold,
                "reason": ev.reason,
            }
            for ev in self.evaluations
        ]

    @classmethod
    def from_snapshot(cls, policy: AnomalyPolicy, docs: list[dict]) -> "DropDetector":
        detector = cls(policy)
        detector.evaluations = [
            DayEvaluation(
                day=date.fromisoformat(doc["day"]),
                activity=float(doc["activity"]),
                flagged=bool(doc["flagged"]),
                baseline=doc["baseline"],
                spread=doc["spread"],
                threshold=doc["threshold"],
                reason=doc["reason"],
            )
            for doc in docs
        ]
        return detector


@dataclass(frozen=True)
class TopRegion:
    region_id: int
    deviation: float  # observed - expected; positive = surplus traffic
    observed: float
    expected: float
    direction: str  # "surplus" | "deficit"
    generator_km: tuple[float, float]
    lonlat: tuple[float, float]


@dataclass(frozen=True)
class AnomalyReport:
    """A flagged day with its per-region deviation from the matched prototype.

    ``observed`` is the day's density vector zero-padded to the current
    region count and is carried verbatim; ``deviations`` is elementwise
    observed - expected.
    """

    day: date
    activity: float
    bmu_id: int
    baseline: float | None
    threshold: float | None
    region_ids: tuple[int, ...]
    observed: np.ndarray
    expected: np.ndarray
    deviations: np.ndarray
    top_regions: tuple[TopRegion, ...]


def explain(
    city: CityModel,
    record: ActivityRecord,
    region_map: RegionMap,
    converter: UtmConverter,
    baseline: float | None = None,
    threshold: float | None = None,
    top_k: int = 5,
) -> AnomalyReport:
    """Compare a day's observed densities with its matched prototype.

    The retained input is zero-padded up to the model's current dimension
    (regions created since that day had zero traffic then) and compared
    against the prototype's current weights. Top regions are ranked by
    absolute deviation, carrying planar and WGS84 coordinates of the region
    generator for human lookup.
    """
    proto = city.net.weight(record.bmu_id)
    dim = city.net.input_dim
    region_ids = region_map.region_ids()
    if len(region_ids) != dim:
        raise PipelineOrderError(
            f"region count {len(region_ids)} does not match model dimension {dim}"
        )
    observed = np.zeros(dim, dtype=np.float64)
    observed[: len(record.densities)] = record.densities
    deviations = observed - proto

    order = sorted(range(dim), key=lambda k: (-abs(float(deviations[k])), region_ids[k]))
    weights = region_map.net.weights_matrix()
    top = []
    for k in order[:top_k]:
        gx, gy = float(weights[k, 0]), float(weights[k, 1])
        lon, lat = converter.km_to_lonlat(gx, gy)
        dev = float(deviations[k])
        top.append(
            TopRegion(
                region_id=region_ids[k],
                deviation=dev,
                observed=float(observed[k]),
                expected=float(proto[k]),
                direction="surplus" if dev >= 0 else "deficit",
                generator_km=(gx, gy),
                lonlat=(float(lon), float(lat)),
            )
        )
    return AnomalyReport(
        day=record.day,
        activity=record.activity,
        bmu_id=record.bmu_id,
        baseline=baseline,
        threshold=threshold,
        region_ids=region_ids,
        observed=observed,
        expected=proto,
        deviations=deviations,
        top_regions=tuple(top),
    )


def export_deviation_map(
    report: AnomalyReport, partition: VoronoiPartition, converter: UtmConverter
) -> dict:
    """Render a report as a WGS84 FeatureCollection, one feature per region.

    Serialization of the same report and partition is byte-stable. Missing
    polygons are an error: the caller must build the partition from the
    same region set the report covers.
    """
    cell_by_id = {cell.region_id: cell for cell in partition.cells}
    features = []
    for k, region_id in enumerate(report.region_ids):
        cell = cell_by_id.get(region_id)
        if cell is None:
            raise ExportError(f"no polygon for region {region_id} in the partition")
        lons, lats = converter.km_to_lonlat(cell.vertices[:, 0], cell.vertices[:, 1])
        ring = [[float(lon), float(lat)] for lon, lat in zip(lons, lats)]
        ring.append(ring[0])
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [ring]},
                "properties": {
                    "region_id": region_id,
                    "observed": float(report.observed[k]),
                    "expected": float(report.expected[k]),
                    "deviation": float(report.deviations[k]),
                },
            }
        )
    return {
        "type": "FeatureCollection",
        "day": report.day.isoformat(),
        "activity": report.activity,
        "features": features,
    }


def report_to_dict(report: AnomalyReport) -> dict:
    """JSON-ready form of a report (used by exports and checkpoints)."""
    return {
        "day": report.day.isoformat(),
        "activity": report.activity,
        "bmu_id": report.bmu_id,
        "baseline": report.baseline,
        "threshold": report.threshold,
        "region_ids": list(report.region_ids),
        "observed": [float(v) for v in report.observed],
        "expected": [float(v) for v in report.expected],
        "deviations": [float(v) for v in report.deviations],
        "top_regions": [
            {
                "region_id": t.region_id,
                "deviation": t.deviation,
                "observed": t.observed,
                "expected": t.expected,
                "direction": t.direction,
                "generator_km": [t.generator_km[0], t.generator_km[1]],
                "lonlat": [t.lonlat[0], t.lonlat[1]],
            }
            for t in report.top_regions
        ],
    }


def report_from_dict(doc: dict) -> AnomalyReport:
    return AnomalyReport(
        day=date.fromisoformat(doc["day"]),
        activity=float(doc["activity"]),
        bmu_id=int(doc["bmu_id"]),
        baseline=doc["baseline"],
        threshold=doc["threshold"],
        region_ids=tuple(int(r) for r in doc["region_ids"]),
        observed=np.asarray(doc["observed"], dtype=np.float64),
        expected=np.asarray(doc["expected"], dtype=np.float64),
        deviations=np.asarray(doc["deviations"], dtype=np.float64),
        top_regions=tuple(
            TopRegion(
                region_id=int(t["region_id"]),
                deviation=float(t["deviation"]),
                observed=float(t["observed"]),
                expected=float(t["expected"]),
                direction=str(t["direction"]),
                generator_km=(float(t["generator_km"][0]), float(t["generator_km"][1])),
                lonlat=(float(t["lonlat"][0]), float(t["lonlat"][1])),
            )
            for t in doc["top_regions"]
        ),
    )
