"""File writers for pipeline outputs.

Every writer here is deterministic: identical state produces byte-identical
files (sorted JSON keys, fixed column orders, shortest-roundtrip float
repr). Nothing in an export depends on wall-clock time.
"""

from __future__ import annotations

import json
from pathlib import Path

from .anomaly import DayEvaluation, report_to_dict
from .citywide import ActivityRecord, CityModel
from .regions import RegionMap

__all__ = [
    "dump_json_stable",
    "prototypes_document",
    "write_activity_csv",
    "write_flags_csv",
    "write_json",
    "write_reports_json",
]


def dump_json_stable(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_json(path: Path, obj) -> None:
    path.write_text(dump_json_stable(obj), encoding="utf-8")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_activity_csv(path: Path, records: list[ActivityRecord]) -> None:
    lines = ["date,activity,bmu_id,trip_count,event"]
    for rec in records:
        lines.append(
            f"{rec.day.isoformat()},{_fmt(rec.activity)},{rec.bmu_id},"
            f"{rec.trip_count},{rec.event}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_flags_csv(path: Path, evaluations: list[DayEvaluation]) -> None:
    lines = ["date,activity,baseline,threshold,spread,flagged,reason"]
    for ev in evaluations:
        lines.append(
            f"{ev.day.isoformat()},{_fmt(ev.activity)},{_fmt(ev.baseline)},"
            f"{_fmt(ev.threshold)},{_fmt(ev.spread)},{str(ev.flagged).lower()},"
            f"{ev.reason or ''}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def prototypes_document(city: CityModel, region_map: RegionMap) -> dict:
    """Prototype weight vectors keyed by region id, clamped for rendering.

    Weight updates do not preserve the simplex, so entries can drift
    slightly negative; rendered values clamp at 0 and the audit field
    ``clamped_regions`` lists where that happened.
    """
    region_ids = region_map.region_ids()
    prototypes = []
    for pid, weights, eta in city.prototypes():
        clamped = [region_ids[k] for k, v in enumerate(weights) if v < 0]
        prototypes.append(
            {
                "id": pid,
                "habituation": eta,
                "weights": {
                    str(region_ids[k]): max(0.0, float(v)) for k, v in enumerate(weights)
                },
                "clamped_regions": clamped,
            }
        )
    return {"prototypes": prototypes}


def write_reports_json(path: Path, reports: list) -> None:
    write_json(path, {"reports": [report_to_dict(r) for r in reports]})
