"""End-to-end orchestration: ingest -> regions -> daily patterns -> anomalies.

One pass, strictly stream-ordered, no ambient randomness: seeding comes
from the stream itself, so identical input and configuration reproduce
identical outputs byte for byte. Within each day, all origin observations
(and any region growth they trigger) complete before the day's density
vector is observed by the city model.

Checkpoints capture both network snapshots, the activity series, detector
verdicts, reports, and the day cursor. Resuming re-streams the input from
the start - re-parsing is cheap and keeps manifest counts and diagnostics
identical to an uninterrupted run - but skips training for days already
covered by the checkpoint.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterator
from zoneinfo import ZoneInfo

from .anomaly import (
    AnomalyReport,
    DropDetector,
    explain,
    export_deviation_map,
    report_from_dict,
    report_to_dict,
)
from .citywide import CityModel
from .config import PipelineConfig
from .errors import ConfigError, PersistenceError
from .exports import (
    prototypes_document,
    write_activity_csv,
    write_flags_csv,
    write_json,
    write_reports_json,
)
from .geo import BoundingBox, UtmConverter
from .ingest import (
    DayBatch,
    Diagnostic,
    REASON_EMPTY_DAY,
    parse_trips,
    stream_by_day,
    to_trajectory,
)
from .regions import RegionMap

__all__ = ["CHECKPOINT_VERSION", "PipelineRun", "load_checkpoint", "replay_day", "run"]

CHECKPOINT_VERSION = 1
MANIFEST_VERSION = 1

REASON_LEVEL1_UNSEEDED = "level1_unseeded"


@dataclass
class PipelineRun:
    """Mutable state of one pipeline execution plus its final manifest."""

    config: PipelineConfig
    region_map: RegionMap
    city: CityModel | None
    detector: DropDetector
    reports: list[AnomalyReport]
    manifest: dict


@dataclass
class _Counters:
    trips_parsed: int = 0
    trips_accepted: int = 0
    rejected: Counter = field(default_factory=Counter)
    days_observed: int = 0
    days_empty: int = 0
    days_skipped: int = 0


def input_digest(paths: tuple[str, ...]) -> str:
    digest = hashlib.sha256()
    for path in paths:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                digest.update(chunk)
    return digest.hexdigest()


def _geo(config: PipelineConfig) -> tuple[UtmConverter, BoundingBox, ZoneInfo]:
    converter = UtmConverter(config.utm_zone, config.northern)
    bbox = BoundingBox.from_degrees(
        converter, config.bbox_west, config.bbox_south, config.bbox_east, config.bbox_north
    )
    return converter, bbox, ZoneInfo(config.timezone)


def _day_batches(
    config: PipelineConfig, counters: _Counters, sink
) -> Iterator[DayBatch]:
    converter, bbox, tz = _geo(config)

    def trajectories():
        for path in config.inputs:
            with open(path, newline="", encoding="utf-8") as fh:
                for trip in parse_trips(fh, sink):
                    counters.trips_parsed += 1
                    result = to_trajectory(trip, converter, bbox)
                    if isinstance(result, Diagnostic):
                        sink(result)
                    else:
                        yield result

    yield from stream_by_day(trajectories(), tz, config.lateness_slack, sink)


def run(config: PipelineConfig, resume_from: str | None = None) -> PipelineRun:
    """Execute the full pipeline; optionally resume from a checkpoint file."""
    config.validate()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    digest = input_digest(config.inputs)
    config_hash = config.config_hash()

    region_map = RegionMap(config.level1)
    city: CityModel | None = None
    detector = DropDetector(config.policy)
    reports: list[AnomalyReport] = []
    cursor: date | None = None

    if resume_from is not None:
        state = load_checkpoint(resume_from)
        if state["config_hash"] != config_hash:
            raise ConfigError(
                "checkpoint was produced under a different configuration "
                f"(hash {state['config_hash'][:12]} != {config_hash[:12]}); refusing to resume"
            )
        if state["input_digest"] != digest:
            raise ConfigError(
                "checkpoint was produced from different input data; refusing to resume"
            )
        region_map = RegionMap.from_snapshot(state["region"])
        city = CityModel.from_snapshot(state["city"]) if state["city"] is not None else None
        detector = DropDetector.from_snapshot(config.policy, state["evaluations"])
        reports = [report_from_dict(doc) for doc in state["reports"]]
        cursor = date.fromisoformat(state["day_cursor"]) if state["day_cursor"] else None

    counters = _Counters()
    diagnostics: list[Diagnostic] = []

    def sink(diag: Diagnostic) -> None:
        counters.rejected[diag.reason] += 1
        diagnostics.append(diag)

    converter, bbox, _ = _geo(config)
    processed_days = 0

    for batch in _day_batches(config, counters, sink):
        counters.trips_accepted += len(batch.trajectories)
        replaying = cursor is not None and batch.day <= cursor
        if batch.empty:
            counters.days_empty += 1
            diagnostics.append(
                Diagnostic(stage="day", reason=REASON_EMPTY_DAY, ref=batch.day.isoformat())
            )
            continue
        if replaying:
            continue

        assignments = []
        for traj in batch.trajectories:
            assignment, created = region_map.observe_origin(traj)
            if created is not None and city is not None:
                city.on_region_created(created)
            assignments.append(assignment)

        if region_map.region_count < 2:
            counters.days_skipped += 1
            diagnostics.append(
                Diagnostic(
                    stage="day",
                    reason=REASON_LEVEL1_UNSEEDED,
                    ref=batch.day.isoformat(),
                    detail="fewer than 2 regions exist; day not observed",
                )
            )
            continue
        if city is None:
            city = CityModel(region_count=region_map.region_count, params=config.level2)

        density = region_map.density_vector(batch.day, assignments)
        record = city.observe_day(density)
        evaluation = detector.evaluate(record)
        if evaluation.flagged:
            reports.append(
                explain(
                    city,
                    record,
                    region_map,
                    converter,
                    baseline=evaluation.baseline,
                    threshold=evaluation.threshold,
                    top_k=config.top_regions,
                )
            )
        cursor = batch.day
        processed_days += 1
        if config.checkpoint_every and processed_days % config.checkpoint_every == 0:
            _write_checkpoint(
                out_dir / "checkpoint.json",
                config_hash,
                digest,
                cursor,
                region_map,
                city,
                detector,
                reports,
            )

    counters.days_observed = len(city.records) if city is not None else 0

    manifest = {
        "format_version": MANIFEST_VERSION,
        "config_hash": config_hash,
        "input_digest": digest,
        "format_versions": {"checkpoint": CHECKPOINT_VERSION, "snapshot": 1},
        "counts": {
            "trips_parsed": counters.trips_parsed,
            "trips_accepted": counters.trips_accepted,
            "rejected": dict(sorted(counters.rejected.items())),
            "days_observed": counters.days_observed,
            "days_empty": counters.days_empty,
            "days_skipped": counters.days_skipped,
            "regions": region_map.region_count,
            "prototypes": city.prototype_count if city is not None else 0,
            "flagged_days": sum(1 for ev in detector.evaluations if ev.flagged),
        },
        "data_start_day": city.records[0].day.isoformat() if city and city.records else None,
        "data_end_day": city.records[-1].day.isoformat() if city and city.records else None,
    }

    _write_outputs(out_dir, config, region_map, city, detector, reports, diagnostics, manifest)
    _write_checkpoint(
        out_dir / "checkpoint.json",
        config_hash,
        digest,
        cursor,
        region_map,
        city,
        detector,
        reports,
    )
    return PipelineRun(
        config=config,
        region_map=region_map,
        city=city,
        detector=detector,
        reports=reports,
        manifest=manifest,
    )


def _write_outputs(
    out_dir: Path,
    config: PipelineConfig,
    region_map: RegionMap,
    city: CityModel | None,
    detector: DropDetector,
    reports: list[AnomalyReport],
    diagnostics: list[Diagnostic],
    manifest: dict,
) -> None:
    converter, bbox, _ = _geo(config)
    write_activity_csv(out_dir / "activity.csv", city.records if city is not None else [])
    write_flags_csv(out_dir / "flags.csv", detector.evaluations)
    write_reports_json(out_dir / "anomalies.json", reports)
    if city is not None:
        write_json(out_dir / "prototypes.json", prototypes_document(city, region_map))
    if region_map.region_count >= 2:
        write_json(out_dir / "regions.geojson", region_map.export_geojson(bbox, converter))
        if reports:
            partition = region_map.voronoi(bbox)
            dev_dir = out_dir / "anomalies"
            dev_dir.mkdir(exist_ok=True)
            for report in reports:
                doc = export_deviation_map(report, partition, converter)
                write_json(dev_dir / f"deviation_{report.day.isoformat()}.geojson", doc)
    with open(out_dir / "diagnostics.jsonl", "w", encoding="utf-8") as fh:
        for diag in diagnostics:
            fh.write(
                json.dumps(
                    {
                        "stage": diag.stage,
                        "reason": diag.reason,
                        "ref": diag.ref,
                        "detail": diag.detail,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    write_json(out_dir / "manifest.json", manifest)


def _write_checkpoint(
    path: Path,
    config_hash: str,
    digest: str,
    cursor: date | None,
    region_map: RegionMap,
    city: CityModel | None,
    detector: DropDetector,
    reports: list[AnomalyReport],
) -> None:
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "config_hash": config_hash,
        "input_digest": digest,
        "day_cursor": cursor.isoformat() if cursor else None,
        "region": region_map.to_snapshot(),
        "city": city.to_snapshot() if city is not None else None,
        "evaluations": detector.to_snapshot(),
        "reports": [report_to_dict(r) for r in reports],
    }
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")), encoding="utf-8")
    tmp.replace(path)


def load_checkpoint(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise PersistenceError(f"cannot read checkpoint {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise PersistenceError(f"checkpoint {path} is corrupt: {exc}") from exc
    if not isinstance(doc, dict):
        raise PersistenceError(f"checkpoint {path} is not a JSON object")
    version = doc.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise PersistenceError(
            f"checkpoint {path} has format_version {version!r}; this build reads "
            f"version {CHECKPOINT_VERSION}"
        )
    required = ("config_hash", "input_digest", "day_cursor", "region", "city", "evaluations", "reports")
    missing = [key for key in required if key not in doc]
    if missing:
        raise PersistenceError(f"checkpoint {path} is missing fields: {missing}")
    return doc


def replay_day(config: PipelineConfig, checkpoint_path: str, day: date) -> tuple[dict, dict]:
    """Recompute one day's report from checkpoint state.

    Returns (report document, deviation GeoJSON). Exact agreement with the
    original run's report requires a checkpoint taken at that day's end;
    a later checkpoint explains against prototypes that have since moved.
    """
    config.validate()
    state = load_checkpoint(checkpoint_path)
    if state["config_hash"] != config.config_hash():
        raise ConfigError("checkpoint was produced under a different configuration")
    region_map = RegionMap.from_snapshot(state["region"])
    if state["city"] is None:
        raise ConfigError("checkpoint contains no city model; nothing to replay")
    city = CityModel.from_snapshot(state["city"])
    record = next((rec for rec in city.records if rec.day == day), None)
    if record is None:
        raise ConfigError(f"day {day.isoformat()} is not in the checkpoint's activity series")
    evaluation = next(
        (
            ev
            for ev in DropDetector.from_snapshot(config.policy, state["evaluations"]).evaluations
            if ev.day == day
        ),
        None,
    )
    converter, bbox, _ = _geo(config)
    report = explain(
        city,
        record,
        region_map,
        converter,
        baseline=evaluation.baseline if evaluation else None,
        threshold=evaluation.threshold if evaluation else None,
        top_k=config.top_regions,
    )
    partition = region_map.voronoi(bbox)
    return report_to_dict(report), export_deviation_map(report, partition, converter)
