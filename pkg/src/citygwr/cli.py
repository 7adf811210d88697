"""Command-line interface.

Subcommands:
    run              full pipeline over the configured inputs
    resume           continue a run from a checkpoint
    export-regions   write the region partition GeoJSON from a checkpoint
    export-activity  write the activity series CSV from a checkpoint
    export-anomalies write anomaly reports JSON + deviation GeoJSON from a checkpoint
    replay-day       recompute one day's report from a checkpoint
    validate-config  check a configuration and print its hash

Flags mirror the pipeline configuration; a TOML config file provides the
same keys and flags given on the command line win. CITYGWR_OUT_DIR
overrides the output directory. Exit codes: 0 success, 1 configuration
error, 2 I/O or persistence error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from datetime import date
from pathlib import Path

from . import pipeline
from .anomaly import AnomalyPolicy
from .citywide import CityModel
from .config import PipelineConfig, load_config_file
from .errors import CityGwrError, ConfigError, PersistenceError
from .exports import prototypes_document, write_activity_csv, write_json, write_reports_json
from .gwr import GwrParams
from .regions import RegionMap

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2

_GWR_FLAG_FIELDS = [
    ("activity-threshold", "activity_threshold", float),
    ("firing-threshold", "firing_threshold", float),
    ("lr-bmu", "lr_bmu", float),
    ("lr-neighbor", "lr_neighbor", float),
    ("habit-kappa", "habit_kappa", float),
    ("habit-tau-bmu", "habit_tau_bmu", float),
    ("habit-tau-neighbor", "habit_tau_neighbor", float),
    ("max-synapse-age", "max_synapse_age", int),
    ("neuron-death", "neuron_death_enabled", None),  # tri-state bool
    ("simultaneous-update", "simultaneous_update", None),
]

_POLICY_FLAG_FIELDS = [
    ("warmup-days", "warmup_days", int),
    ("window", "window", int),
    ("mad-multiplier", "mad_multiplier", float),
    ("min-history", "min_history", int),
]


def _bool_flag(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {value!r}")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML config file")
    parser.add_argument("--input", action="append", default=None, help="input CSV (repeatable)")
    parser.add_argument("--out-dir", default=None, help="output directory")
    parser.add_argument("--timezone", default=None)
    parser.add_argument("--utm-zone", type=int, default=None)
    parser.add_argument("--southern", action="store_true", default=None, help="southern hemisphere zone")
    parser.add_argument(
        "--bbox",
        nargs=4,
        type=float,
        metavar=("WEST", "SOUTH", "EAST", "NORTH"),
        default=None,
        help="bounding box in degrees",
    )
    parser.add_argument("--lateness-slack", type=int, default=None, help="seconds of reorder slack")
    parser.add_argument("--checkpoint-every", type=int, default=None, help="days between checkpoints")
    parser.add_argument("--top-regions", type=int, default=None, help="regions per anomaly report")
    for prefix in ("l1", "l2"):
        for flag, _, caster in _GWR_FLAG_FIELDS:
            if caster is None:
                parser.add_argument(f"--{prefix}-{flag}", type=_bool_flag, default=None)
            else:
                parser.add_argument(f"--{prefix}-{flag}", type=caster, default=None)
    for flag, _, caster in _POLICY_FLAG_FIELDS:
        parser.add_argument(f"--policy-{flag}", type=caster, default=None)


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    config = load_config_file(args.config) if args.config else PipelineConfig()
    updates = {}
    if args.input:
        updates["inputs"] = tuple(args.input)
    if args.out_dir is not None:
        updates["out_dir"] = args.out_dir
    if args.timezone is not None:
        updates["timezone"] = args.timezone
    if args.utm_zone is not None:
        updates["utm_zone"] = args.utm_zone
    if args.southern:
        updates["northern"] = False
    if args.bbox is not None:
        west, south, east, north = args.bbox
        updates.update(
            bbox_west=west, bbox_south=south, bbox_east=east, bbox_north=north
        )
    for key in ("lateness_slack", "checkpoint_every", "top_regions"):
        value = getattr(args, key)
        if value is not None:
            updates[key] = value
    config = replace(config, **updates)

    for prefix, attr in (("l1", "level1"), ("l2", "level2")):
        params: GwrParams = getattr(config, attr)
        overrides = {}
        for flag, fieldname, _ in _GWR_FLAG_FIELDS:
            value = getattr(args, f"{prefix}_{flag}".replace("-", "_"))
            if value is not None:
                overrides[fieldname] = value
        if overrides:
            config = replace(config, **{attr: replace(params, **overrides)})
    policy_overrides = {}
    for flag, fieldname, _ in _POLICY_FLAG_FIELDS:
        value = getattr(args, f"policy_{flag}".replace("-", "_"))
        if value is not None:
            policy_overrides[fieldname] = value
    if policy_overrides:
        config = replace(config, policy=replace(config.policy, **policy_overrides))

    env_out = os.environ.get("CITYGWR_OUT_DIR")
    if env_out:
        config = replace(config, out_dir=env_out)
    return config


def _restore(checkpoint_path: str, config: PipelineConfig):
    state = pipeline.load_checkpoint(checkpoint_path)
    if state["config_hash"] != config.config_hash():
        raise ConfigError("checkpoint was produced under a different configuration")
    region_map = RegionMap.from_snapshot(state["region"])
    city = CityModel.from_snapshot(state["city"]) if state["city"] is not None else None
    return state, region_map, city


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="citygwr", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the full pipeline")
    _add_config_flags(p_run)

    p_resume = sub.add_parser("resume", help="resume from a checkpoint")
    _add_config_flags(p_resume)
    p_resume.add_argument("--checkpoint", required=True)

    for name, help_text in (
        ("export-regions", "write regions.geojson from a checkpoint"),
        ("export-activity", "write activity.csv from a checkpoint"),
        ("export-anomalies", "write anomaly reports and deviation maps from a checkpoint"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_config_flags(p)
        p.add_argument("--checkpoint", required=True)

    p_replay = sub.add_parser("replay-day", help="recompute one day's report from a checkpoint")
    _add_config_flags(p_replay)
    p_replay.add_argument("--checkpoint", required=True)
    p_replay.add_argument("--day", required=True, help="ISO date, e.g. 2014-06-01")

    p_validate = sub.add_parser("validate-config", help="validate configuration and print its hash")
    _add_config_flags(p_validate)

    args = parser.parse_args(argv)

    try:
        config = _config_from_args(args)
        return _dispatch(args, config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PersistenceError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CityGwrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def _dispatch(args: argparse.Namespace, config: PipelineConfig) -> int:
    command = args.command

    if command == "validate-config":
        config.validate()
        print(f"configuration ok; hash {config.config_hash()}")
        return EXIT_OK

    if command in ("run", "resume"):
        if not config.inputs:
            raise ConfigError("no inputs configured; pass --input or set inputs in the config file")
        checkpoint = getattr(args, "checkpoint", None)
        result = pipeline.run(config, resume_from=checkpoint)
        counts = result.manifest["counts"]
        print(
            f"processed {counts['trips_accepted']} trips over {counts['days_observed']} days: "
            f"{counts['regions']} regions, {counts['prototypes']} prototypes, "
            f"{counts['flagged_days']} flagged days -> {config.out_dir}"
        )
        return EXIT_OK

    config.validate()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if command == "export-regions":
        _, region_map, _ = _restore(args.checkpoint, config)
        converter, bbox, _ = pipeline._geo(config)
        write_json(out_dir / "regions.geojson", region_map.export_geojson(bbox, converter))
        print(out_dir / "regions.geojson")
        return EXIT_OK

    if command == "export-activity":
        _, _, city = _restore(args.checkpoint, config)
        write_activity_csv(out_dir / "activity.csv", city.records if city else [])
        print(out_dir / "activity.csv")
        return EXIT_OK

    if command == "export-anomalies":
        state, region_map, city = _restore(args.checkpoint, config)
        from .anomaly import export_deviation_map, report_from_dict

        reports = [report_from_dict(doc) for doc in state["reports"]]
        write_reports_json(out_dir / "anomalies.json", reports)
        print(out_dir / "anomalies.json")
        if reports and region_map.region_count >= 2:
            converter, bbox, _ = pipeline._geo(config)
            partition = region_map.voronoi(bbox)
            dev_dir = out_dir / "anomalies"
            dev_dir.mkdir(exist_ok=True)
            for report in reports:
                doc = export_deviation_map(report, partition, converter)
                path = dev_dir / f"deviation_{report.day.isoformat()}.geojson"
                write_json(path, doc)
                print(path)
        if city is not None:
            write_json(out_dir / "prototypes.json", prototypes_document(city, region_map))
        return EXIT_OK

    if command == "replay-day":
        try:
            day = date.fromisoformat(args.day)
        except ValueError as exc:
            raise ConfigError(f"--day must be an ISO date: {exc}") from exc
        report_doc, deviation_doc = pipeline.replay_day(config, args.checkpoint, day)
        report_path = out_dir / f"replay_{day.isoformat()}_report.json"
        map_path = out_dir / f"replay_{day.isoformat()}_deviation.geojson"
        write_json(report_path, report_doc)
        write_json(map_path, deviation_doc)
        print(report_path)
        print(map_path)
        return EXIT_OK

    raise ConfigError(f"unknown command {command!r}")


if __name__ == "__main__":
    sys.exit(main())
