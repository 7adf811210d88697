import json
import os
import subprocess
import sys
from dataclasses import replace
from datetime import date
from pathlib import Path

import pytest

import synthcity
from citygwr import cli, pipeline
from citygwr.config import PipelineConfig, load_config_file
from citygwr.errors import ConfigError, PersistenceError


@pytest.fixture(scope="module")
def fixture_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "synth.csv"
    synthcity.write_csv(path)
    return path


@pytest.fixture(scope="module")
def baseline_run(fixture_csv, tmp_path_factory):
    out = tmp_path_factory.mktemp("baseline")
    config = synthcity.fixture_config(fixture_csv, out)
    return pipeline.run(config), config, out


OUTPUT_FILES = [
    "manifest.json",
    "activity.csv",
    "flags.csv",
    "anomalies.json",
    "prototypes.json",
    "regions.geojson",
    "diagnostics.jsonl",
    "checkpoint.json",
]


def read_outputs(out_dir: Path) -> dict:
    blobs = {}
    for name in OUTPUT_FILES:
        blobs[name] = (out_dir / name).read_bytes()
    for path in sorted((out_dir / "anomalies").glob("*.geojson")):
        blobs[f"anomalies/{path.name}"] = path.read_bytes()
    return blobs


def test_run_produces_all_outputs(baseline_run):
    result, config, out = baseline_run
    for name in OUTPUT_FILES:
        assert (out / name).exists(), name
    assert result.manifest["counts"]["days_observed"] == synthcity.N_DAYS
    assert result.manifest["counts"]["trips_parsed"] == synthcity.N_DAYS * synthcity.TRIPS_PER_DAY
    assert result.manifest["counts"]["flagged_days"] == 3
    assert result.manifest["data_start_day"] == synthcity.START_DAY.isoformat()


def test_activity_csv_one_row_per_day(baseline_run):
    _, _, out = baseline_run
    lines = (out / "activity.csv").read_text().strip().splitlines()
    assert lines[0] == "date,activity,bmu_id,trip_count,event"
    assert len(lines) == 1 + synthcity.N_DAYS


def test_manifest_embeds_digests(baseline_run):
    result, config, out = baseline_run
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config_hash"] == config.config_hash()
    assert manifest["input_digest"] == pipeline.input_digest(config.inputs)


def test_two_runs_byte_identical(fixture_csv, tmp_path, baseline_run):
    _, config, out_a = baseline_run
    config_b = replace(config, out_dir=str(tmp_path / "again"))
    pipeline.run(config_b)
    a = read_outputs(out_a)
    b = read_outputs(Path(config_b.out_dir))
    assert a.keys() == b.keys()
    for name in a:
        assert a[name] == b[name], f"{name} differs between runs"


def test_config_hash_ignores_paths_only(fixture_csv, tmp_path):
    config = synthcity.fixture_config(fixture_csv, tmp_path / "x")
    moved = replace(config, out_dir=str(tmp_path / "y"), inputs=("elsewhere.csv",))
    assert config.config_hash() == moved.config_hash()
    tweaked = replace(config, level1=replace(config.level1, lr_bmu=0.4))
    assert config.config_hash() != tweaked.config_hash()


def test_resume_reproduces_uninterrupted_run(fixture_csv, tmp_path, monkeypatch, baseline_run):
    _, config, out_full = baseline_run
    # simulate a process dying right after its second cadence checkpoint
    out_part = tmp_path / "part"
    config_part = replace(config, out_dir=str(out_part), checkpoint_every=10)
    real_write = pipeline._write_checkpoint
    cadence_writes = []

    def dying_write(path, *args, **kwargs):
        real_write(path, *args, **kwargs)
        cadence_writes.append(path)
        if len(cadence_writes) == 2:  # dies with the day-20 state on disk
            raise KeyboardInterrupt

    monkeypatch.setattr(pipeline, "_write_checkpoint", dying_write)
    with pytest.raises(KeyboardInterrupt):
        pipeline.run(config_part)
    monkeypatch.setattr(pipeline, "_write_checkpoint", real_write)

    checkpoint = out_part / "checkpoint.json"
    assert checkpoint.exists()
    mid = pipeline.load_checkpoint(str(checkpoint))
    assert mid["day_cursor"] < synthcity.surge_days_dates()[0].isoformat()

    out_resumed = tmp_path / "resumed"
    config_resumed = replace(config, out_dir=str(out_resumed))
    pipeline.run(config_resumed, resume_from=str(checkpoint))
    a = read_outputs(Path(config.out_dir))
    b = read_outputs(out_resumed)
    for name in a:
        assert a[name] == b[name], f"{name} differs after resume"


def test_resume_with_different_input_refused(fixture_csv, tmp_path, baseline_run):
    _, config, _ = baseline_run
    checkpoint = Path(config.out_dir) / "checkpoint.json"
    other_csv = tmp_path / "other.csv"
    synthcity.write_csv(other_csv, seed=5)
    altered = replace(config, inputs=(str(other_csv),), out_dir=str(tmp_path / "o"))
    with pytest.raises(ConfigError, match="different input"):
        pipeline.run(altered, resume_from=str(checkpoint))


def test_resume_with_altered_params_refused(fixture_csv, tmp_path, baseline_run):
    _, config, out_full = baseline_run
    checkpoint = Path(config.out_dir) / "checkpoint.json"
    altered = replace(
        config,
        out_dir=str(tmp_path / "altered"),
        level1=replace(config.level1, habit_tau_bmu=0.2),
    )
    with pytest.raises(ConfigError, match="different configuration"):
        pipeline.run(altered, resume_from=str(checkpoint))


def test_resume_from_corrupt_checkpoint(fixture_csv, tmp_path, baseline_run):
    _, config, _ = baseline_run
    bad = tmp_path / "bad.json"
    bad.write_bytes(b'{"format_version": 1, "config_h')
    out = tmp_path / "out_corrupt"
    broken = replace(config, out_dir=str(out))
    with pytest.raises(PersistenceError):
        pipeline.run(broken, resume_from=str(bad))
    assert not (out / "manifest.json").exists()  # nothing was overwritten


def test_resume_version_mismatch_refused(tmp_path, baseline_run):
    _, config, _ = baseline_run
    doc = json.loads((Path(config.out_dir) / "checkpoint.json").read_text())
    doc["format_version"] = 99
    bad = tmp_path / "v99.json"
    bad.write_text(json.dumps(doc))
    with pytest.raises(PersistenceError, match="format_version"):
        pipeline.load_checkpoint(str(bad))


def test_replay_day_matches_run_report(fixture_csv, tmp_path, baseline_run):
    result, config, out = baseline_run
    # checkpoint at every day so the surge day's state is exactly replayable
    config_c = replace(config, out_dir=str(tmp_path / "c"), checkpoint_every=48)
    pipeline.run(config_c)
    flag_day = result.reports[0].day
    report_doc, deviation_doc = pipeline.replay_day(
        config, str(out / "checkpoint.json"), flag_day
    )
    assert report_doc["day"] == flag_day.isoformat()
    assert deviation_doc["type"] == "FeatureCollection"
    # replay from the final checkpoint reproduces the stored observed vector
    stored = json.loads((out / "anomalies.json").read_text())["reports"][0]
    assert report_doc["observed"][: len(stored["observed"])] == stored["observed"]


def test_replay_day_unknown_date(baseline_run):
    _, config, out = baseline_run
    with pytest.raises(ConfigError, match="not in the checkpoint"):
        pipeline.replay_day(config, str(out / "checkpoint.json"), date(1999, 1, 1))


# ----------------------------------------------------------------------
# config file + CLI
# ----------------------------------------------------------------------


def write_fixture_toml(path, csv_path, out_dir):
    level1 = synthcity.FIXTURE_LEVEL1
    path.write_text(
        f"""
inputs = ["{csv_path}"]
out_dir = "{out_dir}"
timezone = "UTC"
utm_zone = 29
lateness_slack = 3600

[bbox]
west = -8.95
south = 40.95
east = -8.30
north = 41.40

[level1]
lr_neighbor = {level1.lr_neighbor}
habit_tau_bmu = {level1.habit_tau_bmu}
habit_tau_neighbor = {level1.habit_tau_neighbor}
neuron_death_enabled = false
"""
    )


def test_config_file_round_trip(fixture_csv, tmp_path):
    toml_path = tmp_path / "conf.toml"
    write_fixture_toml(toml_path, fixture_csv, tmp_path / "out")
    config = load_config_file(str(toml_path))
    assert config.inputs == (str(fixture_csv),)
    assert config.level1.habit_tau_bmu == synthcity.FIXTURE_LEVEL1.habit_tau_bmu
    assert config.level1.lr_neighbor == synthcity.FIXTURE_LEVEL1.lr_neighbor
    assert config.timezone == "UTC"
    expected = synthcity.fixture_config(fixture_csv, tmp_path / "out")
    assert config.config_hash() == expected.config_hash()


def test_config_file_unknown_key_rejected(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text('inputs = ["x.csv"]\nnot_a_key = 3\n')
    with pytest.raises(ConfigError, match="not_a_key"):
        load_config_file(str(bad))


def test_cli_validate_config(fixture_csv, tmp_path, capsys):
    toml_path = tmp_path / "conf.toml"
    write_fixture_toml(toml_path, fixture_csv, tmp_path / "out")
    rc = cli.main(["validate-config", "--config", str(toml_path)])
    assert rc == 0
    assert "configuration ok" in capsys.readouterr().out


def test_cli_validate_config_bad_exit_code(tmp_path, capsys):
    rc = cli.main(["validate-config", "--l1-habit-kappa", "0.5"])
    assert rc == cli.EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_cli_run_and_exports(fixture_csv, tmp_path, capsys):
    toml_path = tmp_path / "conf.toml"
    out_dir = tmp_path / "cli_out"
    write_fixture_toml(toml_path, fixture_csv, out_dir)
    rc = cli.main(["run", "--config", str(toml_path)])
    assert rc == 0
    assert (out_dir / "manifest.json").exists()
    captured = capsys.readouterr().out
    assert "3 flagged days" in captured

    export_dir = tmp_path / "exports"
    for command in ("export-regions", "export-activity", "export-anomalies"):
        rc = cli.main(
            [
                command,
                "--config",
                str(toml_path),
                "--out-dir",
                str(export_dir),
                "--checkpoint",
                str(out_dir / "checkpoint.json"),
            ]
        )
        assert rc == 0, command
    assert (export_dir / "regions.geojson").exists()
    assert (export_dir / "activity.csv").exists()
    assert (export_dir / "anomalies.json").exists()
    assert (export_dir / "activity.csv").read_bytes() == (out_dir / "activity.csv").read_bytes()

    rc = cli.main(
        [
            "replay-day",
            "--config",
            str(toml_path),
            "--out-dir",
            str(export_dir),
            "--checkpoint",
            str(out_dir / "checkpoint.json"),
            "--day",
            synthcity.surge_days_dates()[0].isoformat(),
        ]
    )
    assert rc == 0
    assert (export_dir / f"replay_{synthcity.surge_days_dates()[0]}_report.json").exists()


def test_cli_missing_input_is_config_error(capsys):
    rc = cli.main(["run"])
    assert rc == cli.EXIT_CONFIG


def test_cli_missing_checkpoint_is_io_error(fixture_csv, tmp_path, capsys):
    toml_path = tmp_path / "conf.toml"
    write_fixture_toml(toml_path, fixture_csv, tmp_path / "out")
    rc = cli.main(
        [
            "export-activity",
            "--config",
            str(toml_path),
            "--checkpoint",
            str(tmp_path / "nope.json"),
        ]
    )
    assert rc == cli.EXIT_IO


def test_cli_env_var_overrides_out_dir(fixture_csv, tmp_path, monkeypatch, capsys):
    toml_path = tmp_path / "conf.toml"
    write_fixture_toml(toml_path, fixture_csv, tmp_path / "ignored")
    env_out = tmp_path / "env_out"
    monkeypatch.setenv("CITYGWR_OUT_DIR", str(env_out))
    rc = cli.main(["run", "--config", str(toml_path)])
    assert rc == 0
    assert (env_out / "manifest.json").exists()
    assert not (tmp_path / "ignored" / "manifest.json").exists()


def test_cli_entrypoint_subprocess(fixture_csv, tmp_path):
    toml_path = tmp_path / "conf.toml"
    write_fixture_toml(toml_path, fixture_csv, tmp_path / "sub_out")
    proc = subprocess.run(
        [sys.executable, "-m", "citygwr.cli", "validate-config", "--config", str(toml_path)],
        capture_output=True,
        text=True,
        env=dict(os.environ),
    )
    assert proc.returncode == 0, proc.stderr
    assert "configuration ok" in proc.stdout
