"""Pipeline configuration: defaults, TOML loading, CLI overlay, hashing."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .anomaly import AnomalyPolicy
from .citywide import CITY_PARAMS
from .errors import ConfigError
from .gwr import GwrParams
from .regions import LEVEL1_PARAMS

__all__ = ["PipelineConfig", "load_config_file"]

# Greater Porto in degrees, generous enough for the surrounding area while
# still rejecting the dataset's far-out GPS noise.
DEFAULT_BBOX = (-8.80, 40.90, -8.30, 41.45)  # west, south, east, north


@dataclass(frozen=True)
class PipelineConfig:
    inputs: tuple[str, ...] = ()
    out_dir: str = "out"
    timezone: str = "Europe/Lisbon"
    utm_zone: int = 29
    northern: bool = True
    bbox_west: float = DEFAULT_BBOX[0]
    bbox_south: float = DEFAULT_BBOX[1]
    bbox_east: float = DEFAULT_BBOX[2]
    bbox_north: float = DEFAULT_BBOX[3]
    lateness_slack: int = 86400
    checkpoint_every: int = 0  # days between checkpoints; 0 = final only
    top_regions: int = 5
    level1: GwrParams = field(default_factory=lambda: LEVEL1_PARAMS)
    level2: GwrParams = field(default_factory=lambda: CITY_PARAMS)
    policy: AnomalyPolicy = field(default_factory=AnomalyPolicy)

    def validate(self) -> None:
        self.level1.validate()
        self.level2.validate()
        self.policy.validate()
        if self.level1.neuron_death_enabled:
            raise ConfigError("level1.neuron_death_enabled must be false (regions may not die)")
        if not (1 <= self.utm_zone <= 60):
            raise ConfigError(f"utm_zone must be in [1, 60], got {self.utm_zone}")
        if not (self.bbox_west < self.bbox_east and self.bbox_south < self.bbox_north):
            raise ConfigError("bounding box is degenerate (west < east and south < north required)")
        if self.lateness_slack < 0:
            raise ConfigError(f"lateness_slack must be >= 0, got {self.lateness_slack}")
        if self.checkpoint_every < 0:
            raise ConfigError(f"checkpoint_every must be >= 0, got {self.checkpoint_every}")
        if self.top_regions < 1:
            raise ConfigError(f"top_regions must be >= 1, got {self.top_regions}")
        try:
            ZoneInfo(self.timezone)
        except (ZoneInfoNotFoundError, ValueError) as exc:
            raise ConfigError(f"unknown timezone {self.timezone!r}") from exc

    def semantic_dict(self) -> dict:
        """Everything that affects computed results.

        Paths and checkpoint cadence are excluded: they change where bytes
        go or how often state is persisted, never the results themselves.
        """
        doc = asdict(self)
        doc.pop("inputs")
        doc.pop("out_dir")
        doc.pop("checkpoint_every")
        return doc

    def config_hash(self) -> str:
        payload = json.dumps(self.semantic_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()


_TOP_LEVEL_KEYS = {
    "inputs",
    "out_dir",
    "timezone",
    "utm_zone",
    "northern",
    "lateness_slack",
    "checkpoint_every",
    "top_regions",
}
_BBOX_KEYS = {"west", "south", "east", "north"}


def load_config_file(path: str) -> PipelineConfig:
    """Build a PipelineConfig from a TOML file.

    Layout: scalar keys at the top level or under [pipeline]; [bbox] with
    west/south/east/north; [level1], [level2] and [policy] tables whose keys
    are the corresponding dataclass fields. Unknown keys are errors so typos
    do not silently fall back to defaults.
    """
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}") from exc

    config = PipelineConfig()
    tables = {k: v for k, v in doc.items() if isinstance(v, dict)}
    scalars = {k: v for k, v in doc.items() if not isinstance(v, dict)}
    scalars.update(tables.pop("pipeline", {}))

    unknown = set(scalars) - _TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "inputs" in scalars:
        inputs = scalars.pop("inputs")
        if isinstance(inputs, str):
            inputs = [inputs]
        config = replace(config, inputs=tuple(str(p) for p in inputs))
    config = replace(config, **scalars)

    if "bbox" in tables:
        bbox = tables.pop("bbox")
        unknown = set(bbox) - _BBOX_KEYS
        if unknown:
            raise ConfigError(f"unknown [bbox] keys: {sorted(unknown)}")
        config = replace(
            config,
            **{f"bbox_{k}": float(v) for k, v in bbox.items()},
        )
    for table, attr in (("level1", "level1"), ("level2", "level2")):
        if table in tables:
            config = replace(
                config, **{attr: _merge_params(getattr(config, attr), tables.pop(table), table)}
            )
    if "policy" in tables:
        policy_doc = tables.pop("policy")
        valid = set(AnomalyPolicy.__dataclass_fields__)
        unknown = set(policy_doc) - valid
        if unknown:
            raise ConfigError(f"unknown [policy] keys: {sorted(unknown)}")
        config = replace(config, policy=replace(config.policy, **policy_doc))
    if tables:
        raise ConfigError(f"unknown config tables: {sorted(tables)}")
    return config


def _merge_params(base: GwrParams, doc: dict, table: str) -> GwrParams:
    valid = set(GwrParams.__dataclass_fields__)
    unknown = set(doc) - valid
    if unknown:
        raise ConfigError(f"unknown [{table}] keys: {sorted(unknown)}")
    return replace(base, **doc)
