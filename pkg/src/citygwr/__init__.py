"""citygwr: streaming grow-when-required networks for citywide patterns of life.

Two stacked online networks digest a GPS trip stream: the first partitions
the city from trajectory origins, the second learns prototype daily traffic
patterns over those regions and scores each day; sudden activity drops are
flagged and explained region by region.
"""

from .anomaly import (
    AnomalyPolicy,
    AnomalyReport,
    DayEvaluation,
    DropDetector,
    evaluate_day,
    explain,
    export_deviation_map,
)
from .citywide import CITY_PARAMS, ActivityRecord, CityModel
from .config import PipelineConfig, load_config_file
from .errors import (
    CityGwrError,
    ConfigError,
    DegeneratePartitionError,
    ExportError,
    InputError,
    PersistenceError,
    PipelineOrderError,
)
from .geo import BoundingBox, UtmConverter
from .gwr import (
    EVENT_INITIALIZING,
    EVENT_NEURON_CREATED,
    EVENT_WEIGHTS_UPDATED,
    GwrNetwork,
    GwrParams,
    StepOutcome,
    activity,
)
from .ingest import DayBatch, Diagnostic, RawTrip, Trajectory, parse_trips, stream_by_day, to_trajectory
from .pipeline import PipelineRun, replay_day, run
from .regions import LEVEL1_PARAMS, DailyDensityVector, RegionAssignment, RegionMap
from .voronoi import VoronoiCell, VoronoiPartition, build_partition

__version__ = "0.1.0"

__all__ = [
    "ActivityRecord",
    "AnomalyPolicy",
    "AnomalyReport",
    "BoundingBox",
    "CITY_PARAMS",
    "CityGwrError",
    "CityModel",
    "ConfigError",
    "DailyDensityVector",
    "DayBatch",
    "DayEvaluation",
    "DegeneratePartitionError",
    "Diagnostic",
    "DropDetector",
    "EVENT_INITIALIZING",
    "EVENT_NEURON_CREATED",
    "EVENT_WEIGHTS_UPDATED",
    "ExportError",
    "GwrNetwork",
    "GwrParams",
    "InputError",
    "LEVEL1_PARAMS",
    "PersistenceError",
    "PipelineConfig",
    "PipelineOrderError",
    "PipelineRun",
    "RawTrip",
    "RegionAssignment",
    "RegionMap",
    "StepOutcome",
    "Trajectory",
    "UtmConverter",
    "VoronoiCell",
    "VoronoiPartition",
    "activity",
    "build_partition",
    "evaluate_day",
    "explain",
    "export_deviation_map",
    "load_config_file",
    "parse_trips",
    "replay_day",
    "run",
    "stream_by_day",
    "to_trajectory",
    "__version__",
]
