"""First-level network over trajectory origins: the learned city partition.

Every trajectory origin is one training input; the network's neurons are
the city's region generators and their receptive fields (Voronoi cells)
are the regions. Region ids are the neuron ids: insertion-ordered, stable,
and never reused, because neuron death stays disabled on this level - a
removed region would delete a coordinate the daily-pattern level depends
on. Listeners are notified whenever a region is created so the next level
can grow its input dimension in lockstep.
"""

from __future__ import annotations

import math

from dataclasses import dataclass
from datetime import date
from typing import Callable

import numpy as np

from .errors import ConfigError, InputError
from .geo import BoundingBox, UtmConverter
from .gwr import EVENT_NEURON_CREATED, GwrNetwork, GwrParams
from .ingest import Trajectory
from .voronoi import VoronoiPartition, build_partition

__all__ = ["DailyDensityVector", "LEVEL1_PARAMS", "RegionAssignment", "RegionMap"]

# Origin-level defaults; habituation is slow because the trip stream is huge,
# and neuron death must stay off (see module docstring).
LEVEL1_PARAMS = GwrParams(neuron_death_enabled=False)


@dataclass(frozen=True)
class RegionAssignment:
    trip_id: str
    region_id: int
    distance: float  # squared km to the matched generator
    activity: float


@dataclass(frozen=True)
class DailyDensityVector:
    """Share of one day's trips originating in each region.

    ``densities[k]`` belongs to ``region_ids[k]``; entries are >= 0 and sum
    to exactly 1.0.
    """

    day: date
    densities: np.ndarray
    region_ids: tuple[int, ...]
    trip_count: int


class RegionMap:
    def __init__(self, params: GwrParams = LEVEL1_PARAMS):
        if params.neuron_death_enabled:
            raise ConfigError("region level requires neuron_death_enabled=False")
        self.net = GwrNetwork(params, input_dim=2)
        self.creation_log: list[tuple[int, int]] = []  # (step_count, region_id) at neurogenesis
        self.created_at: dict[int, int] = {}  # every region incl. seeds -> step created
        self._listeners: list[Callable[[int], None]] = []

    # ------------------------------------------------------------------

    @property
    def region_count(self) -> int:
        return self.net.neuron_count

    def region_ids(self) -> tuple[int, ...]:
        return self.net.ids

    def add_region_listener(self, listener: Callable[[int], None]) -> None:
        """Register a callback fired with the new region id on every creation."""
        self._listeners.append(listener)

    # ------------------------------------------------------------------

    def observe_origin(self, traj: Trajectory | tuple[float, float], trip_id: str = "") -> tuple[RegionAssignment, int | None]:
        """Train on one origin point; returns (assignment, created_region_id | None).

        The assignment names the best-matching region at match time; on a
        neurogenesis step that is still the pre-existing best match, not the
        new region. Seed inputs are assigned to the seed region they become.
        """
        if isinstance(traj, Trajectory):
            x = traj.origin
            trip_id = traj.trip_id
        else:
            x = traj
        outcome = self.net.train_step(x)
        created = None
        if outcome.event == EVENT_NEURON_CREATED:
            created = outcome.new_id
            self.creation_log.append((self.net.step_count, created))
            self.created_at[created] = self.net.step_count
            for listener in self._listeners:
                listener(created)
        elif outcome.new_id is not None:  # seed neuron
            self.created_at[outcome.new_id] = self.net.step_count
        assignment = RegionAssignment(
            trip_id=trip_id,
            region_id=outcome.bmu_id,
            distance=outcome.distance,
            activity=outcome.activity,
        )
        return assignment, created

    def density_vector(self, day: date, assignments: list[RegionAssignment]) -> DailyDensityVector:
        """Trip share per region for one day, over the current region set.

        A region created mid-day only reflects assignments made after its
        creation; earlier trips already counted toward the regions that
        existed when they arrived. The float entries are corrected so they
        sum to exactly 1.0 (residual folded into the largest entry).
        """
        if not assignments:
            raise InputError(f"empty day {day}: no assignments to aggregate")
        ids = self.net.ids
        index = {rid: k for k, rid in enumerate(ids)}
        counts = np.zeros(len(ids), dtype=np.int64)
        for a in assignments:
            try:
                counts[index[a.region_id]] += 1
            except KeyError:
                raise InputError(f"assignment references unknown region {a.region_id}") from None
        total = int(counts.sum())
        densities = counts / float(total)
        _correct_to_unit_sum(densities, counts)
        return DailyDensityVector(
            day=day, densities=densities, region_ids=ids, trip_count=total
        )

    # ------------------------------------------------------------------

    def voronoi(self, bbox: BoundingBox) -> VoronoiPartition:
        """Receptive fields of the current regions, clipped to the box."""
        if not self.net.seeded:
            raise InputError("cannot partition: fewer than 2 regions")
        weights = self.net.weights_matrix()
        generators = [
            (rid, (float(weights[k, 0]), float(weights[k, 1])))
            for k, rid in enumerate(self.net.ids)
        ]
        return build_partition(generators, bbox)

    def export_geojson(self, bbox: BoundingBox, converter: UtmConverter) -> dict:
        """The partition as a WGS84 FeatureCollection, one polygon per region."""
        partition = self.voronoi(bbox)
        features = []
        for cell in partition.cells:
            lons, lats = converter.km_to_lonlat(cell.vertices[:, 0], cell.vertices[:, 1])
            ring = [[float(lon), float(lat)] for lon, lat in zip(lons, lats)]
            ring.append(ring[0])
            features.append(
                {
                    "type": "Feature",
                    "geometry": {"type": "Polygon", "coordinates": [ring]},
                    "properties": {
                        "region_id": cell.region_id,
                        "generator_km": [cell.generator[0], cell.generator[1]],
                        "habituation": self.net.habituation(cell.region_id),
                        "created_step": self.created_at.get(cell.region_id),
                    },
                }
            )
        return {"type": "FeatureCollection", "features": features}

    # ------------------------------------------------------------------

    def to_snapshot(self) -> dict:
        return {
            "net": self.net.to_snapshot(),
            "creation_log": [[step, rid] for step, rid in self.creation_log],
            "created_at": {str(rid): step for rid, step in sorted(self.created_at.items())},
        }

    @classmethod
    def from_snapshot(cls, doc: dict) -> "RegionMap":
        net = GwrNetwork.from_snapshot(doc["net"])
        model = cls.__new__(cls)
        model.net = net
        model.creation_log = [(int(s), int(r)) for s, r in doc["creation_log"]]
        model.created_at = {int(rid): int(step) for rid, step in doc["created_at"].items()}
        model._listeners = []
        return model


def _correct_to_unit_sum(densities: np.ndarray, counts: np.ndarray) -> None:
    # count/total rounding can leave the sum an ulp off 1. Coarse step:
    # rebuild the largest entry as 1 - fsum(rest), leaving the exact sum
    # within half an ulp of 1. That can still round to the float just below
    # 1 (the spacing halves there), so finish with a fix-up on the smallest
    # nonzero entry, whose granularity is far finer than the residual.
    j = int(np.argmax(counts))
    rest = math.fsum(v for k, v in enumerate(densities) if k != j)
    densities[j] = 1.0 - rest
    nonzero = np.nonzero(counts)[0]
    k = int(nonzero[np.argmin(counts[nonzero])])
    for _ in range(32):
        s = math.fsum(densities)
        if s == 1.0:
            return
        densities[k] += 1.0 - s
