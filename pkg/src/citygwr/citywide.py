"""Second-level network over daily density vectors: prototype traffic days.

Each non-empty day contributes one input vector (the share of trips per
region) and yields one activity score; the neuron weights are the learned
prototype citywide patterns. The input dimension grows in lockstep with
region creation on the first level: a new region appends a zero to every
stored prototype, because traffic in a region that did not exist yet is
zero by definition.

On this level the activity threshold is 1, so the activity gate is vacuous
and neurogenesis is governed by habituation alone. Neuron death stays
enabled: a prototype pattern that stops matching anything may disappear.
Prototype weights are NOT re-normalized onto the simplex after updates;
consumers treat them as unnormalized density estimates.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date

import numpy as np

from .errors import PipelineOrderError
from .gwr import (
    EVENT_INITIALIZING,
    EVENT_NEURON_CREATED,
    GwrNetwork,
    GwrParams,
)
from .regions import DailyDensityVector

__all__ = ["ActivityRecord", "CITY_PARAMS", "CityModel"]

# Daily-pattern defaults: fast habituation (few inputs per year), activity
# gate disabled, neuron death allowed.
CITY_PARAMS = GwrParams(
    activity_threshold=1.0,
    firing_threshold=0.1,
    lr_bmu=0.5,
    lr_neighbor=0.005,
    habit_kappa=1.05,
    habit_tau_bmu=0.3,
    habit_tau_neighbor=0.1,
    max_synapse_age=200,
    neuron_death_enabled=True,
)

EVENT_SEEDED = "seeded"
EVENT_UPDATED = "updated"
EVENT_CREATED = "created"


@dataclass(frozen=True)
class ActivityRecord:
    """One day's match against the prototype set.

    ``densities`` retains the day's input vector (at the dimension it had
    that day) so a flagged day can be explained later. Seed days carry
    activity 1.0 / distance 0.0 against the prototype they became.
    """

    day: date
    activity: float
    bmu_id: int
    distance: float
    event: str
    trip_count: int
    densities: np.ndarray


class CityModel:
    def __init__(self, region_count: int, params: GwrParams = CITY_PARAMS):
        self.net = GwrNetwork(params, input_dim=region_count)
        self.records: list[ActivityRecord] = []

    @property
    def prototype_count(self) -> int:
        return self.net.neuron_count

    def on_region_created(self, region_id: int | None = None) -> None:
        """Grow the input dimension after a region creation on level one."""
        self.net.grow_input_dim()

    def observe_day(self, density: DailyDensityVector) -> ActivityRecord:
        """Train on one day's density vector and append an activity record."""
        if len(density.densities) != self.net.input_dim:
            raise PipelineOrderError(
                f"day {density.day} has {len(density.densities)} region densities but the "
                f"model expects {self.net.input_dim}; region growth must be applied before "
                "the day is observed"
            )
        outcome = self.net.train_step(density.densities)
        if outcome.event == EVENT_INITIALIZING:
            event = EVENT_SEEDED
        elif outcome.event == EVENT_NEURON_CREATED:
            event = EVENT_CREATED
        else:
            event = EVENT_UPDATED
        record = ActivityRecord(
            day=density.day,
            activity=outcome.activity,
            bmu_id=outcome.bmu_id,
            distance=outcome.distance,
            event=event,
            trip_count=density.trip_count,
            densities=np.asarray(density.densities, dtype=np.float64).copy(),
        )
        self.records.append(record)
        return record

    def prototypes(self) -> list[tuple[int, np.ndarray, float]]:
        """Read-only (id, weight vector, habituation) view, id ascending."""
        weights = self.net.weights_matrix()
        etas = self.net.habituations()
        return [
            (nid, weights[row], float(etas[row])) for row, nid in enumerate(self.net.ids)
        ]

    # ------------------------------------------------------------------

    def to_snapshot(self) -> dict:
        return {
            "net": self.net.to_snapshot(),
            "records": [
                {
                    "day": rec.day.isoformat(),
                    "activity": rec.activity,
                    "bmu_id": rec.bmu_id,
                    "distance": rec.distance,
                    "event": rec.event,
                    "trip_count": rec.trip_count,
                    "densities": [float(v) for v in rec.densities],
                }
                for rec in self.records
            ],
        }

    @classmethod
    def from_snapshot(cls, doc: dict) -> "CityModel":
        model = cls.__new__(cls)
        model.net = GwrNetwork.from_snapshot(doc["net"])
        model.records = [
            ActivityRecord(
                day=date.fromisoformat(rec["day"]),
                activity=float(rec["activity"]),
                bmu_id=int(rec["bmu_id"]),
                distance=float(rec["distance"]),
                event=str(rec["event"]),
                trip_count=int(rec["trip_count"]),
                densities=np.asarray(rec["densities"], dtype=np.float64),
            )
            for rec in doc["records"]
        ]
        return model
