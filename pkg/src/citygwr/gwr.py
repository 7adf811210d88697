"""Dimension-generic grow-when-required (GWR) network.

A GWR network is an online clustering of a vector stream: an ordered set of
neurons (weight vector + habituation counter) joined by an aged, undirected
synapse graph. Each input is matched to its best and second-best neurons;
depending on how well the best one reconstructs the input and how much
training it has already absorbed, the step either nudges weights toward the
input or inserts a new neuron between the input and the best match. Synapses
age out and, optionally, neurons that lose all synapses die.

Conventions fixed here and relied on everywhere else:

* distances are squared Euclidean; the activity score is exp(-distance)
* tie-breaking in the match scan is by lowest neuron id
* the first two distinct inputs seed the network verbatim
* co-activation sets a synapse age to 1; aging increments by 1; pruning
  removes ages strictly greater than ``max_synapse_age``
* habituation is updated before the weight step by default (the fresh value
  throttles the weight update); ``simultaneous_update`` restores the variant
  where the weight step sees the pre-update habituation
* habituation is clamped to ``[1 - 1/kappa, 1]``, the reachable range of the
  update rule, to absorb float rounding

The network is single-writer: ``train_step`` mutates under exclusive access,
snapshots are plain values safe to hand elsewhere.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, InputError, PersistenceError
from .kernels import bmu_pair_scan

__all__ = [
    "EVENT_INITIALIZING",
    "EVENT_NEURON_CREATED",
    "EVENT_WEIGHTS_UPDATED",
    "GwrNetwork",
    "GwrParams",
    "StepOutcome",
    "activity",
]

EVENT_INITIALIZING = "initializing"
EVENT_WEIGHTS_UPDATED = "weights_updated"
EVENT_NEURON_CREATED = "neuron_created"

SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class GwrParams:
    """Hyperparameters of one GWR network.

    Defaults are the origin-point (region level) values; see
    ``citywide.CITY_PARAMS`` for the daily-pattern level.
    """

    activity_threshold: float = math.exp(-1.0)
    firing_threshold: float = 0.1
    lr_bmu: float = 0.5
    lr_neighbor: float = 0.005
    habit_kappa: float = 1.05
    habit_tau_bmu: float = 0.0133
    habit_tau_neighbor: float = 0.00133
    max_synapse_age: int = 200
    neuron_death_enabled: bool = True
    simultaneous_update: bool = False

    def validate(self) -> None:
        """Raise ConfigError naming the first violated constraint."""
        p = self
        if not (0.0 < p.activity_threshold <= 1.0):
            raise ConfigError(f"activity_threshold must be in (0, 1], got {p.activity_threshold}")
        if not (0.0 < p.firing_threshold < 1.0):
            raise ConfigError(f"firing_threshold must be in (0, 1), got {p.firing_threshold}")
        if not (0.0 < p.lr_bmu <= 1.0):
            raise ConfigError(f"lr_bmu must be in (0, 1], got {p.lr_bmu}")
        if not (0.0 < p.lr_neighbor <= 1.0):
            raise ConfigError(f"lr_neighbor must be in (0, 1], got {p.lr_neighbor}")
        if p.lr_neighbor > p.lr_bmu:
            raise ConfigError(
                f"lr_neighbor must not exceed lr_bmu ({p.lr_neighbor} > {p.lr_bmu})"
            )
        if not p.habit_kappa > 1.0:
            raise ConfigError(f"habit_kappa must be > 1, got {p.habit_kappa}")
        if not (0.0 < p.habit_tau_bmu < 1.0):
            raise ConfigError(f"habit_tau_bmu must be in (0, 1), got {p.habit_tau_bmu}")
        if not (0.0 < p.habit_tau_neighbor < 1.0):
            raise ConfigError(f"habit_tau_neighbor must be in (0, 1), got {p.habit_tau_neighbor}")
        if p.habit_tau_neighbor > p.habit_tau_bmu:
            raise ConfigError(
                "habit_tau_neighbor must not exceed habit_tau_bmu "
                f"({p.habit_tau_neighbor} > {p.habit_tau_bmu})"
            )
        if not (isinstance(p.max_synapse_age, int) and p.max_synapse_age >= 1):
            raise ConfigError(f"max_synapse_age must be a positive integer, got {p.max_synapse_age}")
        # Habituation converges downward to 1 - 1/kappa; a firing threshold at or
        # below that floor can never be crossed, silently freezing neurogenesis.
        floor = 1.0 - 1.0 / p.habit_kappa
        if not p.firing_threshold > floor:
            raise ConfigError(
                f"firing_threshold {p.firing_threshold} is unreachable: it must exceed "
                f"1 - 1/habit_kappa = {floor:.6g}, the habituation fixed point"
            )

    @property
    def habituation_floor(self) -> float:
        return 1.0 - 1.0 / self.habit_kappa


@dataclass(frozen=True)
class StepOutcome:
    """Result of feeding one input to the network.

    ``event`` is one of the module-level EVENT_* constants. During seeding
    (EVENT_INITIALIZING) the match fields describe the consumed seed itself:
    the input either became a neuron or duplicated the pending seed, so the
    reported distance is 0 and activity 1.
    """

    event: str
    bmu_id: int
    second_id: int | None
    distance: float
    activity: float
    new_id: int | None = None
    pruned_synapses: tuple[tuple[int, int], ...] = ()
    removed_neurons: tuple[int, ...] = ()


def activity(distance: float) -> float:
    """Activity score exp(-d) for a squared reconstruction error d >= 0."""
    if distance < 0:
        raise InputError(f"distance must be >= 0, got {distance}")
    return math.exp(-distance)


class GwrNetwork:
    """A GWR network over inputs of (growable) dimension ``input_dim``.

    The network starts empty and treats the first two distinct inputs as
    seed neurons; only then does matching begin. Neuron ids are assigned
    from an ever-increasing counter and never reused.
    """

    def __init__(self, params: GwrParams, input_dim: int):
        params.validate()
        if not (isinstance(input_dim, int) and input_dim >= 1):
            raise ConfigError(f"input_dim must be a positive integer, got {input_dim}")
        self.params = params
        self.input_dim = input_dim
        self.step_count = 0
        self._ids: list[int] = []
        self._row_of: dict[int, int] = {}
        self._weights = np.zeros((0, input_dim), dtype=np.float64)
        self._eta = np.zeros(0, dtype=np.float64)
        self._adj: dict[int, dict[int, int]] = {}
        self._next_id = 0

    # ------------------------------------------------------------------
    # introspection
    # ------------------------------------------------------------------

    @property
    def neuron_count(self) -> int:
        return len(self._ids)

    @property
    def seeded(self) -> bool:
        return len(self._ids) >= 2

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(self._ids)

    def weight(self, neuron_id: int) -> np.ndarray:
        return self._weights[self._row(neuron_id)].copy()

    def weights_matrix(self) -> np.ndarray:
        """All weights as an (n, input_dim) array, rows in id order (copy)."""
        return self._weights.copy()

    def habituation(self, neuron_id: int) -> float:
        return float(self._eta[self._row(neuron_id)])

    def habituations(self) -> np.ndarray:
        return self._eta.copy()

    def neighbors(self, neuron_id: int) -> tuple[int, ...]:
        self._row(neuron_id)
        return tuple(sorted(self._adj.get(neuron_id, ())))

    def edge_age(self, i: int, j: int) -> int | None:
        return self._adj.get(i, {}).get(j)

    def edges(self) -> list[tuple[int, int, int]]:
        """All synapses as sorted (low_id, high_id, age) triples."""
        out = []
        for i, nbrs in self._adj.items():
            for j, age in nbrs.items():
                if i < j:
                    out.append((i, j, age))
        out.sort()
        return out

    # ------------------------------------------------------------------
    # matching
    # ------------------------------------------------------------------

    def find_bmu_pair(self, x) -> tuple[int, int, float]:
        """Best and second-best neuron ids for ``x`` plus the best squared distance.

        Ties break to the lowest neuron id. Requires a seeded network; does
        not mutate any state.
        """
        x = self._require_vector(x)
        if not self.seeded:
            raise InputError("network has fewer than 2 neurons; seeding is incomplete")
        brow, srow, bd = bmu_pair_scan(self._weights, x)
        return self._ids[brow], self._ids[srow], bd

    # ------------------------------------------------------------------
    # training
    # ------------------------------------------------------------------

    def train_step(self, x) -> StepOutcome:
        """Process one input: match, connect, then grow or update, then age.

        Exactly one of neurogenesis and weight/habituation update happens per
        step. In both branches the best/second-best synapse is refreshed to
        age 1 first, every other synapse of the best unit then ages by 1,
        over-age synapses are pruned and (when enabled) neurons left without
        synapses are removed.
        """
        x = self._require_vector(x)
        if not self.seeded:
            return self._absorb_seed(x)

        b, s, d = self.find_bmu_pair(x)
        self._set_edge(b, s, 1)
        a = math.exp(-d)
        p = self.params
        if a < p.activity_threshold and self._eta[self._row(b)] < p.firing_threshold:
            new_id = self.create_neuron(b, s, x)
            event = EVENT_NEURON_CREATED
        else:
            new_id = None
            self.update_weights_and_habituation(b, x)
            event = EVENT_WEIGHTS_UPDATED
        pruned, removed = self.age_and_prune(b, s)
        self.step_count += 1
        return StepOutcome(
            event=event,
            bmu_id=b,
            second_id=s,
            distance=d,
            activity=a,
            new_id=new_id,
            pruned_synapses=pruned,
            removed_neurons=removed,
        )

    def update_weights_and_habituation(self, b: int, x) -> None:
        """Apply the habituation and weight rules to ``b`` and its neighbors.

        Per neuron: eta += tau * kappa * (1 - eta) - tau, clamped to the
        reachable range, then w += lr * eta * (x - w). Which eta the weight
        step sees is governed by ``params.simultaneous_update``.
        """
        x = self._require_vector(x)
        p = self.params
        floor = p.habituation_floor
        plan = [(b, p.habit_tau_bmu, p.lr_bmu)]
        plan += [(j, p.habit_tau_neighbor, p.lr_neighbor) for j in self.neighbors(b)]
        for nid, tau, lr in plan:
            i = self._row(nid)
            eta_old = float(self._eta[i])
            eta_new = eta_old + tau * p.habit_kappa * (1.0 - eta_old) - tau
            eta_new = min(1.0, max(floor, eta_new))
            self._eta[i] = eta_new
            eta_for_w = eta_old if p.simultaneous_update else eta_new
            self._weights[i] += lr * eta_for_w * (x - self._weights[i])

    def create_neuron(self, b: int, s: int, x) -> int:
        """Insert a neuron at the midpoint of ``x`` and ``b``'s weight.

        The new neuron is wired to both ``b`` and ``s`` with age-1 synapses
        and the direct b-s synapse is removed. Returns the new id.
        """
        x = self._require_vector(x)
        wb = self._weights[self._row(b)]
        r = self._next_id
        self._next_id += 1
        self._append_neuron(r, (x + wb) / 2.0, 1.0)
        self._set_edge(r, b, 1)
        self._set_edge(r, s, 1)
        self._remove_edge(s, b)
        return r

    def age_and_prune(self, b: int, s: int) -> tuple[tuple[tuple[int, int], ...], tuple[int, ...]]:
        """Age every synapse of ``b`` except the one to ``s``; prune and reap.

        Synapses aged past ``max_synapse_age`` are removed; with neuron death
        enabled, any neuron left with no synapses is removed too. Returns the
        pruned (low, high) pairs and removed neuron ids, both sorted.
        """
        p = self.params
        pruned = []
        for j in self.neighbors(b):
            if j == s:
                continue
            age = self._adj[b][j] + 1
            if age > p.max_synapse_age:
                self._remove_edge(b, j)
                pruned.append((min(b, j), max(b, j)))
            else:
                self._set_edge(b, j, age)
        removed = []
        if p.neuron_death_enabled and pruned:
            orphans = {i for pair in pruned for i in pair}
            for nid in sorted(orphans):
                if nid in self._row_of and not self._adj.get(nid):
                    self._remove_neuron(nid)
                    removed.append(nid)
        return tuple(sorted(pruned)), tuple(removed)

    def grow_input_dim(self) -> None:
        """Append one zero-filled input dimension to the network and all weights."""
        self.input_dim += 1
        pad = np.zeros((self._weights.shape[0], 1), dtype=np.float64)
        self._weights = np.ascontiguousarray(np.hstack([self._weights, pad]))

    # ------------------------------------------------------------------
    # persistence
    # ------------------------------------------------------------------

    def to_snapshot(self) -> dict:
        """Plain-data snapshot; restores bit-equal via ``from_snapshot``."""
        return {
            "format_version": SNAPSHOT_VERSION,
            "params": asdict(self.params),
            "input_dim": self.input_dim,
            "step_count": self.step_count,
            "next_id": self._next_id,
            "neurons": [
                {"id": nid, "w": [float(v) for v in self._weights[row]], "eta": float(self._eta[row])}
                for row, nid in enumerate(self._ids)
            ],
            "edges": [[i, j, age] for i, j, age in self.edges()],
        }

    @classmethod
    def from_snapshot(cls, doc: dict) -> "GwrNetwork":
        try:
            version = doc["format_version"]
            if version != SNAPSHOT_VERSION:
                raise PersistenceError(
                    f"unsupported snapshot format_version {version!r} (expected {SNAPSHOT_VERSION})"
                )
            params = GwrParams(**doc["params"])
            net = cls(params, int(doc["input_dim"]))
            net.step_count = int(doc["step_count"])
            net._next_id = int(doc["next_id"])
            for neuron in doc["neurons"]:
                w = np.asarray(neuron["w"], dtype=np.float64)
                if w.shape != (net.input_dim,):
                    raise PersistenceError(
                        f"neuron {neuron['id']} has weight length {w.shape[0]}, "
                        f"expected {net.input_dim}"
                    )
                net._append_neuron(int(neuron["id"]), w, float(neuron["eta"]))
            for i, j, age in doc["edges"]:
                net._row(int(i))
                net._row(int(j))
                net._set_edge(int(i), int(j), int(age))
        except PersistenceError:
            raise
        except (KeyError, TypeError, ValueError, InputError) as exc:
            raise PersistenceError(f"malformed snapshot: {exc}") from exc
        return net

    def dumps(self) -> bytes:
        return json.dumps(self.to_snapshot(), sort_keys=True, separators=(",", ":")).encode()

    @classmethod
    def loads(cls, payload: bytes) -> "GwrNetwork":
        try:
            doc = json.loads(payload)
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise PersistenceError(f"snapshot payload is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise PersistenceError("snapshot payload is not a JSON object")
        return cls.from_snapshot(doc)

    # ------------------------------------------------------------------
    # internals
    # ------------------------------------------------------------------

    def _require_vector(self, x) -> np.ndarray:
        arr = np.asarray(x, dtype=np.float64)
        if arr.shape != (self.input_dim,):
            raise InputError(f"input has shape {arr.shape}, expected ({self.input_dim},)")
        return arr

    def _row(self, neuron_id: int) -> int:
        try:
            return self._row_of[neuron_id]
        except KeyError:
            raise InputError(f"no live neuron with id {neuron_id}") from None

    def _absorb_seed(self, x: np.ndarray) -> StepOutcome:
        if self._ids and np.array_equal(self._weights[0], x):
            # Seeds must be distinct; a duplicate maps onto the pending seed.
            outcome = StepOutcome(
                event=EVENT_INITIALIZING,
                bmu_id=self._ids[0],
                second_id=None,
                distance=0.0,
                activity=1.0,
            )
        else:
            nid = self._next_id
            self._next_id += 1
            self._append_neuron(nid, x.copy(), 1.0)
            outcome = StepOutcome(
                event=EVENT_INITIALIZING,
                bmu_id=nid,
                second_id=None,
                distance=0.0,
                activity=1.0,
                new_id=nid,
            )
        self.step_count += 1
        return outcome

    def _append_neuron(self, nid: int, w: np.ndarray, eta: float) -> None:
        if nid in self._row_of:
            raise InputError(f"duplicate neuron id {nid}")
        self._row_of[nid] = len(self._ids)
        self._ids.append(nid)
        self._weights = np.ascontiguousarray(np.vstack([self._weights, w[None, :]]))
        self._eta = np.append(self._eta, eta)
        self._adj.setdefault(nid, {})
        self._next_id = max(self._next_id, nid + 1)

    def _remove_neuron(self, nid: int) -> None:
        row = self._row(nid)
        if self._adj.get(nid):
            raise InputError(f"cannot remove neuron {nid}: it still has synapses")
        self._weights = np.ascontiguousarray(np.delete(self._weights, row, axis=0))
        self._eta = np.delete(self._eta, row)
        del self._ids[row]
        del self._adj[nid]
        del self._row_of[nid]
        for later in self._ids[row:]:
            self._row_of[later] -= 1

    def _set_edge(self, i: int, j: int, age: int) -> None:
        if i == j:
            raise InputError(f"self-synapse on neuron {i} is not allowed")
        self._adj[i][j] = age
        self._adj[j][i] = age

    def _remove_edge(self, i: int, j: int) -> None:
        self._adj.get(i, {}).pop(j, None)
        self._adj.get(j, {}).pop(i, None)
