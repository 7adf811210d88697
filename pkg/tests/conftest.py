import numpy as np
import pytest
from hypothesis import settings

from citygwr.gwr import GwrNetwork, GwrParams

settings.register_profile("citygwr", deadline=None, max_examples=50)
settings.load_profile("citygwr")


def make_net(weights, params=None, etas=None, edges=None, input_dim=None):
    """Build a network in a known state via the snapshot path.

    ``weights`` is a list of weight vectors (neuron ids 0..n-1), ``etas``
    optional per-neuron habituations (default 1.0), ``edges`` optional
    [i, j, age] triples.
    """
    weights = [list(map(float, w)) for w in weights]
    dim = input_dim if input_dim is not None else len(weights[0])
    params = params or GwrParams()
    etas = etas if etas is not None else [1.0] * len(weights)
    doc = {
        "format_version": 1,
        "params": {
            "activity_threshold": params.activity_threshold,
            "firing_threshold": params.firing_threshold,
            "lr_bmu": params.lr_bmu,
            "lr_neighbor": params.lr_neighbor,
            "habit_kappa": params.habit_kappa,
            "habit_tau_bmu": params.habit_tau_bmu,
            "habit_tau_neighbor": params.habit_tau_neighbor,
            "max_synapse_age": params.max_synapse_age,
            "neuron_death_enabled": params.neuron_death_enabled,
            "simultaneous_update": params.simultaneous_update,
        },
        "input_dim": dim,
        "step_count": 0,
        "next_id": len(weights),
        "neurons": [
            {"id": i, "w": w, "eta": float(etas[i])} for i, w in enumerate(weights)
        ],
        "edges": [list(e) for e in (edges or [])],
    }
    return GwrNetwork.from_snapshot(doc)


def make_region_map(weights, params=None):
    """RegionMap with the given 2D generator weights, ids 0..n-1."""
    from citygwr.regions import LEVEL1_PARAMS, RegionMap

    net = make_net(weights, params=params or LEVEL1_PARAMS)
    doc = {
        "net": net.to_snapshot(),
        "creation_log": [],
        "created_at": {str(i): i + 1 for i in range(len(weights))},
    }
    return RegionMap.from_snapshot(doc)


@pytest.fixture
def rng():
    return np.random.default_rng(20140601)
