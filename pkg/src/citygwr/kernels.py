"""Hot numeric kernels for the online training loop.

The only operation that dominates a full-city replay is the best/second-best
match scan: one pass over every neuron weight per input, millions of inputs.
The scan is compiled with numba when available; set CITYGWR_DISABLE_NUMBA=1
to force the pure-numpy twin. Both paths accumulate squared differences in
the same order, so they return bit-identical results and either one can be
used for a deterministic replay.
"""

import os

import numpy as np

__all__ = ["NUMBA_ENABLED", "bmu_pair_scan", "bmu_pair_scan_numba", "bmu_pair_scan_numpy"]


def _numpy_scan(weights, x):
    n = weights.shape[0]
    dim = weights.shape[1]
    acc = np.zeros(n, dtype=np.float64)
    for k in range(dim):
        diff = x[k] - weights[:, k]
        acc += diff * diff
    best = int(np.argmin(acc))
    bd = float(acc[best])
    acc[best] = np.inf
    second = int(np.argmin(acc))
    return best, second, bd


bmu_pair_scan_numpy = _numpy_scan

_disable = os.environ.get("CITYGWR_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _disable:
        raise ImportError("numba disabled by CITYGWR_DISABLE_NUMBA")
    from numba import njit

    @njit(cache=True)
    def _njit_scan(weights, x):  # pragma: no cover - compiled
        n, dim = weights.shape
        best = -1
        second = -1
        bd = np.inf
        sd = np.inf
        for i in range(n):
            acc = 0.0
            for k in range(dim):
                diff = x[k] - weights[i, k]
                acc += diff * diff
            if acc < bd:
                second = best
                sd = bd
                best = i
                bd = acc
            elif acc < sd:
                second = i
                sd = acc
        return best, second, bd

    def bmu_pair_scan_numba(weights, x):
        best, second, bd = _njit_scan(weights, x)
        return int(best), int(second), float(bd)

    NUMBA_ENABLED = True
except ImportError:
    bmu_pair_scan_numba = None
    NUMBA_ENABLED = False


def bmu_pair_scan(weights, x):
    """Return (best_row, second_row, best_squared_distance) for weights (n, d), n >= 2.

    Ties resolve to the lowest row index for both the best and the second
    match, matching a sequential strict-less scan.
    """
    if NUMBA_ENABLED:
        return bmu_pair_scan_numba(weights, x)
    return _numpy_scan(weights, x)
