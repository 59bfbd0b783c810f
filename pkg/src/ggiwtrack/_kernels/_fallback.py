"""Pure-numpy implementations of the event-accumulation kernels."""

import numpy as np


def assignment_loglik_sums(assign: np.ndarray, loglik: np.ndarray) -> np.ndarray:
    """Per-event sum of assigned-measurement log likelihoods.

    ``assign`` is (n_events, m) with entries in [0, n]; ``loglik`` is (n, m);
    clutter assignments (0) contribute nothing.
    """
    assign = np.asarray(assign)
    n_events, m = assign.shape
    if m == 0:
        return np.zeros(n_events)
    padded = np.vstack([np.zeros((1, m)), np.asarray(loglik, dtype=float)])
    return padded[assign, np.arange(m)].sum(axis=1)


def event_stats(assign: np.ndarray, points: np.ndarray, n_targets: int):
    """Per-event, per-target count, measurement sum and raw second moment.

    Returns ``counts`` (n_events, n_targets+1) with clutter in column 0,
    ``sy`` (n_events, n_targets, 2) and ``syy`` (n_events, n_targets, 3)
    where the last axis packs the symmetric moment as (xx, xy, yy).
    """
    assign = np.asarray(assign)
    points = np.asarray(points, dtype=float)
    n_events, m = assign.shape
    counts = np.zeros((n_events, n_targets + 1))
    sy = np.zeros((n_events, n_targets, 2))
    syy = np.zeros((n_events, n_targets, 3))
    if m == 0:
        return counts, sy, syy
    counts[:, 0] = (assign == 0).sum(axis=1)
    prods = points[:, [0, 0, 1]] * points[:, [0, 1, 1]]
    for n in range(1, n_targets + 1):
        mask = (assign == n).astype(float)
        counts[:, n] = mask.sum(axis=1)
        sy[:, n - 1, :] = mask @ points
        syy[:, n - 1, :] = mask @ prods
    return counts, sy, syy
