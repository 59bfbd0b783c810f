"""Scoring estimated tracks against ground truth.

The headline metric is the Gaussian Wasserstein distance between the true
and estimated ellipses; positional and extent RMSE curves over Monte-Carlo
runs and their time aggregates mirror the usual benchmark tables.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ggiwtrack import linalg
from ggiwtrack.errors import DomainError


def gwd(x1: np.ndarray, ext1: np.ndarray, x2: np.ndarray, ext2: np.ndarray,
        h: np.ndarray) -> float:
    """Gaussian Wasserstein distance between two ellipses.

    Combines the projected center offset with the extent mismatch term
    tr(X1 + X2 - 2 (X1^1/2 X2 X1^1/2)^1/2); the trace term is clamped at
    zero before the outer square root to absorb round-off.
    """
    ext1 = linalg.as_spd(ext1, name="first extent")
    ext2 = linalg.as_spd(ext2, name="second extent")
    delta = h @ (np.asarray(x1, dtype=float) - np.asarray(x2, dtype=float))
    root1 = linalg.spd_sqrt(ext1)
    cross = linalg.spd_sqrt(root1 @ ext2 @ root1)
    trace_term = float(np.trace(ext1 + ext2 - 2.0 * cross))
    return float(np.sqrt(float(delta @ delta) + max(trace_term, 0.0)))


@dataclass(frozen=True)
class MetricsRecord:
    """Per (run, step, target) error components.

    ``pos_err_sq`` is the squared projected center offset, ``ext_err`` the
    signed trace of the extent difference tr(X_true - X_est).
    """

    gwd: np.ndarray          # (runs, steps, targets)
    pos_err_sq: np.ndarray   # (runs, steps, targets)
    ext_err: np.ndarray      # (runs, steps, targets)

    @classmethod
    def stack(cls, records: list["MetricsRecord"]) -> "MetricsRecord":
        return cls(gwd=np.concatenate([r.gwd for r in records]),
                   pos_err_sq=np.concatenate([r.pos_err_sq for r in records]),
                   ext_err=np.concatenate([r.ext_err for r in records]))


def score_run(truth, estimates, h: np.ndarray) -> MetricsRecord:
    """Score one run; ``estimates[k][i]`` holds target i's posterior at step k.

    Track-to-truth correspondence is by index: the tracker never reorders
    its targets, so association mistakes show up as error spikes.
    """
    steps = len(estimates)
    n_targets = len(truth)
    g = np.zeros((1, steps, n_targets))
    p2 = np.zeros((1, steps, n_targets))
    ee = np.zeros((1, steps, n_targets))
    for k in range(steps):
        for i, track in enumerate(truth):
            st = estimates[k][i]
            x_true = track.state(k)
            ext_true = track.extents[k]
            ext_est = st.extent_mean()
            g[0, k, i] = gwd(x_true, ext_true, st.m, ext_est, h)
            delta = h @ (x_true - st.m)
            p2[0, k, i] = float(delta @ delta)
            ee[0, k, i] = float(np.trace(ext_true - ext_est))
    return MetricsRecord(gwd=g, pos_err_sq=p2, ext_err=ee)


def rmse_curves(record: MetricsRecord) -> tuple[np.ndarray, np.ndarray]:
    """Per-step, per-target positional and extent RMSE over MC runs."""
    if record.gwd.shape[0] < 1:
        raise DomainError("need at least one MC run")
    rmse_pos = np.sqrt(record.pos_err_sq.mean(axis=0))
    rmse_ext = np.sqrt((record.ext_err**2).mean(axis=0))
    return rmse_pos, rmse_ext


def time_aggregates(curve: np.ndarray) -> tuple[float, float]:
    """Arithmetic mean and population variance of a scalar time series."""
    curve = np.asarray(curve, dtype=float)
    if curve.size < 1:
        raise DomainError("need at least one time step")
    mean = float(curve.mean())
    return mean, float(((curve - mean) ** 2).mean())
