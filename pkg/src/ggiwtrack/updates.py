"""Measurement update: coordinate-ascent variational iteration over the
association events, the measurement rates, the kinematics and the extents,
plus the marginal-association lightweight variant.

Every VB iteration first refreshes the event weights from the current
posterior means, then rebuilds each target's posterior from the *predicted*
parameters and the weighted measurement statistics (the conjugate-family
coordinate ascent step).  The innovation covariance used in the weights is
computed once per frame from the prediction and never refreshed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ggiwtrack import association as assoc_mod
from ggiwtrack import linalg
from ggiwtrack._kernels import assignment_loglik_sums, event_stats
from ggiwtrack.association import (
    MeasurementFrame,
    build_gates,
    candidate_assignment_matrix,
    enumeration_matrix,
    normalize_log_weights,
    pack_events,
)
from ggiwtrack.core import EXTENT_DIM, GgiwState, MotionModel, distortion_matrix
from ggiwtrack.errors import DomainError

SCHEMES = ("full_enumeration", "cluster_pruned", "marginal")

# Below this expected measurement count a target coasts instead of updating.
COAST_TOL = 1e-9


@dataclass(frozen=True)
class VbConfig:
    """Iteration count and association scheme of the measurement update."""

    n_vb: int = 10
    scheme: str = "cluster_pruned"

    def __post_init__(self):
        if self.n_vb < 1:
            raise DomainError("n_vb must be at least 1")
        if self.scheme not in SCHEMES:
            raise DomainError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")


@dataclass(frozen=True)
class AssociationConfig:
    """Gating and event-pruning tunables of the cluster scheme."""

    gate_threshold: float = math.sqrt(9.21)   # chi-square(2) 0.99 quantile
    epsilons: tuple = (0.5, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0)
    min_pts: int = 1
    event_cap: int = assoc_mod.DEFAULT_EVENT_CAP


def update_rate(alpha: float, beta: float, weights: np.ndarray,
                counts: np.ndarray) -> tuple[float, float]:
    """Gamma posterior: shape absorbs the expected count, rate grows by one.

    ``weights`` must be normalized event weights, so the rate increment is
    exactly one.
    """
    return alpha + float(weights @ counts), beta + 1.0


def update_kinematic(m: np.ndarray, p: np.ndarray, weights: np.ndarray,
                     counts: np.ndarray, sy: np.ndarray, extent_mean: np.ndarray,
                     d_mat: np.ndarray, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Kalman-style update against the weight-averaged equivalent measurement.

    ``sy`` holds the per-event sums of this target's measurements, so the
    averaged equivalent measurement is (weights @ sy) / (weights @ counts).
    Coasts when the expected count is negligible.
    """
    a2 = float(weights @ counts)
    if a2 <= COAST_TOL:
        return m.copy(), p.copy()
    a1 = weights @ sy
    pseudo = d_mat @ extent_mean @ d_mat.T / a2
    s_eff = linalg.symmetrize(h @ p @ h.T + pseudo)
    gain = np.linalg.solve(s_eff, h @ p).T
    m_post = m + gain @ (a1 / a2 - h @ m)
    p_post = linalg.symmetrize(p - gain @ h @ p)
    return m_post, p_post


def _unpack_moment(row: np.ndarray) -> np.ndarray:
    return np.array([[row[0], row[1]], [row[1], row[2]]])


def update_extent(v: float, vmat: np.ndarray, weights: np.ndarray, counts: np.ndarray,
                  sy: np.ndarray, syy: np.ndarray, m_post: np.ndarray, p_post: np.ndarray,
                  d_mat: np.ndarray, h: np.ndarray) -> tuple[float, np.ndarray]:
    """Inverse-Wishart posterior: dof absorbs the expected count, the scale
    absorbs the de-distorted weighted scatter around the posterior mean.

    Uses the identity sum_l q_l*(Ybar_l + phi_l (ybar_l-Hm)(ybar_l-Hm)^T)
    = sum_l q_l*Syy_l - A1 (Hm)^T - Hm A1^T + A2 Hm (Hm)^T, which avoids
    per-event divisions and is exact for zero-count events.
    """
    try:
        d_inv = np.linalg.inv(d_mat)
    except np.linalg.LinAlgError as exc:
        raise DomainError("distortion matrix is singular") from exc
    a2 = float(weights @ counts)
    a1 = weights @ sy
    sqyy = _unpack_moment(weights @ syy)
    hm = h @ m_post
    scatter = (sqyy - np.outer(a1, hm) - np.outer(hm, a1)
               + a2 * (np.outer(hm, hm) + h @ p_post @ h.T))
    v_post = v + a2
    vmat_post = linalg.symmetrize(vmat + d_inv @ scatter @ d_inv.T)
    return v_post, vmat_post


def _log_clutter_intensity(clutter_rate: float, surveillance_volume: float) -> float:
    """log(rho * lambda_c) with rho = lambda_c / volume."""
    if surveillance_volume <= 0:
        raise DomainError("surveillance volume must be positive")
    if clutter_rate < 0:
        raise DomainError("clutter rate must be non-negative")
    intensity = clutter_rate**2 / surveillance_volume
    return math.log(intensity) if intensity > 0 else -math.inf


def _build_assignments(predicted, frame, config, assoc, d_mats, x_preds, model,
                       log_clutter) -> np.ndarray:
    n = len(predicted)
    m = len(frame)
    if config.scheme == "full_enumeration":
        return enumeration_matrix(m, n, cap=assoc.event_cap)
    gates = build_gates(
        [(st.m, st.P, d_mats[i], x_preds[i]) for i, st in enumerate(predicted)],
        model.H, assoc.gate_threshold)
    log_rates = np.log([st.rate_mean() for st in predicted])
    return candidate_assignment_matrix(frame, gates, assoc.epsilons,
                                       min_pts=assoc.min_pts, cap=assoc.event_cap,
                                       log_rate_weights=log_rates,
                                       log_clutter_weight=log_clutter)


def vb_measurement_update(predicted, frame: MeasurementFrame, config: VbConfig,
                          model: MotionModel, clutter_rate: float,
                          surveillance_volume: float,
                          assoc: AssociationConfig | None = None,
                          events=None, trace: dict | None = None) -> list[GgiwState]:
    """Joint-event measurement update of all targets for one frame.

    ``events`` overrides the scheme's event construction (used by tests to
    force a particular association).  When ``trace`` is a dict it receives
    the assignment matrix and the final normalized weights.
    """
    if not predicted:
        raise DomainError("need at least one target")
    assoc = assoc or AssociationConfig()
    n = len(predicted)
    pts = frame.points
    m = len(frame)

    x_preds = [st.extent_mean() for st in predicted]
    d_mats = [distortion_matrix(x, model) for x in x_preds]
    innovation = [
        linalg.symmetrize(model.H @ st.P @ model.H.T + d_mats[i] @ x_preds[i] @ d_mats[i].T)
        for i, st in enumerate(predicted)]
    log_clutter = _log_clutter_intensity(clutter_rate, surveillance_volume)

    if events is None:
        assign = _build_assignments(predicted, frame, config, assoc, d_mats,
                                    x_preds, model, log_clutter)
    else:
        assign, _ = pack_events(events, n, m)
    counts, sy, syy = event_stats(assign, pts, n)

    # Iterate on raw parameter tuples; the validated GgiwState objects are
    # built once from the final iterate.
    current = [(st.m, st.P, st.v, st.V, st.alpha, st.beta) for st in predicted]
    weights = None
    for _ in range(config.n_vb):
        if m:
            loglik = np.vstack([
                linalg.gaussian_logpdf_many(pts, model.H @ current[i][0], innovation[i])
                for i in range(n)])
        else:
            loglik = np.zeros((n, 0))
        sums = assignment_loglik_sums(assign, loglik)
        log_rates = np.log([alpha / beta for *_, alpha, beta in current])
        # Shift by the smallest clutter count: a pure normalization constant
        # when the clutter intensity is positive, and the correct limit when
        # it is zero (weight concentrates on the fewest-clutter events, so
        # measurements rejected by gating cannot zero out every event).
        clutter_excess = counts[:, 0] - counts[:, 0].min()
        logw = (sums + counts[:, 1:] @ log_rates
                + assoc_mod._clutter_term(clutter_excess, log_clutter))
        weights = normalize_log_weights(logw)

        updated = []
        for i, prior in enumerate(predicted):
            _, _, v_cur, vmat_cur, _, _ = current[i]
            ex_cur = vmat_cur / (v_cur - 2 * EXTENT_DIM - 2)
            m_post, p_post = update_kinematic(
                prior.m, prior.P, weights, counts[:, i + 1], sy[:, i], ex_cur,
                d_mats[i], model.H)
            v_post, vmat_post = update_extent(
                prior.v, prior.V, weights, counts[:, i + 1], sy[:, i], syy[:, i],
                m_post, p_post, d_mats[i], model.H)
            a_post, b_post = update_rate(prior.alpha, prior.beta, weights, counts[:, i + 1])
            updated.append((m_post, p_post, v_post, vmat_post, a_post, b_post))
        current = updated

    if trace is not None:
        trace["assignments"] = assign
        trace["weights"] = weights
    return [GgiwState(m=m_i, P=p_i, v=v_i, V=vm_i, alpha=a_i, beta=b_i)
            for m_i, p_i, v_i, vm_i, a_i, b_i in current]


def marginal_probabilities(frame: MeasurementFrame, means, innovation_covs,
                           rate_means, rho: float, lambda_c: float,
                           h: np.ndarray) -> np.ndarray:
    """Per-target, per-measurement association probabilities.

    Each column normalizes the rate-scaled Gaussian likelihoods against the
    clutter intensity rho*lambda_c; the residual column mass is the clutter
    share.  Computed in the log domain so distant measurements underflow to
    zero instead of producing NaNs.
    """
    rate_means = np.asarray(rate_means, dtype=float)
    if np.any(rate_means <= 0):
        raise DomainError("rate means must be positive")
    m = len(frame)
    n = len(means)
    if m == 0:
        return np.zeros((n, 0))
    log_num = np.vstack([
        np.log(rate_means[i])
        + linalg.gaussian_logpdf_many(frame.points, h @ np.asarray(means[i], dtype=float),
                                      innovation_covs[i])
        for i in range(n)])
    clutter = rho * lambda_c
    log_clutter_row = np.full((1, m), np.log(clutter) if clutter > 0 else -np.inf)
    stacked = np.vstack([log_num, log_clutter_row])
    top = stacked.max(axis=0)
    with np.errstate(invalid="ignore"):
        log_den = top + np.log(np.exp(stacked - top).sum(axis=0))
        eps = np.exp(log_num - log_den)
    return np.where(np.isfinite(log_den), eps, 0.0)


def marginal_measurement_update(predicted, frame: MeasurementFrame, config: VbConfig,
                                model: MotionModel, clutter_rate: float,
                                surveillance_volume: float,
                                trace: dict | None = None) -> list[GgiwState]:
    """Lightweight measurement update through marginal association masses.

    Mirrors the joint-event iteration with the per-event cardinalities
    replaced by per-measurement association probabilities; posteriors are
    rebuilt from the prediction every iteration.
    """
    if not predicted:
        raise DomainError("need at least one target")
    if surveillance_volume <= 0:
        raise DomainError("surveillance volume must be positive")
    n = len(predicted)
    pts = frame.points

    x_preds = [st.extent_mean() for st in predicted]
    d_mats = [distortion_matrix(x, model) for x in x_preds]
    d_invs = [np.linalg.inv(d) for d in d_mats]
    innovation = [
        linalg.symmetrize(model.H @ st.P @ model.H.T + d_mats[i] @ x_preds[i] @ d_mats[i].T)
        for i, st in enumerate(predicted)]
    rho = clutter_rate / surveillance_volume

    # Raw parameter tuples across iterations; validated states built at the
    # end.  Association probabilities use the current-iterate means and
    # rates, mirroring the joint-event scheme's weight refresh; the
    # innovation covariance stays at its predicted value.
    current = [(st.m, st.P, st.v, st.V, st.alpha, st.beta) for st in predicted]
    eps = None
    for _ in range(config.n_vb):
        eps = marginal_probabilities(
            frame, [c[0] for c in current], innovation,
            [alpha / beta for *_, alpha, beta in current], rho, clutter_rate, model.H)
        updated = []
        for i, prior in enumerate(predicted):
            e = eps[i]
            mass = float(e.sum())
            _, _, v_cur, vmat_cur, _, _ = current[i]
            ex_cur = vmat_cur / (v_cur - 2 * EXTENT_DIM - 2)
            if mass <= COAST_TOL:
                m_post, p_post = prior.m.copy(), prior.P.copy()
            else:
                centroid = (e @ pts) / mass
                pseudo = d_mats[i] @ ex_cur @ d_mats[i].T / mass
                s_eff = linalg.symmetrize(model.H @ prior.P @ model.H.T + pseudo)
                gain = np.linalg.solve(s_eff, model.H @ prior.P).T
                m_post = prior.m + gain @ (centroid - model.H @ prior.m)
                p_post = linalg.symmetrize(prior.P - gain @ model.H @ prior.P)
            hm = model.H @ m_post
            r = pts - hm
            scatter = r.T @ (e[:, None] * r) + mass * (model.H @ p_post @ model.H.T)
            v_post = prior.v + mass
            vmat_post = linalg.symmetrize(prior.V + d_invs[i] @ scatter @ d_invs[i].T)
            updated.append((m_post, p_post, v_post, vmat_post,
                            prior.alpha + mass, prior.beta + 1.0))
        current = updated

    if trace is not None:
        trace["marginals"] = eps
    return [GgiwState(m=m_i, P=p_i, v=v_i, V=vm_i, alpha=a_i, beta=b_i)
            for m_i, p_i, v_i, vm_i, a_i, b_i in current]


def measurement_update(predicted, frame, config: VbConfig, model: MotionModel,
                       clutter_rate: float, surveillance_volume: float,
                       assoc: AssociationConfig | None = None) -> list[GgiwState]:
    """Dispatch on the configured association scheme."""
    if config.scheme == "marginal":
        return marginal_measurement_update(predicted, frame, config, model,
                                           clutter_rate, surveillance_volume)
    return vb_measurement_update(predicted, frame, config, model, clutter_rate,
                                 surveillance_volume, assoc=assoc)
