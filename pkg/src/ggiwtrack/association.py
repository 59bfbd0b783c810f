"""Joint-association-event machinery.

A joint association event (JAE) assigns every measurement of a frame to one
target (1..n) or to clutter (0).  This module builds candidate event sets --
by exhaustive enumeration or by gating plus density clustering -- and
evaluates their posterior log weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.cluster import DBSCAN

from ggiwtrack import linalg
from ggiwtrack._kernels import assignment_loglik_sums
from ggiwtrack.errors import CapacityError, DomainError

DEFAULT_EVENT_CAP = 10**6


@dataclass(frozen=True)
class MeasurementFrame:
    """The 2-d point set observed at one scan.

    ``truth_labels`` (0 = clutter, n = 1-based target index) are only present
    for simulated frames.
    """

    points: np.ndarray
    truth_labels: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(pts)):
            raise DomainError("measurement frame contains non-finite points")
        object.__setattr__(self, "points", pts)
        if self.truth_labels is not None:
            labels = np.asarray(self.truth_labels, dtype=int).reshape(-1)
            if len(labels) != len(pts):
                raise DomainError("truth labels do not match points in length")
            object.__setattr__(self, "truth_labels", labels)

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class JointAssociationEvent:
    """One assignment vector with its cardinality profile and weight.

    ``cardinalities[0]`` counts clutter; entry ``n`` counts measurements on
    target ``n``.  Weights stay None until an event set has been scored.
    """

    assignment: np.ndarray
    cardinalities: np.ndarray
    log_weight: float | None = None
    normalized_weight: float | None = None

    @classmethod
    def from_assignment(cls, assignment, n_targets: int,
                        log_weight=None, normalized_weight=None) -> "JointAssociationEvent":
        assignment = np.asarray(assignment, dtype=np.int32).reshape(-1)
        if assignment.size and (assignment.min() < 0 or assignment.max() > n_targets):
            raise DomainError("assignment entries must lie in [0, n_targets]")
        cards = np.bincount(assignment, minlength=n_targets + 1).astype(np.int64)
        return cls(assignment=assignment, cardinalities=cards,
                   log_weight=log_weight, normalized_weight=normalized_weight)


@dataclass(frozen=True)
class EquivalentMoments:
    """Mean and scatter (not divided by the count) of a measurement subset."""

    ybar: np.ndarray
    Ybar: np.ndarray
    count: int


def equivalent_moments(points: np.ndarray) -> EquivalentMoments:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if pts.shape[0] == 0:
        raise DomainError("equivalent moments need a non-empty subset")
    ybar = pts.mean(axis=0)
    r = pts - ybar
    return EquivalentMoments(ybar=ybar, Ybar=r.T @ r, count=pts.shape[0])


def count_events_for_cardinality(m: int, phi) -> int:
    """Number of assignment vectors sharing one cardinality profile (exact)."""
    phi = [int(p) for p in phi]
    if any(p < 0 for p in phi):
        raise DomainError("cardinalities must be non-negative")
    if sum(phi) != m:
        raise DomainError(f"cardinalities sum to {sum(phi)}, expected {m}")
    out = math.factorial(m)
    for p in phi:
        out //= math.factorial(p)
    return out


def enumeration_matrix(m: int, n_targets: int, cap: int = DEFAULT_EVENT_CAP) -> np.ndarray:
    """All (n_targets+1)^m assignment vectors as an int matrix, in
    lexicographic order; raises CapacityError beyond ``cap``."""
    total = (n_targets + 1) ** m
    if total > cap:
        raise CapacityError(
            f"{total} events exceed the cap of {cap}; use a lightweight scheme")
    if m == 0:
        return np.zeros((1, 0), dtype=np.int32)
    codes = np.arange(total, dtype=np.int64)
    assign = np.empty((total, m), dtype=np.int32)
    base = n_targets + 1
    for j in range(m - 1, -1, -1):
        assign[:, j] = codes % base
        codes //= base
    return assign


def enumerate_all_events(m: int, n_targets: int,
                         cap: int = DEFAULT_EVENT_CAP) -> list[JointAssociationEvent]:
    """All (n_targets+1)^m assignment vectors, in lexicographic order.

    Only usable at desk scale; raises CapacityError beyond ``cap`` so callers
    fall back to a lightweight scheme.
    """
    assign = enumeration_matrix(m, n_targets, cap)
    return [JointAssociationEvent.from_assignment(row, n_targets) for row in assign]


def pack_events(events: list[JointAssociationEvent], n_targets: int, m: int):
    """Stack an event list into (assignments, cardinalities) integer arrays."""
    n_events = len(events)
    assign = np.zeros((n_events, m), dtype=np.int32)
    counts = np.zeros((n_events, n_targets + 1), dtype=np.int64)
    for i, ev in enumerate(events):
        assign[i] = ev.assignment
        counts[i] = ev.cardinalities
    return assign, counts


@dataclass(frozen=True)
class GateSet:
    """Per-target elliptical validation regions.

    ``innovation_covs[n]`` is the sum of the projected kinematic covariance
    and the distorted predicted extent; a measurement is admissible for a
    target when its squared Mahalanobis distance is at most ``threshold**2``.
    """

    centers: np.ndarray               # (n, 2) predicted measurement means
    innovation_covs: tuple            # n matrices of shape (2, 2)
    threshold: float

    def admissible_matrix(self, points: np.ndarray) -> np.ndarray:
        """Boolean (n_targets, n_points) admissibility matrix."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        n = self.centers.shape[0]
        out = np.zeros((n, pts.shape[0]), dtype=bool)
        for i in range(n):
            d2 = linalg.mahalanobis_sq(pts, self.centers[i], self.innovation_covs[i])
            out[i] = d2 <= self.threshold**2
        return out


def build_gates(predicted, H: np.ndarray, g: float) -> GateSet:
    """Gates from per-target (m_pred, P_pred, D, X_pred_mean) tuples."""
    if g <= 0:
        raise DomainError("gate threshold must be positive")
    centers = []
    covs = []
    for m_pred, p_pred, d_mat, x_pred in predicted:
        s = linalg.symmetrize(H @ p_pred @ H.T + d_mat @ x_pred @ d_mat.T)
        if np.linalg.eigvalsh(s).min() <= 0:
            raise DomainError("innovation covariance is not positive definite")
        centers.append(H @ np.asarray(m_pred, dtype=float))
        covs.append(s)
    return GateSet(centers=np.array(centers), innovation_covs=tuple(covs), threshold=float(g))


def gate(frame: MeasurementFrame, predicted, H: np.ndarray, g: float):
    """Per-target admissible measurement indices plus the rejected set."""
    gates = build_gates(predicted, H, g)
    adm = gates.admissible_matrix(frame.points)
    admissible = [np.flatnonzero(adm[i]) for i in range(adm.shape[0])]
    rejected = np.flatnonzero(~adm.any(axis=0))
    return admissible, rejected


def _product_choices(option_lists, score_lists, budget: int) -> np.ndarray:
    """Chosen option values, one per list, as a (n_events, n_lists) matrix.

    Small cross-products are materialized in full (mixed-radix order).  When
    the product exceeds ``budget``, an exact beam keeps the ``budget`` best
    total-score selections: extending the stage-c top-K partial sums with
    each option provably contains the global top-K.  Ties resolve through
    stable sorting of the deterministic enumeration order.
    """
    n_lists = len(option_lists)
    if n_lists == 0:
        return np.zeros((1, 0), dtype=np.int32)
    sizes = [len(opts) for opts in option_lists]
    total = 1
    for k in sizes:
        total *= k
        if total > budget:
            break
    if total <= budget:
        out = np.empty((total, n_lists), dtype=np.int32)
        codes = np.arange(total)
        for c in range(n_lists - 1, -1, -1):
            k = sizes[c]
            out[:, c] = np.asarray(option_lists[c], dtype=np.int32)[codes % k]
            codes //= k
        return out

    beam_scores = np.zeros(1)
    beam = np.zeros((1, 0), dtype=np.int32)
    for opts, scores in zip(option_lists, score_lists):
        ranked = sorted(range(len(opts)), key=lambda i: (-scores[i], opts[i]))
        vals = np.asarray([opts[i] for i in ranked], dtype=np.int32)
        scs = np.asarray([scores[i] for i in ranked])
        k = len(vals)
        cand = (beam_scores[:, None] + scs[None, :]).ravel()
        keep = np.argsort(-cand, kind="stable")[:budget]
        beam_scores = cand[keep]
        beam = np.column_stack([beam[keep // k], vals[keep % k]])
    return beam


def _dedupe_rows(assign: np.ndarray, n_targets: int) -> np.ndarray:
    """Unique rows in lexicographic order.

    Rows are packed base-(n_targets+1) into int64 chunks so the sort runs on
    integers instead of raw-byte views; equivalent to np.unique(axis=0) but
    much faster at the event counts the tracker produces.
    """
    n_events, m = assign.shape
    if m == 0:
        return assign[:1]
    base = n_targets + 1
    per_chunk = int(63 // math.log2(base))
    n_chunks = -(-m // per_chunk)
    codes = np.zeros((n_events, n_chunks), dtype=np.int64)
    for c in range(n_chunks):
        segment = assign[:, c * per_chunk:(c + 1) * per_chunk]
        code = np.zeros(n_events, dtype=np.int64)
        for j in range(segment.shape[1]):
            code = code * base + segment[:, j]
        codes[:, c] = code
    order = np.lexsort(codes.T[::-1])
    sorted_codes = codes[order]
    keep = np.ones(n_events, dtype=bool)
    keep[1:] = np.any(sorted_codes[1:] != sorted_codes[:-1], axis=1)
    return assign[order[keep]]


def candidate_assignment_matrix(frame: MeasurementFrame, gates: GateSet, epsilons,
                                min_pts: int = 1, cap: int = DEFAULT_EVENT_CAP,
                                log_rate_weights=None,
                                log_clutter_weight: float = 0.0) -> np.ndarray:
    """Deduplicated candidate assignment vectors as an (n_events, m) matrix.

    See ``cluster_partitions`` for the construction; this is the array-native
    core shared with the tracker hot path.
    """
    epsilons = list(epsilons)
    if not epsilons or any(b <= a for a, b in zip(epsilons, epsilons[1:])):
        raise DomainError("epsilons must be non-empty and ascending")
    pts = frame.points
    m = len(frame)
    n_targets = gates.centers.shape[0]
    if log_rate_weights is None:
        log_rate_weights = np.zeros(n_targets)
    log_rate_weights = np.asarray(log_rate_weights, dtype=float)

    if m == 0:
        return np.zeros((1, 0), dtype=np.int32)

    adm = gates.admissible_matrix(pts)
    gated = np.flatnonzero(adm.any(axis=0))
    if gated.size == 0:
        return np.zeros((1, m), dtype=np.int32)

    # Each epsilon gets an equal share of the cap, so a fine clustering that
    # shatters the frame into singletons can never crowd out the small,
    # well-formed event blocks of the coarser partitions.
    budget = max(cap // len(epsilons), 1)
    blocks = []
    seen_partitions = set()
    for eps in epsilons:
        labels = DBSCAN(eps=eps, min_samples=min_pts).fit(pts[gated]).labels_
        clusters = [gated[labels == lab] for lab in np.unique(labels) if lab >= 0]
        clusters.extend(gated[[i]] for i in np.flatnonzero(labels == -1))
        # Different epsilons frequently reproduce the same partition; skip
        # those before materializing their identical event blocks.
        partition_key = frozenset(tuple(members) for members in clusters)
        if partition_key in seen_partitions:
            continue
        seen_partitions.add(partition_key)
        centroids = np.array([pts[members].mean(axis=0) for members in clusters])
        in_gate = gates.admissible_matrix(centroids)
        option_lists, score_lists = [], []
        for c, members in enumerate(clusters):
            targets_in = np.flatnonzero(in_gate[:, c])
            size = len(members)
            option_lists.append([0] + [n + 1 for n in targets_in])
            score_lists.append([size * log_clutter_weight]
                               + [size * log_rate_weights[n] for n in targets_in])
        choices = _product_choices(option_lists, score_lists, budget)
        assign = np.zeros((choices.shape[0], m), dtype=np.int32)
        for c, members in enumerate(clusters):
            assign[:, members] = choices[:, c:c + 1]
        blocks.append(assign)

    assign = _dedupe_rows(np.vstack(blocks), n_targets)
    if assign.shape[0] > cap:
        # Truncate to the best prior (rate/clutter) weights; non-gated
        # columns are clutter in every event and cannot affect the ranking.
        w = np.concatenate([[log_clutter_weight], log_rate_weights])
        scores = w[assign[:, gated]].sum(axis=1)
        keep = np.argsort(-scores, kind="stable")[:cap]
        assign = assign[keep]
    return assign


def cluster_partitions(frame: MeasurementFrame, gates: GateSet, epsilons,
                       min_pts: int = 1, cap: int = DEFAULT_EVENT_CAP,
                       log_rate_weights=None, log_clutter_weight: float = 0.0,
                       ) -> list[JointAssociationEvent]:
    """Candidate JAEs from density clustering at several distance thresholds.

    For each epsilon, DBSCAN clusters the gated measurements (noise points
    become singleton clusters).  Every cluster may go wholly to any target
    whose gate contains its centroid, or to clutter; the cross-product of
    those choices yields candidate events.  Duplicates are removed across
    epsilons.  Oversized candidate sets are truncated to the best events by
    prior (rate/clutter) weight, with the cap shared over the epsilons so no
    single clustering granularity starves the others.
    """
    n_targets = gates.centers.shape[0]
    assign = candidate_assignment_matrix(frame, gates, epsilons, min_pts=min_pts,
                                         cap=cap, log_rate_weights=log_rate_weights,
                                         log_clutter_weight=log_clutter_weight)
    return [JointAssociationEvent.from_assignment(row, n_targets) for row in assign]


def _clutter_term(clutter_counts: np.ndarray, log_clutter: float) -> np.ndarray:
    """counts * log_clutter with the 0 * (-inf) case defined as 0."""
    if np.isfinite(log_clutter):
        return clutter_counts * log_clutter
    return np.where(clutter_counts > 0, -np.inf, 0.0)


def event_log_weights(events, frame: MeasurementFrame, targets, rate_means,
                      rho: float, lambda_c: float, H: np.ndarray) -> np.ndarray:
    """Unnormalized log posterior weight of every event.

    ``targets`` holds per-target (m_pred, S) pairs; each event scores the
    clutter count against rho*lambda_c, each target count against its
    expected rate, and each assigned measurement against the Gaussian
    likelihood centred on the projected state.
    """
    rate_means = np.asarray(rate_means, dtype=float)
    if np.any(rate_means <= 0):
        raise DomainError("rate means must be positive")
    n_targets = len(targets)
    m = len(frame)
    assign, counts = pack_events(events, n_targets, m)
    if m:
        loglik = np.vstack([
            linalg.gaussian_logpdf_many(frame.points, H @ np.asarray(m_pred, dtype=float), s)
            for m_pred, s in targets])
    else:
        loglik = np.zeros((n_targets, 0))
    sums = assignment_loglik_sums(assign, loglik)
    log_clutter = np.log(rho * lambda_c) if rho * lambda_c > 0 else -np.inf
    return (sums + counts[:, 1:] @ np.log(rate_means)
            + _clutter_term(counts[:, 0].astype(float), log_clutter))


def event_log_weight(event, frame, targets, rate_means, rho, lambda_c, H) -> float:
    return float(event_log_weights([event], frame, targets, rate_means, rho, lambda_c, H)[0])


def normalize_log_weights(log_weights: np.ndarray) -> np.ndarray:
    """Softmax with max subtraction; safe for -inf entries."""
    log_weights = np.asarray(log_weights, dtype=float)
    top = log_weights.max()
    if not np.isfinite(top):
        raise DomainError("no event has finite weight")
    w = np.exp(log_weights - top)
    return w / w.sum()


def attach_weights(events, log_weights: np.ndarray) -> list[JointAssociationEvent]:
    """Return the event list with log and normalized weights filled in."""
    q = normalize_log_weights(log_weights)
    return [
        JointAssociationEvent(assignment=ev.assignment, cardinalities=ev.cardinalities,
                              log_weight=float(lw), normalized_weight=float(p))
        for ev, lw, p in zip(events, log_weights, q)
    ]
