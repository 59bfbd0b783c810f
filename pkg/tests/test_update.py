import numpy as np
import pytest

from conftest import random_spd
from ggiwtrack._kernels import event_stats
from ggiwtrack.association import (
    JointAssociationEvent,
    MeasurementFrame,
    pack_events,
)
from ggiwtrack.core import GgiwState, distortion_matrix
from ggiwtrack.errors import DomainError
from ggiwtrack.updates import (
    VbConfig,
    marginal_measurement_update,
    marginal_probabilities,
    measurement_update,
    update_extent,
    update_kinematic,
    update_rate,
    vb_measurement_update,
)

H2 = np.hstack([np.eye(2), np.zeros((2, 2))])


def forced_events(assignments, n_targets):
    return [JointAssociationEvent.from_assignment(a, n_targets) for a in assignments]


class TestVbConfig:
    def test_rejects_zero_iterations(self):
        with pytest.raises(DomainError):
            VbConfig(n_vb=0)

    def test_rejects_unknown_scheme(self):
        with pytest.raises(DomainError):
            VbConfig(scheme="psychic")


class TestUpdateRate:
    def test_single_event(self):
        assert update_rate(4.0, 2.0, np.array([1.0]), np.array([3.0])) == (7.0, 3.0)

    def test_missed_detection_behaviour(self):
        a, b = update_rate(4.0, 2.0, np.array([0.6, 0.4]), np.array([0.0, 0.0]))
        assert a == 4.0
        assert b == 3.0
        assert a / b < 4.0 / 2.0

    def test_weighted_average_counts(self):
        a, b = update_rate(1.0, 1.0, np.array([0.5, 0.5]), np.array([2.0, 4.0]))
        assert a == pytest.approx(1.0 + 3.0)
        assert b == 2.0

    def test_rate_increment_is_exactly_one(self, rng):
        # the update adds the literal constant, never the float sum of the
        # normalized weights
        q = rng.uniform(size=17)
        q /= q.sum()
        _, b = update_rate(3.3, 1.7, q, rng.integers(0, 5, size=17).astype(float))
        assert b == 1.7 + 1.0


class TestUpdateKinematic:
    def test_zero_innovation(self):
        m = np.array([1.0, 2.0, 0.5, -0.5])
        p = np.diag([4.0, 4.0, 1.0, 1.0])
        # single event with one measurement exactly at the projected mean
        sy = np.array([[1.0, 2.0]])
        m_post, p_post = update_kinematic(m, p, np.array([1.0]), np.array([1.0]),
                                          sy, np.eye(2), np.eye(2), H2)
        assert np.allclose(m_post, m)
        assert np.all(np.linalg.eigvalsh(p - p_post) >= -1e-12)

    def test_confident_prior_ignores_measurements(self):
        m = np.zeros(4)
        p = 1e-14 * np.eye(4)
        sy = np.array([[5.0, -3.0]])
        m_post, _ = update_kinematic(m, p, np.array([1.0]), np.array([1.0]),
                                     sy, np.eye(2), np.eye(2), H2)
        assert np.allclose(m_post, m, atol=1e-10)

    def test_scalar_kalman_arithmetic(self):
        # 1-d analogue: P=1, H=1, pseudo-noise 1, count 1, innovation 2
        m = np.array([0.0])
        p = np.array([[1.0]])
        h = np.array([[1.0]])
        sy = np.array([[2.0]])
        m_post, p_post = update_kinematic(m, p, np.array([1.0]), np.array([1.0]),
                                          sy, np.array([[1.0]]), np.array([[1.0]]), h)
        assert m_post[0] == pytest.approx(1.0)
        assert p_post[0, 0] == pytest.approx(0.5)

    def test_coasts_without_expected_measurements(self):
        m = np.array([1.0, 2.0, 0.0, 0.0])
        p = np.eye(4)
        m_post, p_post = update_kinematic(m, p, np.array([1.0]), np.array([0.0]),
                                          np.zeros((1, 2)), np.eye(2), np.eye(2), H2)
        assert np.array_equal(m_post, m)
        assert np.array_equal(p_post, p)


class TestUpdateExtent:
    def test_zero_weight_unchanged(self):
        v, vmat = update_extent(10.0, np.diag([5.0, 5.0]), np.array([1.0]),
                                np.array([0.0]), np.zeros((1, 2)), np.zeros((1, 3)),
                                np.zeros(4), np.eye(4), np.eye(2), H2)
        assert v == 10.0
        assert np.allclose(vmat, np.diag([5.0, 5.0]))

    def test_single_measurement_at_posterior_mean(self):
        # phi=1, y = H m_post, P_post = 0, D = I: scatter contribution is zero
        m_post = np.array([1.0, 0.0, 0.0, 0.0])
        sy = np.array([[1.0, 0.0]])
        syy = np.array([[1.0, 0.0, 0.0]])
        v, vmat = update_extent(10.0, np.diag([5.0, 5.0]), np.array([1.0]),
                                np.array([1.0]), sy, syy, m_post,
                                np.zeros((4, 4)), np.eye(2), H2)
        assert v == 11.0
        assert np.allclose(vmat, np.diag([5.0, 5.0]))

    def test_two_point_scatter(self):
        # phi=2 with points (0,0) and (2,0) centred on H m_post = (1,0)
        m_post = np.array([1.0, 0.0, 0.0, 0.0])
        sy = np.array([[2.0, 0.0]])
        syy = np.array([[4.0, 0.0, 0.0]])
        v, vmat = update_extent(10.0, np.diag([5.0, 5.0]), np.array([1.0]),
                                np.array([2.0]), sy, syy, m_post,
                                np.zeros((4, 4)), np.eye(2), H2)
        assert v == 12.0
        assert np.allclose(vmat, np.diag([5.0, 5.0]) + np.array([[2.0, 0.0], [0.0, 0.0]]))

    def test_matches_per_event_formula(self, rng):
        # oracle: the literal event-by-event auxiliary matrix
        # T_l = D^-1 (Ybar_l + phi_l (ybar_l - Hm)(ybar_l - Hm)^T
        #             + phi_l H P H^T) D^-T, weighted by q_l
        m_k, n_ev = 6, 30
        pts = rng.normal(scale=2.0, size=(m_k, 2))
        assign = rng.integers(0, 2, size=(n_ev, m_k)).astype(np.int32)
        counts, sy, syy = event_stats(assign, pts, 1)
        q = rng.uniform(size=n_ev)
        q /= q.sum()
        m_post = rng.normal(size=4)
        p_post = random_spd(rng, d=4)
        d_mat = random_spd(rng) + np.eye(2)
        v0, vmat0 = 9.0, random_spd(rng, scale=4.0)

        d_inv = np.linalg.inv(d_mat)
        hm = H2 @ m_post
        expected = vmat0.copy()
        for l in range(n_ev):
            phi = counts[l, 1]
            if phi == 0:
                continue
            members = pts[assign[l] == 1]
            ybar = members.mean(axis=0)
            r = members - ybar
            ybar_spread = r.T @ r
            t_l = d_inv @ (ybar_spread + phi * np.outer(ybar - hm, ybar - hm)
                           + phi * H2 @ p_post @ H2.T) @ d_inv.T
            expected = expected + q[l] * t_l
        v_post, vmat_post = update_extent(v0, vmat0, q, counts[:, 1], sy[:, 0],
                                          syy[:, 0], m_post, p_post, d_mat, H2)
        assert v_post == pytest.approx(v0 + float(q @ counts[:, 1]))
        assert np.allclose(vmat_post, 0.5 * (expected + expected.T), rtol=1e-10)

    def test_rejects_singular_distortion(self):
        with pytest.raises(DomainError):
            update_extent(10.0, np.eye(2), np.array([1.0]), np.array([1.0]),
                          np.ones((1, 2)), np.ones((1, 3)), np.zeros(4),
                          np.eye(4), np.zeros((2, 2)), H2)


class TestVbMeasurementUpdate:
    def test_single_pass_matches_hand_composition(self, loose_state, cv_model):
        y = np.array([[2.5, -1.0], [3.5, 0.0]])
        frame = MeasurementFrame(points=y)
        events = forced_events([[1, 1]], 1)
        cfg = VbConfig(n_vb=1, scheme="full_enumeration")
        post = vb_measurement_update([loose_state], frame, cfg, cv_model,
                                     clutter_rate=0.0, surveillance_volume=1e4,
                                     events=events)[0]
        # oracle: compose the three single-target updates with q = 1
        x_pred = loose_state.extent_mean()
        d_mat = distortion_matrix(x_pred, cv_model)
        assign, _ = pack_events(events, 1, 2)
        counts, sy, syy = event_stats(assign, y, 1)
        q = np.array([1.0])
        m_ref, p_ref = update_kinematic(loose_state.m, loose_state.P, q, counts[:, 1],
                                        sy[:, 0], x_pred, d_mat, cv_model.H)
        v_ref, vm_ref = update_extent(loose_state.v, loose_state.V, q, counts[:, 1],
                                      sy[:, 0], syy[:, 0], m_ref, p_ref, d_mat,
                                      cv_model.H)
        a_ref, b_ref = update_rate(loose_state.alpha, loose_state.beta, q, counts[:, 1])
        assert np.allclose(post.m, m_ref)
        assert np.allclose(post.P, p_ref)
        assert post.v == pytest.approx(v_ref)
        assert np.allclose(post.V, vm_ref)
        assert (post.alpha, post.beta) == (a_ref, b_ref)

    def test_empty_frame(self, loose_state, cv_model):
        frame = MeasurementFrame(points=np.zeros((0, 2)))
        cfg = VbConfig(n_vb=5, scheme="full_enumeration")
        post = vb_measurement_update([loose_state], frame, cfg, cv_model,
                                     clutter_rate=5.0, surveillance_volume=1e4)[0]
        assert np.allclose(post.m, loose_state.m)
        assert np.allclose(post.P, loose_state.P)
        assert post.v == loose_state.v
        assert np.allclose(post.V, loose_state.V)
        assert post.alpha == loose_state.alpha
        assert post.beta == loose_state.beta + 1.0

    def test_weights_reach_fixed_point(self, cv_model, rng):
        # on a well-separated frame the final weights barely move when the
        # iteration budget is raised
        state1 = GgiwState(m=[0, 0, 1, 0.0], P=np.diag([25, 25, 4, 4.0]), v=20.0,
                           V=14.0 * np.diag([20.0, 20.0]), alpha=8.0, beta=1.0)
        state2 = GgiwState(m=[60, 0, 1, 0.0], P=np.diag([25, 25, 4, 4.0]), v=20.0,
                           V=14.0 * np.diag([20.0, 20.0]), alpha=8.0, beta=1.0)
        pts = np.vstack([rng.normal(scale=2.0, size=(4, 2)),
                         np.array([60.0, 0.0]) + rng.normal(scale=2.0, size=(4, 2))])
        frame = MeasurementFrame(points=pts)
        weights = {}
        for n_vb in (10, 50):
            trace = {}
            vb_measurement_update([state1, state2], frame,
                                  VbConfig(n_vb=n_vb, scheme="full_enumeration"),
                                  cv_model, clutter_rate=1.0, surveillance_volume=1e5,
                                  trace=trace)
            weights[n_vb] = trace["weights"]
        assert np.max(np.abs(weights[10] - weights[50])) < 1e-6

    def test_determinism(self, loose_state, cv_model, rng):
        frame = MeasurementFrame(points=rng.normal(scale=3.0, size=(5, 2)))
        cfg = VbConfig(n_vb=7, scheme="full_enumeration")
        a = vb_measurement_update([loose_state], frame, cfg, cv_model, 2.0, 1e4)[0]
        b = vb_measurement_update([loose_state], frame, cfg, cv_model, 2.0, 1e4)[0]
        assert np.array_equal(a.m, b.m)
        assert np.array_equal(a.P, b.P)
        assert a.v == b.v
        assert np.array_equal(a.V, b.V)
        assert (a.alpha, a.beta) == (b.alpha, b.beta)

    def test_posterior_remains_valid_ggiw(self, loose_state, cv_model, rng):
        # conjugacy: the posterior parameter types never leave the family
        for _ in range(10):
            frame = MeasurementFrame(points=rng.normal(scale=4.0, size=(6, 2)))
            post = vb_measurement_update(
                [loose_state], frame, VbConfig(n_vb=3, scheme="full_enumeration"),
                cv_model, 2.0, 1e4)[0]
            assert isinstance(post, GgiwState)  # constructor enforces invariants

    def test_increment_identities(self, loose_state, cv_model, rng):
        frame = MeasurementFrame(points=rng.normal(scale=3.0, size=(6, 2)))
        post = vb_measurement_update(
            [loose_state], frame, VbConfig(n_vb=4, scheme="full_enumeration"),
            cv_model, 2.0, 1e4)[0]
        assert post.beta == loose_state.beta + 1.0
        assert post.v - loose_state.v == pytest.approx(post.alpha - loose_state.alpha,
                                                       rel=1e-12)


class TestMarginalProbabilities:
    def test_single_target_no_clutter(self, cv_model, rng):
        frame = MeasurementFrame(points=rng.normal(scale=2.0, size=(5, 2)))
        eps = marginal_probabilities(frame, [np.zeros(4)], [np.eye(2)], [20.0],
                                     rho=0.0, lambda_c=0.0, h=cv_model.H)
        assert np.allclose(eps, 1.0)

    def test_identical_targets_split_evenly(self, cv_model, rng):
        frame = MeasurementFrame(points=rng.normal(scale=2.0, size=(4, 2)))
        eps = marginal_probabilities(frame, [np.zeros(4), np.zeros(4)],
                                     [np.eye(2), np.eye(2)], [20.0, 20.0],
                                     rho=1e-4, lambda_c=5.0, h=cv_model.H)
        assert np.allclose(eps[0], eps[1])

    def test_distant_measurement_goes_to_clutter(self, cv_model):
        frame = MeasurementFrame(points=np.array([[1e5, 1e5]]))
        eps = marginal_probabilities(frame, [np.zeros(4)], [np.eye(2)], [20.0],
                                     rho=1e-4, lambda_c=5.0, h=cv_model.H)
        assert eps[0, 0] == 0.0

    def test_columns_never_exceed_unit_mass(self, cv_model, rng):
        frame = MeasurementFrame(points=rng.normal(scale=3.0, size=(6, 2)))
        eps = marginal_probabilities(frame, [np.zeros(4), np.array([2.0, 1, 0, 0])],
                                     [np.eye(2), 2 * np.eye(2)], [20.0, 10.0],
                                     rho=1e-4, lambda_c=5.0, h=cv_model.H)
        assert np.all(eps >= 0.0)
        assert np.all(eps.sum(axis=0) <= 1.0 + 1e-12)


class TestMarginalMeasurementUpdate:
    def test_matches_forced_singleton_event(self, loose_state, cv_model):
        frame = MeasurementFrame(points=np.array([[3.0, 1.0]]))
        full = vb_measurement_update([loose_state], frame,
                                     VbConfig(n_vb=10, scheme="full_enumeration"),
                                     cv_model, clutter_rate=0.0,
                                     surveillance_volume=1e4)[0]
        marg = marginal_measurement_update([loose_state], frame,
                                           VbConfig(n_vb=10, scheme="marginal"),
                                           cv_model, clutter_rate=0.0,
                                           surveillance_volume=1e4)[0]
        assert np.allclose(full.m, marg.m, rtol=1e-12)
        assert np.allclose(full.P, marg.P, rtol=1e-12)
        assert full.v == pytest.approx(marg.v, rel=1e-12)
        assert np.allclose(full.V, marg.V, rtol=1e-10)
        assert full.alpha == pytest.approx(marg.alpha)
        assert full.beta == marg.beta

    def test_all_clutter_coasts(self, loose_state, cv_model):
        frame = MeasurementFrame(points=np.array([[1e6, 1e6]]))
        post = marginal_measurement_update([loose_state], frame,
                                           VbConfig(n_vb=5, scheme="marginal"),
                                           cv_model, clutter_rate=10.0,
                                           surveillance_volume=1e4)[0]
        assert np.allclose(post.m, loose_state.m)
        assert post.v == loose_state.v
        assert np.allclose(post.V, loose_state.V)
        assert post.alpha == loose_state.alpha
        assert post.beta == loose_state.beta + 1.0

    def test_mirror_symmetry(self, cv_model):
        mk = lambda y: GgiwState(m=[0.0, y, 1.0, 0.0], P=np.diag([25, 25, 4, 4.0]),
                                 v=20.0, V=14.0 * np.diag([20.0, 20.0]),
                                 alpha=8.0, beta=1.0)
        pts = np.array([[0.0, 10.0], [1.0, 11.0], [0.0, -10.0], [1.0, -11.0]])
        frame = MeasurementFrame(points=pts)
        post = marginal_measurement_update([mk(10.0), mk(-10.0)], frame,
                                           VbConfig(n_vb=10, scheme="marginal"),
                                           cv_model, clutter_rate=2.0,
                                           surveillance_volume=1e4)
        flip = np.diag([1.0, -1.0])
        assert np.allclose(post[0].m * np.array([1, -1, 1, -1]), post[1].m)
        assert np.allclose(flip @ post[0].V @ flip, post[1].V)
        assert post[0].alpha == pytest.approx(post[1].alpha)


def test_measurement_update_dispatch(loose_state, cv_model):
    frame = MeasurementFrame(points=np.array([[2.0, 0.5]]))
    via_dispatch = measurement_update([loose_state], frame,
                                      VbConfig(n_vb=3, scheme="marginal"), cv_model,
                                      1.0, 1e4)[0]
    direct = marginal_measurement_update([loose_state], frame,
                                         VbConfig(n_vb=3, scheme="marginal"),
                                         cv_model, 1.0, 1e4)[0]
    assert np.array_equal(via_dispatch.m, direct.m)
