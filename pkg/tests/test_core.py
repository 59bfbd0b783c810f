import numpy as np
import pytest

from conftest import random_spd
from ggiwtrack import linalg
from ggiwtrack.core import (
    GgiwState,
    MotionModel,
    distortion_matrix,
    extent_from_shape,
    predict,
    predict_extent,
    predict_kinematic,
    predict_rate,
)
from ggiwtrack.errors import DomainError


def make_state(**overrides):
    base = dict(m=[0.0, -300.0, 11.0, 7.7], P=np.eye(4), v=10.0,
                V=np.diag([50.0, 50.0]), alpha=80.0, beta=1.0)
    base.update(overrides)
    return GgiwState(**base)


def make_model(**overrides):
    return MotionModel.constant_velocity(**overrides)


class TestGgiwState:
    def test_rejects_small_dof(self):
        with pytest.raises(DomainError):
            make_state(v=6.0)

    def test_rejects_nonpositive_gamma(self):
        with pytest.raises(DomainError):
            make_state(alpha=0.0)

    def test_extent_and_rate_means(self):
        st = make_state()
        assert np.allclose(st.extent_mean(), np.diag([12.5, 12.5]))
        assert st.rate_mean() == pytest.approx(80.0)


class TestMotionModel:
    def test_constant_velocity_layout(self):
        model = make_model(dt=2.0)
        expected = np.array([[1, 0, 2, 0], [0, 1, 0, 2], [0, 0, 1, 0], [0, 0, 0, 1.0]])
        assert np.array_equal(model.Phi, expected)
        assert np.array_equal(model.H, np.array([[1, 0, 0, 0], [0, 1, 0, 0.0]]))

    def test_default_evolution_matrix_is_mean_preserving(self):
        model = make_model(tau=50.0)
        assert np.allclose(model.E, np.eye(2) / np.sqrt(50.0))

    def test_rejects_bad_forgetting_factor(self):
        with pytest.raises(DomainError):
            make_model(iota=1.0)

    def test_rejects_singular_evolution(self):
        with pytest.raises(DomainError):
            make_model(E=np.zeros((2, 2)))


class TestPredictKinematic:
    def test_identity_dynamics(self):
        st = make_state()
        model = MotionModel(Phi=np.eye(4), G=np.zeros((4, 4)),
                            H=np.hstack([np.eye(2), np.zeros((2, 2))]),
                            R=np.diag([0.01, 0.01]))
        m_pred, p_pred = predict_kinematic(st, model)
        assert np.allclose(m_pred, st.m)
        assert np.allclose(p_pred, st.P)

    def test_crossing_target_one_step(self):
        m_pred, _ = predict_kinematic(make_state(), make_model(dt=1.0))
        assert np.allclose(m_pred, [11.0, -292.3, 11.0, 7.7])

    def test_noise_addition(self):
        model = MotionModel(Phi=np.eye(4), G=np.diag([1, 1, 0.1, 0.1]),
                            H=np.hstack([np.eye(2), np.zeros((2, 2))]),
                            R=np.diag([0.01, 0.01]))
        _, p_pred = predict_kinematic(make_state(), model)
        assert np.allclose(p_pred, np.diag([2.0, 2.0, 1.1, 1.1]))


class TestPredictExtent:
    def test_dof_example(self):
        # gamma = 4; 2*4*5*3*2/(16*8) + 8
        st = make_state(v=10.0)
        v_pred, _ = predict_extent(st, make_model(tau=4.0))
        assert v_pred == pytest.approx(9.875)

    def test_scale_identity(self, rng):
        # the literal scale recursion: V_pred = (tau/gamma)(v_pred-6) E V E^T
        for _ in range(20):
            vmat = random_spd(rng, scale=20.0) + 10 * np.eye(2)
            tau = rng.uniform(2.5, 80.0)
            st = make_state(v=rng.uniform(8.0, 60.0), V=vmat)
            model = make_model(tau=tau, E=np.eye(2))
            gamma = st.v - 6.0
            v_pred, v_scale = predict_extent(st, model)
            assert np.allclose(v_scale, (tau / gamma) * (v_pred - 6.0) * vmat)

    def test_predicted_dof_exceeds_six(self, rng):
        for _ in range(50):
            st = make_state(v=rng.uniform(6.0, 100.0) + 1e-6)
            v_pred, _ = predict_extent(st, make_model(tau=rng.uniform(0.5, 100.0)))
            assert v_pred > 6.0

    def test_mean_preserved_with_default_evolution(self):
        st = make_state(v=30.0)
        model = make_model(tau=50.0)
        v_pred, v_scale = predict_extent(st, model)
        pred_mean = linalg.inverse_wishart_mean(v_pred, v_scale, 2)
        assert np.allclose(pred_mean, st.extent_mean())

    def test_rejects_exhausted_dof(self):
        st = make_state(v=6.0 + 1e-12)
        object.__setattr__(st, "v", 6.0)  # bypass the constructor check
        with pytest.raises(DomainError):
            predict_extent(st, make_model())


class TestPredictRate:
    def test_mean_preserving(self):
        st = make_state(alpha=4.0, beta=2.0)
        a, b = predict_rate(st, make_model(iota=2.0))
        assert (a, b) == (2.0, 1.0)
        assert a / b == pytest.approx(4.0 / 2.0)

    def test_limit_of_no_forgetting(self):
        st = make_state(alpha=4.0, beta=2.0)
        a, b = predict_rate(st, make_model(iota=1.0 + 1e-12))
        assert a == pytest.approx(4.0)
        assert b == pytest.approx(2.0)

    def test_division(self):
        st = make_state(alpha=80.0, beta=1.0)
        assert predict_rate(st, make_model(iota=1.25)) == (64.0, 0.8)

    def test_variance_grows_by_forgetting_factor(self):
        st = make_state(alpha=9.0, beta=3.0)
        iota = 1.7
        a, b = predict_rate(st, make_model(iota=iota))
        assert a / b == pytest.approx(st.alpha / st.beta)
        assert (a / b**2) == pytest.approx(iota * st.alpha / st.beta**2)


class TestDistortionMatrix:
    def test_no_distortion(self):
        model = MotionModel(Phi=np.eye(4), G=np.zeros((4, 4)),
                            H=np.hstack([np.eye(2), np.zeros((2, 2))]),
                            R=np.zeros((2, 2)), s=1.0)
        x = np.diag([3.0, 7.0])
        d = distortion_matrix(x, model)
        assert np.allclose(d @ x @ d.T, x)

    def test_diagonal_closed_form(self):
        model = make_model(s=0.25)
        x = np.diag([4.0, 4.0])
        d = distortion_matrix(x, model)
        assert np.allclose(d, np.diag([np.sqrt(1.01) / 2.0] * 2))

    def test_spread_identity_random(self, rng):
        model = make_model(s=0.25)
        for _ in range(1000):
            x = random_spd(rng, scale=10.0 ** rng.integers(-1, 3))
            d = distortion_matrix(x, model)
            lhs = d @ x @ d.T
            rhs = model.s * x + model.R
            assert np.linalg.norm(lhs - rhs) <= 1e-8 * np.linalg.norm(rhs)

    def test_rejects_singular_extent(self):
        with pytest.raises(DomainError):
            distortion_matrix(np.diag([1.0, 0.0]), make_model())


class TestExtentFromShape:
    def test_circle(self, rng):
        assert np.allclose(extent_from_shape((2.0, 2.0), rng.uniform(-3, 3)), np.eye(2))

    def test_crossing_target_shape(self):
        theta = -np.pi / 3
        c, s = np.cos(theta), np.sin(theta)
        rot = np.array([[c, -s], [s, c]])
        expected = rot @ np.diag([900.0, 225.0]) @ rot.T
        assert np.allclose(extent_from_shape((60.0, 30.0), theta), expected)

    def test_orientation_period(self, rng):
        theta = rng.uniform(-np.pi, np.pi)
        a = extent_from_shape((8.0, 3.0), theta)
        b = extent_from_shape((8.0, 3.0), theta + np.pi)
        assert np.allclose(a, b)

    def test_eigenstructure(self, rng):
        l1, l2 = 10.0, 4.0
        theta = rng.uniform(0, np.pi)
        x = extent_from_shape((l1, l2), theta)
        w, q = np.linalg.eigh(x)
        assert np.allclose(np.sort(w), [(l2 / 2) ** 2, (l1 / 2) ** 2])
        principal = q[:, 1]
        angle = np.arctan2(principal[1], principal[0]) % np.pi
        assert np.isclose(angle, theta % np.pi, atol=1e-9)

    def test_rejects_nonpositive_length(self):
        with pytest.raises(DomainError):
            extent_from_shape((0.0, 1.0), 0.0)


def test_full_predict_composes(loose_state, cv_model):
    out = predict(loose_state, cv_model)
    m_ref, p_ref = predict_kinematic(loose_state, cv_model)
    v_ref, vm_ref = predict_extent(loose_state, cv_model)
    a_ref, b_ref = predict_rate(loose_state, cv_model)
    assert np.allclose(out.m, m_ref)
    assert np.allclose(out.P, p_ref)
    assert out.v == pytest.approx(v_ref)
    assert np.allclose(out.V, vm_ref)
    assert (out.alpha, out.beta) == (a_ref, b_ref)
