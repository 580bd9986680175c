import numpy as np
import pytest

from conftest import random_spd
from kfautotune import benchmarks
from kfautotune.errors import NumericalError
from kfautotune.kalman import StateEstimate, predict, update
from kfautotune.statespace import DiscreteModel, discretize


def scalar_model(r=1.0, q=0.0):
    return DiscreteModel(F=[[1.0]], B=[[0.0]], H=[[1.0]], Q=[[q]], R=[[r]], dt=1.0)


def random_model(rng, n_x=3, n_z=2):
    return DiscreteModel(
        F=rng.standard_normal((n_x, n_x)),
        B=rng.standard_normal((n_x, 1)),
        H=rng.standard_normal((n_z, n_x)),
        Q=random_spd(rng, n_x, 0.1),
        R=random_spd(rng, n_z, 0.5),
        dt=1.0,
    )


class TestPredict:
    def test_identity_dynamics_is_noop(self):
        model = DiscreteModel(F=np.eye(2), B=np.zeros((2, 1)), H=np.eye(2),
                              Q=np.zeros((2, 2)), R=np.eye(2), dt=1.0)
        prior = StateEstimate(mean=[1.0, -2.0], cov=np.diag([0.5, 2.0]))
        pred = predict(prior, model, [0.0])
        np.testing.assert_array_equal(pred.mean, prior.mean)
        np.testing.assert_array_equal(pred.cov, prior.cov)

    def test_tracking1d_control_response(self):
        model = discretize(benchmarks.build("tracking1d", [1.0, 0.1]), 0.1)
        prior = StateEstimate(mean=[0.0, 0.0], cov=1e-4 * np.eye(2))
        pred = predict(prior, model, [1.0])
        np.testing.assert_allclose(pred.mean, [0.005, 0.1], atol=1e-15)

    def test_covariance_matches_naive_triple_loop(self, rng):
        model = random_model(rng)
        p = random_spd(rng, 3)
        pred = predict(StateEstimate(mean=rng.standard_normal(3), cov=p), model, [0.3])
        n = 3
        oracle = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                acc = model.Q[i, j]
                for a in range(n):
                    for b in range(n):
                        acc += model.F[i, a] * p[a, b] * model.F[j, b]
                oracle[i, j] = acc
        np.testing.assert_allclose(pred.cov, 0.5 * (oracle + oracle.T), rtol=1e-12, atol=1e-12)

    def test_dimension_mismatch(self):
        model = scalar_model()
        with pytest.raises(ValueError):
            predict(StateEstimate(mean=[0.0, 0.0], cov=np.eye(2)), model, [0.0])


class TestUpdate:
    def test_scalar_hand_computation(self):
        model = scalar_model(r=1.0)
        pred = StateEstimate(mean=[0.0], cov=[[1.0]])
        post, rec = update(pred, model, [2.0])
        assert rec.innov_cov[0, 0] == pytest.approx(2.0)
        assert rec.gain[0, 0] == pytest.approx(0.5)
        assert post.mean[0] == pytest.approx(1.0)
        assert post.cov[0, 0] == pytest.approx(0.5)

    def test_infinite_noise_limit_keeps_prior(self, rng):
        model = random_model(rng)
        pred = StateEstimate(mean=rng.standard_normal(3), cov=random_spd(rng, 3))
        z = rng.standard_normal(2)
        post_ref, rec_ref = update(pred, DiscreteModel(
            F=model.F, B=model.B, H=model.H, Q=model.Q, R=model.R, dt=1.0), z)
        big = DiscreteModel(F=model.F, B=model.B, H=model.H, Q=model.Q,
                            R=1e12 * model.R, dt=1.0)
        post, _ = update(pred, big, z)
        step_scale = np.abs(rec_ref.gain @ rec_ref.innovation).max()
        assert np.abs(post.mean - pred.mean).max() <= 1e-6 * step_scale

    def test_joseph_form_oracle(self, rng):
        for _ in range(5):
            model = random_model(rng)
            pred = StateEstimate(mean=rng.standard_normal(3), cov=random_spd(rng, 3))
            post, rec = update(pred, model, rng.standard_normal(2))
            ikh = np.eye(3) - rec.gain @ model.H
            joseph = ikh @ pred.cov @ ikh.T + rec.gain @ model.R @ rec.gain.T
            np.testing.assert_allclose(post.cov, joseph, rtol=1e-8, atol=1e-10)

    def test_posterior_never_exceeds_prior(self, rng):
        for _ in range(5):
            model = random_model(rng)
            pred = StateEstimate(mean=rng.standard_normal(3), cov=random_spd(rng, 3))
            post, _ = update(pred, model, rng.standard_normal(2))
            assert np.linalg.eigvalsh(pred.cov - post.cov).min() >= -1e-10

    def test_zero_innovation_keeps_mean(self, rng):
        model = random_model(rng)
        pred = StateEstimate(mean=rng.standard_normal(3), cov=random_spd(rng, 3))
        post, rec = update(pred, model, model.H @ pred.mean)
        np.testing.assert_array_equal(post.mean, pred.mean)
        np.testing.assert_array_equal(rec.innovation, np.zeros(2))

    def test_innovation_cov_pd_with_pd_r(self, rng):
        model = random_model(rng)
        pred = StateEstimate(mean=np.zeros(3), cov=random_spd(rng, 3))
        _, rec = update(pred, model, np.zeros(2))
        assert np.linalg.eigvalsh(rec.innov_cov).min() > 0


class TestStateEstimate:
    def test_rejects_asymmetric_cov(self):
        with pytest.raises(NumericalError):
            StateEstimate(mean=[0.0, 0.0], cov=[[1.0, 0.5], [0.0, 1.0]])

    def test_rejects_indefinite_cov(self):
        with pytest.raises(NumericalError) as excinfo:
            StateEstimate(mean=[0.0, 0.0], cov=[[1.0, 0.0], [0.0, -1.0]])
        assert excinfo.value.matrix is not None
