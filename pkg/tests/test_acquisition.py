import math

import numpy as np
import pytest
import scipy.integrate
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from kfautotune.acquisition import (DirectConfig, SearchSpace, direct_maximize,
                                    expected_improvement, student_t_cdf, student_t_pdf)


def ei_quadrature(best, u, sigma, dof):
    z_star = (best - u) / sigma

    def integrand(z):
        return (z_star - z) * scipy.stats.t.pdf(z, dof)

    value, _ = scipy.integrate.quad(integrand, -np.inf, z_star, epsabs=1e-13, epsrel=1e-11)
    return sigma * value


class TestStudentT:
    def test_cdf_at_zero(self):
        for dof in (1.0, 2.5, 30.0):
            assert student_t_cdf(0.0, dof) == pytest.approx(0.5)

    def test_cauchy_closed_form(self):
        assert student_t_cdf(1.0, 1.0) == pytest.approx(0.75, abs=1e-12)
        assert student_t_cdf(-1.0, 1.0) == pytest.approx(0.25, abs=1e-12)

    @given(st.floats(min_value=-20.0, max_value=20.0),
           st.floats(min_value=0.5, max_value=200.0))
    @settings(max_examples=80, deadline=None)
    def test_cdf_symmetry(self, z, dof):
        assert student_t_cdf(-z, dof) == pytest.approx(1.0 - student_t_cdf(z, dof), abs=1e-12)

    def test_matches_scipy(self, rng):
        for _ in range(20):
            z = float(rng.uniform(-6, 6))
            dof = float(rng.uniform(0.7, 80))
            assert student_t_cdf(z, dof) == pytest.approx(scipy.stats.t.cdf(z, dof), abs=1e-12)
            assert student_t_pdf(z, dof) == pytest.approx(scipy.stats.t.pdf(z, dof), abs=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            student_t_cdf(0.0, 0.0)
        with pytest.raises(ValueError):
            student_t_pdf(0.0, -1.0)


class TestExpectedImprovement:
    def test_deterministic_improvement_limit(self):
        # sigma -> 0 with u < best: EI approaches the certain gain best - u
        assert expected_improvement(1.0, 0.4, 1e-12, 5.0) == pytest.approx(0.6, rel=1e-9)

    def test_vanishing_tail(self):
        # the t tail decays polynomially, so the mean must sit far above best
        sigma = 0.7
        assert expected_improvement(0.0, 100.0, sigma, 5.0) < 1e-6 * sigma

    def test_nonnegative_and_errors(self):
        assert expected_improvement(-3.0, 10.0, 0.1, 5.0) >= 0.0
        with pytest.raises(ValueError):
            expected_improvement(0.0, 0.0, 0.0, 5.0)
        with pytest.raises(ValueError):
            expected_improvement(0.0, 0.0, 1.0, 2.0)

    def test_matches_quadrature_oracle(self, rng):
        for _ in range(25):
            best = float(rng.uniform(-1, 1))
            u = best + float(rng.uniform(-2.5, 2.5))
            sigma = float(rng.uniform(0.05, 3.0))
            dof = float(rng.uniform(2.2, 60.0))
            ours = expected_improvement(best, u, sigma, dof)
            oracle = ei_quadrature(best, u, sigma, dof)
            assert ours == pytest.approx(oracle, rel=1e-6, abs=1e-12)

    def test_gaussian_mode_matches_normal_quadrature(self, rng):
        for _ in range(10):
            best, u, sigma = 0.3, float(rng.uniform(-1, 1)), float(rng.uniform(0.1, 2.0))
            z = (best - u) / sigma
            oracle = (best - u) * scipy.stats.norm.cdf(z) + sigma * scipy.stats.norm.pdf(z)
            assert expected_improvement(best, u, sigma, math.inf) == pytest.approx(oracle, rel=1e-12)

    def test_heavy_tail_limit_converges_to_gaussian(self, rng):
        for _ in range(10):
            best, u = float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1))
            sigma = float(rng.uniform(0.2, 2.0))
            t_ei = expected_improvement(best, u, sigma, 1e6)
            g_ei = expected_improvement(best, u, sigma, math.inf)
            assert abs(t_ei - g_ei) < 1e-4

    @given(st.floats(min_value=0.05, max_value=1.0), st.floats(min_value=0.1, max_value=2.0))
    @settings(max_examples=40, deadline=None)
    def test_monotone_in_sigma_when_no_certain_gain(self, s_small, step):
        best, u, dof = 0.0, 0.5, 8.0  # best - u < 0
        assert expected_improvement(best, u, s_small + step, dof) >= \
            expected_improvement(best, u, s_small, dof) - 1e-12

    @given(st.floats(min_value=-1.0, max_value=1.0), st.floats(min_value=0.01, max_value=1.5))
    @settings(max_examples=40, deadline=None)
    def test_monotone_in_best(self, best, delta):
        u, sigma, dof = 0.2, 0.7, 6.0
        assert expected_improvement(best + delta, u, sigma, dof) >= \
            expected_improvement(best, u, sigma, dof) - 1e-12


class TestDirect:
    def test_quadratic_interior_optimum(self):
        space = SearchSpace(lower=[-2.0, 0.0], upper=[4.0, 3.0])
        target = np.array([1.3, 2.1])
        q, _ = direct_maximize(lambda x: -np.sum((x - target) ** 2), space,
                               DirectConfig(max_evals=2000))
        assert np.abs(q - target).max() < 1e-3

    def test_constant_objective(self):
        space = SearchSpace(lower=[0.0], upper=[1.0])
        q, val = direct_maximize(lambda x: 4.25, space, DirectConfig(max_evals=100))
        assert val == 4.25
        assert space.contains(q)

    def test_multimodal_matches_grid_oracle(self):
        def shifted_branin(q):
            x, y = q
            return -((y - 5.1 / (4 * math.pi**2) * x**2 + 5 / math.pi * x - 6) ** 2
                     + 10 * (1 - 1 / (8 * math.pi)) * math.cos(x) + 10)

        space = SearchSpace(lower=[-5.0, 0.0], upper=[10.0, 15.0])
        q, val = direct_maximize(shifted_branin, space, DirectConfig(max_evals=2000))
        xs = np.linspace(-5, 10, 1000)
        ys = np.linspace(0, 15, 1000)
        xg, yg = np.meshgrid(xs, ys)
        grid = -((yg - 5.1 / (4 * math.pi**2) * xg**2 + 5 / math.pi * xg - 6) ** 2
                 + 10 * (1 - 1 / (8 * math.pi)) * np.cos(xg) + 10)
        assert val >= grid.max() - 1e-2

    def test_never_leaves_box_and_respects_budget(self):
        space = SearchSpace(lower=[-1.0, 2.0], upper=[1.0, 5.0])
        seen = []

        def f(q):
            seen.append(np.array(q))
            return float(np.sin(3 * q[0]) + q[1])

        cfg = DirectConfig(max_evals=333)
        q, _ = direct_maximize(f, space, cfg)
        assert len(seen) <= 333
        assert space.contains(q)
        for point in seen:
            assert space.contains(point)

    def test_deterministic(self):
        space = SearchSpace(lower=[0.0, 0.0], upper=[1.0, 1.0])

        def f(q):
            return -abs(q[0] - 0.37) - abs(q[1] - 0.81)

        r1 = direct_maximize(f, space, DirectConfig(max_evals=500))
        r2 = direct_maximize(f, space, DirectConfig(max_evals=500))
        np.testing.assert_array_equal(r1[0], r2[0])
        assert r1[1] == r2[1]

    def test_nan_objective_raises(self):
        space = SearchSpace(lower=[0.0], upper=[1.0])
        with pytest.raises(ValueError):
            direct_maximize(lambda q: float("nan"), space, DirectConfig(max_evals=10))


class TestSearchSpace:
    def test_validation(self):
        with pytest.raises(ValueError):
            SearchSpace(lower=[1.0], upper=[1.0])

    def test_unit_mapping_round_trip(self):
        space = SearchSpace(lower=[-1.0, 3.0], upper=[2.0, 9.0])
        q = np.array([0.5, 4.0])
        np.testing.assert_allclose(space.from_unit(space.to_unit(q)), q, atol=1e-14)
