"""β-variation sums, verdicts and the estimators built on them."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from constants import c_h
from errors import DomainError, EstimationError, ResolutionError
from simulate import Ensemble, Path, SingularFunction
from variation import (CONVERGED, DIVERGING, INCONCLUSIVE, PartitionSpec, additivity_check,
                       beta_variation_estimate, cascade_growth_rate, classify, dyadic_schedule,
                       ensemble_stats, grid_indices, holder_norm, hurst_estimate, renormalized_qv,
                       singular_measure_sum, variation_sum)


def random_path(seed, n=64):
    rng = np.random.default_rng(seed)
    return Path(0.0, 1.0 / n, np.concatenate(([0.0], np.cumsum(rng.standard_normal(n)))))


class TestPartition:
    def test_points(self):
        part = PartitionSpec(0.25, 0.75, 4)
        assert part.step == 0.125
        np.testing.assert_allclose(part.points, [0.25, 0.375, 0.5, 0.625, 0.75])

    @pytest.mark.parametrize('a,b,n', [(0.5, 0.5, 2), (-0.1, 1.0, 2), (0.0, 1.0, 0)])
    def test_rejects(self, a, b, n):
        with pytest.raises(DomainError):
            PartitionSpec(a, b, n)

    def test_grid_indices(self, linear_path):
        np.testing.assert_array_equal(grid_indices(linear_path, PartitionSpec(0.5, 1.0, 4)),
                                      [128, 160, 192, 224, 256])

    def test_finer_than_grid(self, linear_path):
        with pytest.raises(ResolutionError, match='finer'):
            grid_indices(linear_path, PartitionSpec(0.0, 1.0, 512))

    def test_off_grid(self, linear_path):
        with pytest.raises(ResolutionError, match='does not lie'):
            grid_indices(linear_path, PartitionSpec(0.0, 1.0, 3))

    def test_beyond_horizon(self, linear_path):
        with pytest.raises(DomainError, match='horizon'):
            grid_indices(linear_path, PartitionSpec(0.0, 2.0, 8))


class TestVariationSum:
    @pytest.mark.parametrize('beta', [1.0, 1.5, 2.0, 1 / 0.7])
    @pytest.mark.parametrize('n', [4, 16, 256])
    def test_linear_path(self, linear_path, beta, n):
        assert variation_sum(linear_path, beta, PartitionSpec(0.0, 1.0, n)) == pytest.approx(
            n ** (1.0 - beta), rel=1e-12)

    def test_ensemble_gives_one_value_per_path(self, small_ensemble):
        sums = variation_sum(small_ensemble, 2.0, PartitionSpec(0.0, 1.0, 8))
        assert sums.shape == (4,)
        assert sums[2] == pytest.approx(variation_sum(small_ensemble.path(2), 2.0, PartitionSpec(0.0, 1.0, 8)))

    def test_beta_below_one(self, linear_path):
        with pytest.raises(DomainError, match='beta must be >= 1'):
            variation_sum(linear_path, 0.9, PartitionSpec(0.0, 1.0, 4))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(min_value=0, max_value=10 ** 6), st.floats(min_value=-4.0, max_value=4.0),
           st.floats(min_value=1.0, max_value=4.0))
    def test_homogeneous(self, seed, c, beta):
        x = random_path(seed)
        part = PartitionSpec(0.0, 1.0, 16)
        scaled = variation_sum(x.with_values(c * x.values), beta, part)
        assert scaled == pytest.approx(abs(c) ** beta * variation_sum(x, beta, part), rel=1e-9, abs=1e-300)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(min_value=0, max_value=10 ** 6), st.floats(min_value=1.0, max_value=4.0))
    def test_minkowski(self, seed, beta):
        x, y = random_path(seed), random_path(seed + 1)
        part = PartitionSpec(0.0, 1.0, 32)
        norm = lambda p: variation_sum(p, beta, part) ** (1.0 / beta)  # noqa: E731
        assert norm(x.with_values(x.values + y.values)) <= norm(x) + norm(y) + 1e-9

    def test_additive_at_grid_step(self, bm_path):
        assert additivity_check(bm_path, 1.5, 0.0, 0.375, 1.0) == pytest.approx(0.0, abs=1e-10)

    def test_additivity_needs_order(self, bm_path):
        with pytest.raises(DomainError, match='a < b < c'):
            additivity_check(bm_path, 2.0, 0.0, 1.0, 0.5)


class TestSchedule:
    def test_dyadic(self):
        assert dyadic_schedule(256) == [8, 16, 32, 64, 128, 256]
        assert dyadic_schedule(96) == [2, 4, 8, 16, 32]
        assert dyadic_schedule(1024, levels=3) == [256, 512, 1024]

    def test_no_dyadic_divisor(self):
        with pytest.raises(ResolutionError):
            dyadic_schedule(3)


class TestClassify:
    def test_converged(self):
        assert classify([0.5, 1.0, 1.01, 0.99, 1.0]) == (CONVERGED, 1.0, 'finite')

    def test_stderr_widens_the_band(self):
        values = [1.0, 1.1, 0.95]
        assert classify(values)[0] == INCONCLUSIVE
        assert classify(values, stderr=[0.05, 0.05, 0.05])[0] == CONVERGED

    def test_diverging(self):
        assert classify([1.0, 2.0, 4.0, 8.0]) == (DIVERGING, None, 'infinite')

    def test_vanishing(self):
        assert classify([8.0, 4.0, 2.0, 1.0]) == (CONVERGED, 0.0, 'zero')

    def test_all_zero(self):
        assert classify([1.0, 0.0, 0.0, 0.0]) == (CONVERGED, 0.0, 'zero')

    @pytest.mark.parametrize('values', [[1.0, 2.0], [1.0, 2.0, 1.0, 2.0], [1.0, 1.4, 2.0, 2.8]])
    def test_inconclusive(self, values):
        assert classify(values) == (INCONCLUSIVE, None, None)


class TestBetaVariationEstimate:
    def test_brownian_quadratic_variation(self, bm_ensemble):
        est = beta_variation_estimate(bm_ensemble, 2.0)
        assert est.schedule == [8, 16, 32, 64, 128, 256]
        assert est.verdict == CONVERGED and est.limit == 'finite'
        assert est.final == pytest.approx(1.0, abs=0.05)
        assert est.n_paths == 1000
        assert len(est.stderr) == len(est.values)

    def test_brownian_fourth_variation_vanishes(self, bm_ensemble):
        est = beta_variation_estimate(bm_ensemble, 4.0)
        assert (est.verdict, est.limit) == (CONVERGED, 'zero')

    def test_brownian_first_variation_diverges(self, bm_ensemble):
        est = beta_variation_estimate(bm_ensemble, 1.0, growth=1.3)
        assert est.verdict == DIVERGING

    def test_fbm_critical_variation(self, fbm07_ensemble):
        est = beta_variation_estimate(fbm07_ensemble, 1 / 0.7, interval=(0.0, 1.0))
        assert est.verdict == CONVERGED
        assert est.final == pytest.approx(c_h(0.7), rel=0.05)

    def test_path_has_no_stderr(self, bm_path):
        est = beta_variation_estimate(bm_path, 2.0, schedule=[64, 128, 256, 512])
        assert est.stderr is None
        assert est.pairs[0][0] == 64
        data = est.to_dict()
        assert data['interval'] == [0.0, 1.0]
        assert data['verdict'] in (CONVERGED, DIVERGING, INCONCLUSIVE)

    def test_schedule_must_increase(self, bm_path):
        with pytest.raises(DomainError, match='strictly increasing'):
            beta_variation_estimate(bm_path, 2.0, schedule=[16, 16, 32])


class TestHurstEstimate:
    def test_brownian(self, bm_ensemble):
        assert hurst_estimate(bm_ensemble) == pytest.approx(0.5, abs=0.02)

    @pytest.mark.parametrize('fixture,h', [('fbm07_ensemble', 0.7), ('fbm03_ensemble', 0.3)])
    def test_fbm(self, request, fixture, h):
        ensemble = request.getfixturevalue(fixture)
        estimate, diagnostics = hurst_estimate(ensemble, return_diagnostics=True)
        assert estimate == pytest.approx(h, abs=0.02)
        assert diagnostics['regression'] == pytest.approx(h, abs=0.03)
        assert hurst_estimate(ensemble, method='regression') == diagnostics['regression']

    def test_smooth_path_is_rejected(self, linear_path):
        with pytest.raises(EstimationError, match='smoother') as info:
            hurst_estimate(linear_path)
        assert info.value.diagnostics['scaling_exponent'] == pytest.approx(1.0)

    def test_constant_path(self):
        with pytest.raises(EstimationError, match='Constant'):
            hurst_estimate(Path(0.0, 0.125, np.zeros(9)))

    def test_needs_even_steps(self):
        with pytest.raises(EstimationError, match='even'):
            hurst_estimate(random_path(1, n=5))

    def test_unknown_method(self, bm_path):
        with pytest.raises(DomainError, match='Unknown'):
            hurst_estimate(bm_path, method='wavelet')


class TestHolderNorm:
    @pytest.mark.parametrize('beta', [0.5, 1.0])
    def test_linear_path(self, linear_path, beta):
        assert holder_norm(linear_path, beta) == pytest.approx(1.0, rel=1e-9)

    def test_subsampling_cap(self, linear_path, caplog):
        assert holder_norm(linear_path, 1.0, cap=64) == pytest.approx(1.0, rel=1e-9)
        assert 'exceed cap' in caplog.text

    def test_ensemble(self, small_ensemble):
        norms = holder_norm(small_ensemble, 0.5, 0.0, 0.5)
        assert norms.shape == (4,)
        assert np.all(norms > 0)

    def test_order_range(self, linear_path):
        with pytest.raises(DomainError, match=r'\(0, 1\]'):
            holder_norm(linear_path, 1.5)


class TestSingularMeasureSum:
    @pytest.mark.parametrize('alpha', [-0.2, 0.2])
    def test_uniform_measure_has_a_finite_limit(self, alpha):
        lebesgue = SingularFunction(0.5, 12)
        values = [singular_measure_sum(lebesgue, alpha, PartitionSpec(0.0, 1.0, n)) for n in (64, 128, 256)]
        verdict, final, limit = classify(values, tol=0.05)
        assert (verdict, limit) == (CONVERGED, 'finite')
        assert final > 0

    def test_growth_rate_of_uniform_cascade(self):
        for alpha in (-0.3, 0.0, 0.3):
            assert cascade_growth_rate(0.5, alpha) == pytest.approx(1.0, rel=1e-12)
        assert cascade_growth_rate(0.1, -0.25) > 1.0 > cascade_growth_rate(0.1, 0.15)

    def test_mass_array_matches_cascade(self):
        phi = SingularFunction(0.3, 10)
        part = PartitionSpec(0.0, 1.0, 32)
        assert singular_measure_sum(phi.masses(), 0.1, part) == pytest.approx(
            singular_measure_sum(phi, 0.1, part), rel=1e-10)

    def test_interval_must_be_unit(self):
        with pytest.raises(DomainError, match=r'\[0, 1\]'):
            singular_measure_sum(SingularFunction(0.3, 8), 0.1, PartitionSpec(0.0, 0.5, 4))

    def test_power_of_two(self):
        with pytest.raises(DomainError, match='power of two'):
            singular_measure_sum(SingularFunction(0.3, 8), 0.1, PartitionSpec(0.0, 1.0, 12))

    def test_finer_than_cascade(self):
        with pytest.raises(ResolutionError, match='finer'):
            singular_measure_sum(SingularFunction(0.3, 4), 0.1, PartitionSpec(0.0, 1.0, 32))

    @pytest.mark.parametrize('masses', [[0.5, 0.25, 0.25], [1.5, -0.5]])
    def test_bad_masses(self, masses):
        with pytest.raises(DomainError):
            singular_measure_sum(masses, 0.1, PartitionSpec(0.0, 1.0, 1))


class TestRenormalizedQV:
    def test_fbm_expectation_is_one(self, fbm07_ensemble):
        for n, mean, se in renormalized_qv(fbm07_ensemble, 0.7):
            assert mean == pytest.approx(1.0, abs=max(0.05, 4 * se))

    def test_path_pairs(self, bm_path):
        pairs = renormalized_qv(bm_path, 0.5, schedule=[64, 512])
        assert [n for n, _ in pairs] == [64, 512]
        assert pairs[1][1] == pytest.approx(1.0, abs=0.3)


def test_ensemble_stats():
    mean, se = ensemble_stats([1.0, 2.0, 3.0])
    assert mean == 2.0
    assert se == pytest.approx(1.0 / math.sqrt(3.0))
    assert ensemble_stats([4.0]) == (4.0, 0.0)


def test_process_types(small_ensemble):
    assert isinstance(small_ensemble, Ensemble)
    est = beta_variation_estimate(small_ensemble, 2.0, schedule=[4, 8, 16])
    assert est.n_paths == 4
