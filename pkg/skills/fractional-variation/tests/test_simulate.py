"""Path generators, cascade functions and ensemble seeding."""

import math

import numpy as np
import pytest

from constants import fbm_covariance
from errors import DomainError
from simulate import (GENERATORS, Ensemble, Path, SingularFunction, brownian_path, fbm_cholesky, fbm_mvn,
                      fbm_volterra, make_rng, mvn_variance, run_chunked, simulate_ensemble,
                      singular_fn_eval, time_changed_bm)

SEED = 11


class TestContainers:
    def test_path_grid(self):
        p = Path(0.5, 0.25, [0.0, 1.0, 2.0])
        assert p.n == 2
        assert p.horizon == 1.0
        np.testing.assert_array_equal(p.times, [0.5, 0.75, 1.0])

    def test_path_rejects_bad_input(self):
        with pytest.raises(DomainError):
            Path(0.0, 0.1, [1.0])
        with pytest.raises(DomainError, match='positive'):
            Path(0.0, 0.0, [0.0, 1.0])

    def test_ensemble_path_view(self, small_ensemble):
        p = small_ensemble.path(2)
        np.testing.assert_array_equal(p.values, small_ensemble.values[2])
        assert p.meta['index'] == 2
        assert len(list(small_ensemble.paths())) == small_ensemble.n_paths

    def test_ensemble_from_paths_needs_one_grid(self):
        a = brownian_path(8, 1.0, seed=1)
        b = brownian_path(16, 1.0, seed=2)
        with pytest.raises(DomainError, match='one grid'):
            Ensemble.from_paths([a, b])
        joined = Ensemble.from_paths([a, brownian_path(8, 1.0, seed=3)], master_seed=5)
        assert joined.n_paths == 2 and joined.master_seed == 5


class TestBrownian:
    def test_reproducible(self):
        a = brownian_path(64, 1.0, seed=(SEED, 0))
        b = brownian_path(64, 1.0, seed=(SEED, 0))
        np.testing.assert_array_equal(a.values, b.values)
        assert a.values[0] == 0.0
        assert a.meta['seed'] == [SEED, 0]

    def test_seeds_differ(self):
        assert not np.array_equal(brownian_path(64, seed=1).values, brownian_path(64, seed=2).values)

    def test_bad_grid(self):
        with pytest.raises(DomainError, match='n must be'):
            brownian_path(1)
        with pytest.raises(DomainError, match='Horizon'):
            brownian_path(8, 0.0)


class TestFbm:
    def test_cholesky_variance(self):
        e = simulate_ensemble(fbm_cholesky, 2000, SEED, h=0.7, n=64, T=2.0)
        mean = np.mean(e.values[:, -1] ** 2)
        assert mean == pytest.approx(2.0 ** 1.4, rel=0.15)

    def test_cholesky_covariance(self):
        h = 0.3
        e = simulate_ensemble(fbm_cholesky, 2000, SEED, h=h, n=32)
        i, j = 8, 32
        sample = np.mean(e.values[:, i] * e.values[:, j])
        assert sample == pytest.approx(float(fbm_covariance(e.times[i], e.times[j], h)), abs=0.1)

    def test_cholesky_cap(self):
        with pytest.raises(DomainError, match='capped'):
            fbm_cholesky(0.7, 64, cap=32)

    def test_mvn_at_zero_alpha_is_brownian(self):
        w = brownian_path(128, 1.0, seed=(SEED, 3))
        b = fbm_mvn(0.0, 128, 1.0, seed=(SEED, 3))
        np.testing.assert_array_equal(w.values, b.values)

    def test_mvn_variance_increases_with_tail(self):
        short = mvn_variance(0.2, 64, 1.0, tail_len=10)
        long = mvn_variance(0.2, 64, 1.0, tail_len=50)
        assert short < long < 1.0
        assert long > 0.95

    def test_mvn_variance_brownian(self):
        assert mvn_variance(0.0, 64) == pytest.approx(1.0, abs=1e-12)

    def test_mvn_sample_matches_exact_variance(self):
        e = simulate_ensemble(fbm_mvn, 2000, SEED, alpha=-0.2, n=64, tail_len=5)
        exact = mvn_variance(-0.2, 64, 1.0, tail_len=5)
        assert np.mean(e.values[:, -1] ** 2) == pytest.approx(exact, rel=0.15)

    def test_mvn_bad_tail(self):
        with pytest.raises(DomainError, match='tail_len'):
            fbm_mvn(0.2, 16, tail_len=0.0)

    def test_volterra_at_half_is_brownian(self):
        w = brownian_path(64, 1.0, seed=5)
        b = fbm_volterra(0.5, 64, 1.0, seed=5)
        np.testing.assert_array_equal(w.values, b.values)

    def test_volterra_variance(self):
        e = simulate_ensemble(fbm_volterra, 2000, SEED, h=0.7, n=64)
        assert np.mean(e.values[:, -1] ** 2) == pytest.approx(1.0, rel=0.15)


class TestSingularFunction:
    def test_endpoints_and_midpoint(self):
        phi = SingularFunction(0.3, 10)
        assert phi(0.0) == 0.0
        assert phi(1.0) == pytest.approx(1.0, abs=1e-14)
        assert phi(0.5) == pytest.approx(0.3, abs=1e-14)

    def test_monotone(self):
        values = SingularFunction(0.2, 12)(np.linspace(0, 1, 1001))
        assert np.all(np.diff(values) >= 0)

    def test_uniform_cascade_is_identity(self):
        t = np.linspace(0, 1, 97)
        np.testing.assert_allclose(SingularFunction(0.5, 12)(t), t, atol=1e-14)

    def test_masses(self):
        phi = SingularFunction(0.3, 6)
        np.testing.assert_allclose(phi.masses(1), [0.3, 0.7])
        assert np.sum(phi.masses()) == pytest.approx(1.0)
        assert phi.masses(8).size == 256
        assert np.sum(phi.masses(8)) == pytest.approx(1.0)

    def test_masses_match_increments(self):
        phi = SingularFunction(0.3, 8)
        grid = np.arange(2 ** 5 + 1) / 2 ** 5
        np.testing.assert_allclose(np.diff(phi(grid)), phi.masses(5), atol=1e-14)

    def test_holder_exponent(self):
        phi = SingularFunction(0.1, 12)
        assert phi.holder_bound == pytest.approx(-math.log2(0.9))
        assert phi.holder_exponent() == pytest.approx(phi.holder_bound, rel=1e-9)
        assert SingularFunction(0.5, 12).holder_exponent() == pytest.approx(1.0, rel=1e-9)

    @pytest.mark.parametrize('p, depth', [(0.45, 16), (0.55, 16), (0.3, 12), (0.95, 14)])
    def test_holder_exponent_heaviest_branch(self, p, depth):
        expected = -math.log2(max(p, 1.0 - p))
        estimate = SingularFunction(p, depth).holder_exponent()
        assert estimate == pytest.approx(expected, abs=0.05)
        assert estimate <= 1.0

    def test_holder_exponent_ignores_light_branch(self):
        estimate = SingularFunction(0.3, 12).holder_exponent()
        assert estimate == pytest.approx(-math.log2(0.7), rel=1e-6)
        assert estimate < -math.log2(0.3)

    @pytest.mark.parametrize('p', [0.0, 1.0, 1.2])
    def test_bad_p(self, p):
        with pytest.raises(DomainError, match='p must lie'):
            SingularFunction(p, 4)

    def test_domain(self):
        with pytest.raises(DomainError, match=r'\[0, 1\]'):
            singular_fn_eval(SingularFunction(0.3, 4), 1.5)

    def test_time_changed_bm_variance(self):
        e = simulate_ensemble(time_changed_bm, 2000, SEED, phi=SingularFunction(0.3, 10), n=64)
        assert np.mean(e.values[:, 32] ** 2) == pytest.approx(0.3, rel=0.15)
        assert np.all(e.values[:, 0] == 0.0)


class TestEnsembles:
    def test_path_k_uses_split_seed(self):
        e = simulate_ensemble(brownian_path, 5, SEED, n=32)
        np.testing.assert_array_equal(e.values[3], brownian_path(32, seed=(SEED, 3)).values)
        assert e.master_seed == SEED

    def test_streams_are_independent(self):
        a = simulate_ensemble(brownian_path, 3, SEED, n=32)
        b = simulate_ensemble(brownian_path, 3, SEED, stream=1, n=32)
        assert not np.array_equal(a.values, b.values)
        assert b.meta['stream'] == 1

    @pytest.mark.parametrize('name', sorted(GENERATORS))
    def test_thread_count_does_not_change_output(self, name):
        params = {'n': 32}
        if name in ('fbm-chol', 'fbm-volterra'):
            params['h'] = 0.7
        elif name == 'fbm-mvn':
            params['alpha'] = 0.2
        elif name == 'tcbm':
            params['phi'] = SingularFunction(0.3, 8)
        one = simulate_ensemble(GENERATORS[name], 12, SEED, threads=1, **params)
        four = simulate_ensemble(GENERATORS[name], 12, SEED, threads=4, **params)
        np.testing.assert_array_equal(one.values, four.values)

    def test_run_chunked_is_thread_invariant(self):
        rows = make_rng(3).standard_normal((20, 9))
        func = lambda block: np.cumsum(block, axis=1) ** 2  # noqa: E731
        single = run_chunked(func, rows, threads=1, chunk_rows=3)
        pooled = run_chunked(func, rows, threads=4, chunk_rows=3)
        np.testing.assert_array_equal(single, pooled)
        assert single.shape == rows.shape

    def test_bad_path_count(self):
        with pytest.raises(DomainError, match='n_paths'):
            simulate_ensemble(brownian_path, 0, SEED, n=8)
