import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from capexbound.model import CoefficientSet, TimeGrid, cumulative_integral
from capexbound.paths import (
    MEASURE_P,
    MEASURE_Q,
    running_sup_ratio,
    running_sup_matrix,
    simulate,
)


def make_coeffs(grid, sigma=0.2, mu_C=0.1):
    return CoefficientSet.build(grid, mu_C=mu_C, sigma=sigma, f_C=1.0,
                                mu_F=0.05, w=1.0, r=1.0)


GRID = TimeGrid.uniform(1.0, 8)


class TestSimulate:
    def test_deterministic_decay(self):
        coeffs = make_coeffs(GRID, sigma=0.0, mu_C=0.1)
        batch = simulate(coeffs, GRID, 0, 16, MEASURE_P, seed=0)
        assert np.allclose(batch.values[:, -1], np.exp(-0.1), rtol=0, atol=1e-12)
        assert np.all(batch.values[:, 0] == 1.0)

    def test_martingale_property(self):
        coeffs = make_coeffs(GRID)
        batch = simulate(coeffs, GRID, 0, 100000, MEASURE_P, seed=1)
        cum = cumulative_integral(GRID, coeffs.mu_C)
        stat = batch.values[:, -1] * np.exp(cum[-1])
        vals = batch.pair_means(stat)
        se = np.std(vals, ddof=1) / np.sqrt(vals.size)
        assert abs(np.mean(vals) - 1.0) <= 3 * se

    def test_changed_measure_mean(self):
        coeffs = make_coeffs(GRID)
        batch = simulate(coeffs, GRID, 0, 100000, MEASURE_Q, seed=2)
        target = np.exp((0.2 ** 2 - 0.1) * 1.0)
        vals = batch.pair_means(batch.values[:, -1])
        se = np.std(vals, ddof=1) / np.sqrt(vals.size)
        assert abs(np.mean(vals) - target) <= 3 * se

    def test_reproducible(self):
        coeffs = make_coeffs(GRID)
        a = simulate(coeffs, GRID, 2, 64, MEASURE_Q, seed=9)
        b = simulate(coeffs, GRID, 2, 64, MEASURE_Q, seed=9)
        assert np.array_equal(a.values, b.values)
        c = simulate(coeffs, GRID, 2, 64, MEASURE_Q, seed=10)
        assert not np.array_equal(a.values, c.values)

    def test_antithetic_layout(self):
        coeffs = make_coeffs(GRID)
        batch = simulate(coeffs, GRID, 0, 10, MEASURE_P, seed=4)
        logs = np.log(batch.values[:, -1])
        mean, var = -0.1 - 0.5 * 0.04, 0.04
        z = (logs - mean) / np.sqrt(var)
        h = batch.n_paths // 2
        assert np.allclose(z[:h], -z[h:], atol=1e-10)

    def test_antithetic_variance_reduction(self):
        # paired means beat independent means on the martingale statistic
        coeffs = make_coeffs(GRID, sigma=0.4)
        cum = cumulative_integral(GRID, coeffs.mu_C)
        wins = 0
        trials = 40
        for seed in range(trials):
            anti = simulate(coeffs, GRID, 0, 2000, MEASURE_P, seed=seed, antithetic=True)
            indep = simulate(coeffs, GRID, 0, 2000, MEASURE_P, seed=seed + 1000, antithetic=False)
            stat_a = anti.pair_means(anti.values[:, -1] * np.exp(cum[-1]))
            stat_i = indep.values[:, -1] * np.exp(cum[-1])
            var_a = np.var(stat_a, ddof=1) / stat_a.size
            var_i = np.var(stat_i, ddof=1) / stat_i.size
            wins += var_a <= var_i
        assert wins >= int(0.95 * trials)

    def test_bad_start_rejected(self):
        coeffs = make_coeffs(GRID)
        with pytest.raises(ValueError):
            simulate(coeffs, GRID, GRID.n_steps, 4, MEASURE_P, seed=0)
        with pytest.raises(ValueError):
            simulate(coeffs, GRID, 0, 0, MEASURE_P, seed=0)


class TestRunningSup:
    def test_zero_curve(self):
        coeffs = make_coeffs(GRID, sigma=0.0)
        path = simulate(coeffs, GRID, 0, 1, MEASURE_P, seed=0, antithetic=False).path(0)
        s = running_sup_ratio(path, np.zeros(GRID.n_steps))
        assert np.all(s == 0.0)

    def test_worked_example(self):
        grid = TimeGrid.uniform(1.0, 3)
        coeffs = make_coeffs(grid, sigma=0.0, mu_C=0.0)
        path = simulate(coeffs, grid, 0, 1, MEASURE_P, seed=0, antithetic=False).path(0)
        s = running_sup_ratio(path, np.array([2.0, 1.5, 1.8]))
        assert np.allclose(s, [2.0, 2.0, 2.0])

    def test_recurrence_and_monotone(self):
        grid = TimeGrid.uniform(1.0, 12)
        coeffs = make_coeffs(grid)
        path = simulate(coeffs, grid, 0, 1, MEASURE_Q, seed=5, antithetic=False).path(0)
        rng = np.random.default_rng(0)
        curve = rng.uniform(0.1, 3.0, grid.n_steps)
        s = running_sup_ratio(path, curve)
        assert np.all(np.diff(s) >= 0)
        for k in range(1, s.size):
            assert s[k] == max(s[k - 1], curve[k] / path.values[k])

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 10), st.integers(0, 12345))
    def test_matches_bruteforce(self, n_steps, seed):
        grid = TimeGrid.uniform(1.0, n_steps)
        coeffs = make_coeffs(grid)
        path = simulate(coeffs, grid, 0, 1, MEASURE_Q, seed=seed, antithetic=False).path(0)
        rng = np.random.default_rng(seed)
        curve = rng.uniform(0.01, 5.0, n_steps)
        s = running_sup_ratio(path, curve)
        for k in range(1, n_steps + 1):
            brute = max(curve[i] / path.values[i] for i in range(k))
            assert s[k - 1] == pytest.approx(brute, rel=1e-15)

    def test_matrix_variant_matches(self):
        grid = TimeGrid.uniform(1.0, 6)
        coeffs = make_coeffs(grid)
        batch = simulate(coeffs, grid, 0, 8, MEASURE_Q, seed=3)
        curve = np.linspace(1.0, 0.5, grid.n_steps)
        mat = running_sup_matrix(batch.values, curve)
        for p in range(batch.n_paths):
            assert np.allclose(mat[p], running_sup_ratio(batch.path(p), curve))

    def test_empty_range_rejected(self):
        coeffs = make_coeffs(GRID)
        path = simulate(coeffs, GRID, 0, 1, MEASURE_P, seed=0, antithetic=False).path(0)
        with pytest.raises(ValueError):
            running_sup_ratio(path, np.ones(GRID.n_steps), start=GRID.n_steps)
