import numpy as np
import pytest

from capexbound.model import CobbDouglas, SyntheticMarginal, Tabulated, power_marginal
from capexbound.production import (
    UnsupportedVariantError,
    optimal_inputs,
    reduced_marginal,
    reduced_marginal_array,
    reduced_value,
    reduced_value_array,
)

CD = CobbDouglas(0.25, 0.25, 0.25, kappa_L=1e6, kappa_K=1e6)


def grid_max(raw, C, w, r, span, levels=4, n=241):
    """Brute-force oracle: zooming grid maximization of R - wL - rK."""
    lo_L, hi_L = 0.0, span
    lo_K, hi_K = 0.0, span
    best = (0.0, 0.0, raw(C, 0.0, 0.0))
    for _ in range(levels):
        L = np.linspace(lo_L, hi_L, n)
        K = np.linspace(lo_K, hi_K, n)
        LL, KK = np.meshgrid(L, K, indexing="ij")
        vals = raw(C, LL, KK) - w * LL - r * KK
        i, j = np.unravel_index(np.argmax(vals), vals.shape)
        best = (L[i], K[j], vals[i, j])
        dL = (hi_L - lo_L) / (n - 1)
        dK = (hi_K - lo_K) / (n - 1)
        lo_L, hi_L = max(0.0, L[i] - 2 * dL), min(span, L[i] + 2 * dL)
        lo_K, hi_K = max(0.0, K[j] - 2 * dK), min(span, K[j] + 2 * dK)
    return best


class TestReducedValue:
    def test_zero_capacity(self):
        assert reduced_value(CD, 0.0, 1.0, 1.0) == 0.0
        lk = optimal_inputs(CD, 0.0, 1.0, 1.0)
        assert (lk.L, lk.K) == (0.0, 0.0)

    def test_corner_when_costs_dominate(self):
        # finite marginal products at zero input, so high costs force (0, 0)
        tab = Tabulated(R=lambda C, L, K: np.sqrt(C) * (L / (1.0 + L) + K / (1.0 + K)),
                        kappa_L=50.0, kappa_K=50.0)
        lk = optimal_inputs(tab, 4.0, 10.0, 10.0)
        assert lk.L == pytest.approx(0.0, abs=1e-6)
        assert lk.K == pytest.approx(0.0, abs=1e-6)
        assert reduced_value(tab, 4.0, 10.0, 10.0) == pytest.approx(0.0, abs=1e-8)

    def test_against_grid_oracle(self):
        # interior optimum at L = K = 256 for C = 1, w = r = 1
        val = reduced_value(CD, 1.0, 1.0, 1.0)
        _, _, oracle = grid_max(CD.raw, 1.0, 1.0, 1.0, span=1000.0)
        assert val == pytest.approx(oracle, rel=1e-5)

    def test_interior_stationarity(self):
        lk = optimal_inputs(CD, 1.3, 0.9, 1.4)
        h = 1e-5
        gL = (CD.raw(1.3, lk.L + h, lk.K) - CD.raw(1.3, lk.L - h, lk.K)) / (2 * h)
        gK = (CD.raw(1.3, lk.L, lk.K + h) - CD.raw(1.3, lk.L, lk.K - h)) / (2 * h)
        assert gL == pytest.approx(0.9, rel=1e-8)
        assert gK == pytest.approx(1.4, rel=1e-8)

    def test_maximizer_against_grid(self):
        lk = optimal_inputs(CD, 1.0, 1.0, 1.0)
        L_g, K_g, _ = grid_max(CD.raw, 1.0, 1.0, 1.0, span=1000.0, levels=1, n=2000)
        step = 1000.0 / 1999
        assert abs(lk.L - L_g) <= step
        assert abs(lk.K - K_g) <= step

    def test_negative_capacity_rejected(self):
        with pytest.raises(ValueError):
            reduced_value(CD, -1.0, 1.0, 1.0)

    def test_box_binding_matches_oracle(self):
        tight = CobbDouglas(0.25, 0.25, 0.25, kappa_L=100.0, kappa_K=100.0)
        val = reduced_value(tight, 1.0, 1.0, 1.0)
        _, _, oracle = grid_max(tight.raw, 1.0, 1.0, 1.0, span=100.0)
        assert val == pytest.approx(oracle, rel=1e-6)
        lk = optimal_inputs(tight, 1.0, 1.0, 1.0)
        assert lk.L == pytest.approx(100.0)


class TestReducedMarginal:
    def test_closed_form_anchor(self):
        # alpha = beta = gamma = 1/4, w = r = 1, C = 1: the closed form is 16^2
        assert reduced_marginal(CD, 1.0, 1.0, 1.0) == pytest.approx(256.0, rel=1e-12)

    def test_finite_difference_of_value(self):
        h = 1e-4
        fd = (reduced_value(CD, 1.0 + h, 1.0, 1.0) - reduced_value(CD, 1.0 - h, 1.0, 1.0)) / (2 * h)
        assert reduced_marginal(CD, 1.0, 1.0, 1.0) == pytest.approx(fd, rel=1e-4)

    def test_synthetic_direct(self):
        sm = power_marginal(1.0, 1.0)
        assert reduced_marginal(sm, 2.0, 1.0, 1.0) == pytest.approx(0.5)

    def test_strictly_decreasing_in_capacity(self):
        assert reduced_marginal(CD, 2.0, 1.0, 1.0) < reduced_marginal(CD, 1.0, 1.0, 1.0)

    def test_envelope_identity_interior(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            C = rng.uniform(0.3, 3.0)
            w = rng.uniform(0.5, 2.0)
            r = rng.uniform(0.5, 2.0)
            lk = optimal_inputs(CD, C, w, r)
            a, b, g = CD.alpha, CD.beta, CD.gamma
            raw_marginal = (1.0 / (a * b * g)) * a * C ** (a - 1) * lk.L ** b * lk.K ** g
            assert reduced_marginal(CD, C, w, r) == pytest.approx(raw_marginal, rel=1e-6)

    def test_inada_blowup(self):
        vals = [reduced_marginal(CD, 10.0 ** -k, 1.0, 1.0) for k in range(1, 12)]
        assert all(v2 > v1 for v1, v2 in zip(vals, vals[1:]))
        assert vals[-1] > 1e6

    def test_inputs_unsupported_for_synthetic(self):
        with pytest.raises(UnsupportedVariantError):
            optimal_inputs(power_marginal(1.0, 1.0), 1.0, 1.0, 1.0)

    def test_array_matches_scalar(self):
        C = np.array([0.5, 1.0, 2.0, 7.0])
        arr = reduced_marginal_array(CD, C, 1.1, 0.9)
        sca = [reduced_marginal(CD, c, 1.1, 0.9) for c in C]
        assert np.allclose(arr, sca, rtol=1e-12)


class TestShapeProperties:
    def test_strict_concavity_in_capacity(self):
        rng = np.random.default_rng(2)
        C1 = rng.uniform(0.05, 5.0, 200)
        C2 = rng.uniform(0.05, 5.0, 200)
        keep = np.abs(C1 - C2) > 1e-3
        C1, C2 = C1[keep], C2[keep]
        mid = reduced_value_array(CD, 0.5 * (C1 + C2), 1.0, 1.0)
        avg = 0.5 * (reduced_value_array(CD, C1, 1.0, 1.0) + reduced_value_array(CD, C2, 1.0, 1.0))
        assert np.all(mid > avg - 1e-12)

    def test_convexity_in_costs(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            w1, w2 = rng.uniform(0.5, 2.0, 2)
            r0 = rng.uniform(0.5, 2.0)
            mid = reduced_value(CD, 1.0, 0.5 * (w1 + w2), r0)
            avg = 0.5 * (reduced_value(CD, 1.0, w1, r0) + reduced_value(CD, 1.0, w2, r0))
            assert mid <= avg + 1e-9
            r1, r2 = rng.uniform(0.5, 2.0, 2)
            w0 = rng.uniform(0.5, 2.0)
            mid = reduced_value(CD, 1.0, w0, 0.5 * (r1 + r2))
            avg = 0.5 * (reduced_value(CD, 1.0, w0, r1) + reduced_value(CD, 1.0, w0, r2))
            assert mid <= avg + 1e-9

    def test_tabulated_agrees_with_closed_form(self):
        tab = Tabulated(R=CD.raw, kappa_L=1e6, kappa_K=1e6)
        for C in (0.5, 1.0, 2.5):
            assert reduced_value(tab, C, 1.0, 1.0) == pytest.approx(
                reduced_value(CD, C, 1.0, 1.0), rel=1e-6)
            assert reduced_marginal(tab, C, 1.0, 1.0) == pytest.approx(
                reduced_marginal(CD, C, 1.0, 1.0), rel=1e-4)

    def test_synthetic_antiderivative_consistency(self):
        sm = power_marginal(0.5, 2.0)
        h = 1e-5
        fd = (reduced_value(sm, 2.0 + h, 1, 1) - reduced_value(sm, 2.0 - h, 1, 1)) / (2 * h)
        assert fd == pytest.approx(reduced_marginal(sm, 2.0, 1, 1), rel=1e-8)
