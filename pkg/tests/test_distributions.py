from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats as scipy_stats

from mcqeval.stats.distributions import chi2_cdf, f_cdf, normal_cdf, t_cdf, t_ppf


class TestTCdf:
    def test_zero_is_half(self):
        for df in (1, 2.5, 10, 99, 1000):
            assert t_cdf(0.0, df) == 0.5

    def test_cauchy_closed_form(self):
        # t with 1 df is Cauchy: F(x) = 1/2 + atan(x)/pi
        for x in (-5.0, -1.0, -0.3, 0.7, 1.0, 4.2):
            expected = 0.5 + math.atan(x) / math.pi
            assert t_cdf(x, 1.0) == pytest.approx(expected, abs=1e-12)
        assert t_cdf(1.0, 1.0) == pytest.approx(0.75, abs=1e-12)

    def test_symmetry_identity(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            x = float(rng.normal() * 3)
            df = float(rng.uniform(0.5, 200))
            assert t_cdf(-x, df) + t_cdf(x, df) == pytest.approx(1.0, abs=1e-12)

    def test_against_scipy(self):
        rng = np.random.default_rng(2)
        for _ in range(300):
            x = float(rng.normal() * 4)
            df = float(rng.uniform(1, 300))
            assert t_cdf(x, df) == pytest.approx(
                float(scipy_stats.t.cdf(x, df)), abs=1e-10
            )

    def test_monotone(self):
        xs = np.linspace(-8, 8, 200)
        values = [t_cdf(float(x), 7) for x in xs]
        assert all(b >= a for a, b in zip(values, values[1:]))
        assert all(0.0 <= v <= 1.0 for v in values)

    def test_invalid_df(self):
        with pytest.raises(ValueError):
            t_cdf(1.0, 0.0)
        with pytest.raises(ValueError):
            t_cdf(1.0, -3.0)

    def test_infinite_t(self):
        assert t_cdf(math.inf, 5) == 1.0
        assert t_cdf(-math.inf, 5) == 0.0


class TestChi2Cdf:
    def test_zero(self):
        assert chi2_cdf(0.0, 4) == 0.0

    def test_two_df_closed_form(self):
        # chi-square with 2 df: F(x) = 1 - exp(-x/2)
        for x in (0.1, 0.5, 1.386294, 3.0, 10.0):
            assert chi2_cdf(x, 2) == pytest.approx(1.0 - math.exp(-x / 2.0), abs=1e-12)
        assert chi2_cdf(2.0 * math.log(2.0), 2) == pytest.approx(0.5, abs=1e-12)

    def test_monotone_nondecreasing(self):
        xs = np.linspace(0, 30, 300)
        values = [chi2_cdf(float(x), 5) for x in xs]
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_against_scipy(self):
        rng = np.random.default_rng(3)
        for _ in range(300):
            x = float(rng.uniform(0, 50))
            df = int(rng.integers(1, 60))
            assert chi2_cdf(x, df) == pytest.approx(
                float(scipy_stats.chi2.cdf(x, df)), abs=1e-10
            )

    def test_negative_x_rejected(self):
        with pytest.raises(ValueError):
            chi2_cdf(-0.1, 2)


class TestFCdf:
    def test_zero(self):
        assert f_cdf(0.0, 3, 7) == 0.0

    def test_equal_df_median_at_one(self):
        for d in (2, 5, 20, 101):
            assert f_cdf(1.0, d, d) == pytest.approx(0.5, abs=1e-12)

    def test_f_equals_t_squared_identity(self):
        # F(1, d) at t^2 equals 2*T_d(|t|) - 1
        rng = np.random.default_rng(4)
        for _ in range(300):
            t = float(rng.normal() * 3)
            d = float(rng.uniform(1, 150))
            lhs = f_cdf(t * t, 1, d)
            rhs = 2.0 * t_cdf(abs(t), d) - 1.0
            assert lhs == pytest.approx(rhs, abs=1e-10)

    def test_against_scipy(self):
        rng = np.random.default_rng(5)
        for _ in range(300):
            x = float(rng.uniform(0, 10))
            d1 = float(rng.uniform(1, 40))
            d2 = float(rng.uniform(1, 40))
            assert f_cdf(x, d1, d2) == pytest.approx(
                float(scipy_stats.f.cdf(x, d1, d2)), abs=1e-10
            )

    def test_invalid_dfs(self):
        with pytest.raises(ValueError):
            f_cdf(1.0, 0, 5)
        with pytest.raises(ValueError):
            f_cdf(1.0, 5, -1)


class TestNormalCdf:
    def test_known_values(self):
        assert normal_cdf(0.0) == pytest.approx(0.5, abs=1e-15)
        assert normal_cdf(1.959963984540054) == pytest.approx(0.975, abs=1e-12)

    def test_against_scipy(self):
        for z in np.linspace(-6, 6, 50):
            assert normal_cdf(float(z)) == pytest.approx(
                float(scipy_stats.norm.cdf(z)), abs=1e-12
            )


class TestTPpf:
    def test_round_trip_with_cdf(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            p = float(rng.uniform(0.01, 0.99))
            df = float(rng.uniform(1, 200))
            assert t_cdf(t_ppf(p, df), df) == pytest.approx(p, abs=1e-10)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            t_ppf(0.0, 5)
        with pytest.raises(ValueError):
            t_ppf(0.5, 0)
