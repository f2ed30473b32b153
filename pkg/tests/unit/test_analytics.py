"""
Tests for analytic rates, the clique cover ODE and distinct-demand combinatorics
"""
import itertools
from fractions import Fraction

import numpy as np
import pytest

from core.errors import ConfigurationError, DegenerateGainError, OdeDivergenceError
from services import analytics
from services.analytics import (
    OdeVariant,
    coding_gains,
    csc_gap_limit,
    expected_distinct,
    ode_step_convergence,
    prob_distinct,
    prob_distinct_table,
    rate_centralized_reference,
    rate_cfcc_analytic,
    rate_cfcm_analytic,
    rate_csc_opt_analytic,
    rate_csc_opt_exact,
    rate_cscc_approx,
    rate_uncoded_analytic,
    rate_uncoded_approx,
    rate_uncoded_exact,
    rate_uncoded_sum_form,
    solve_clique_cover_ode,
    surjection_count,
)


class TestMatchingRate:
    """Closed-form online matching rate"""

    def test_no_caching(self):
        assert rate_cfcm_analytic(50, 0) == 50

    def test_full_caching(self):
        assert rate_cfcm_analytic(50, 1) == 0.0

    @pytest.mark.parametrize("q", [0.05, 0.1, 0.3, 0.5, 0.9])
    def test_between_half_and_all_unlooped(self, q):
        rate = rate_cfcm_analytic(50, q)
        assert 0.5 * 50 * (1 - q) <= rate <= 50 * (1 - q)

    def test_series_branch_matches_closed_form(self, monkeypatch):
        series = rate_cfcm_analytic(200, 0.99e-4)
        monkeypatch.setattr(analytics, "SERIES_THRESHOLD", 0.0)
        closed = rate_cfcm_analytic(200, 0.99e-4)
        assert series == pytest.approx(closed, rel=1e-9)

    @pytest.mark.parametrize("rate", [rate_cfcm_analytic, rate_cfcc_analytic])
    def test_nonincreasing_in_q(self, rate):
        rates = [rate(50, Fraction(i, 20)) for i in range(20)]
        assert all(later <= earlier + 1e-9 for earlier, later in zip(rates, rates[1:]))

    def test_accepts_fractions(self):
        assert rate_cfcm_analytic(50, Fraction(1, 10)) == rate_cfcm_analytic(50, 0.1)

    def test_rejects_invalid_q(self):
        with pytest.raises(ConfigurationError):
            rate_cfcm_analytic(50, 1.5)


class TestCliqueCoverOde:
    """ODE solution of the greedy clique cover"""

    def test_no_caching_all_singletons(self):
        solution = solve_clique_cover_ode(20, 0.0)
        assert solution.z[0] == pytest.approx(1.0)
        assert np.allclose(solution.z[1:], 0.0, atol=1e-12)
        assert rate_cfcc_analytic(20, 0.0) == pytest.approx(20.0)

    def test_full_caching(self):
        assert rate_cfcc_analytic(50, 1) == 0.0
        with pytest.raises(ConfigurationError):
            solve_clique_cover_ode(50, 1.0)

    def test_single_cache(self):
        # the continuous model is exact only to second order in q
        assert rate_cfcc_analytic(1, 0.1) == pytest.approx(0.9, rel=0.02)

    @pytest.mark.parametrize("q", [0.1, 0.3, 0.5])
    def test_covered_mass_bounded(self, q):
        solution = solve_clique_cover_ode(30, q)
        assert solution.covered_mass <= (1 - q) + 1e-6
        assert np.all(solution.z >= -1e-9)

    @pytest.mark.parametrize("q", [0.1, 0.5, 0.9])
    def test_covered_mass_along_trajectory(self, q):
        solution = solve_clique_cover_ode(30, q, samples=50)
        mass = solution.trajectory_z @ np.arange(1, 31)
        assert np.all(np.diff(mass) >= -1e-12)
        assert np.all(mass <= (1 - q) * solution.trajectory_x + 1e-6)

    def test_printed_sign_overshoots_mass(self):
        solution = solve_clique_cover_ode(10, 0.3, variant=OdeVariant.PRINTED)
        assert solution.covered_mass > 1 - 0.3

    @pytest.mark.parametrize("q", [0.3, 0.5])
    def test_beats_matching(self, q):
        assert rate_cfcc_analytic(50, q) < rate_cfcm_analytic(50, q)

    def test_step_converged(self):
        h = analytics.default_ode_step(50)
        assert ode_step_convergence(50, 0.3, h) < 1e-6 * 50

    def test_step_rounded_to_interval(self):
        solution = solve_clique_cover_ode(10, 0.2, step=0.3)
        assert solution.step_size == pytest.approx(0.25)

    def test_trajectory(self):
        solution = solve_clique_cover_ode(10, 0.2, samples=10)
        assert solution.trajectory_x[0] == 0.0
        assert solution.trajectory_x[-1] == pytest.approx(1.0)
        assert np.array_equal(solution.trajectory_z[-1], solution.z)

    def test_effective_size(self):
        solution = solve_clique_cover_ode(50, 0.3)
        assert 2 <= solution.i_max_effective < 50

    def test_divergence_detected(self, monkeypatch):
        monkeypatch.setattr(analytics.CliqueCoverOde, "__call__", lambda self, z: np.full_like(z, np.nan))
        with pytest.raises(OdeDivergenceError):
            solve_clique_cover_ode(5, 0.2)

    def test_subfile_approximation_scales(self):
        assert rate_cscc_approx(20, 0.3, 1) == pytest.approx(rate_cfcc_analytic(20, 0.3))
        assert rate_cscc_approx(10, 0.3, 5) == pytest.approx(rate_cfcc_analytic(50, 0.3) / 5)


class TestDistinctDemands:
    """Surjections and the distinct-file distribution"""

    def test_surjections(self):
        assert surjection_count(3, 2) == 6
        assert surjection_count(4, 4) == 24
        assert surjection_count(3, 4) == 0
        with pytest.raises(ConfigurationError):
            surjection_count(3, 0)

    @pytest.mark.parametrize("K,N", [(1, 1), (3, 3), (5, 2), (4, 9)])
    def test_distribution_sums_to_one(self, K, N):
        assert sum(prob_distinct(K, N, m) for m in range(0, K + 1)) == 1

    def test_float_table_matches_exact(self):
        table = prob_distinct_table(8, 5)
        exact = [float(prob_distinct(8, 5, m)) for m in range(9)]
        assert np.allclose(table, exact, rtol=1e-12, atol=1e-15)

    def test_expected_distinct(self):
        assert expected_distinct(2, 2) == Fraction(3, 2)
        assert expected_distinct(1, 10) == 1

    def test_brute_force_distribution(self):
        K, N = 3, 4
        counts = [0] * (K + 1)
        for d in itertools.product(range(N), repeat=K):
            counts[len(set(d))] += 1
        assert [prob_distinct(K, N, m) for m in range(K + 1)] == [Fraction(c, N ** K) for c in counts]


class TestBaselines:
    """Uncoded and subfile caching reference rates"""

    def test_single_user_uncoded(self):
        assert rate_uncoded_analytic(1, 10, 5) == pytest.approx(0.5)
        assert rate_uncoded_exact(1, 10, 5) == Fraction(1, 2)

    def test_single_file_library(self):
        assert rate_uncoded_analytic(20, 1, 0) == 1.0
        assert rate_uncoded_analytic(20, 1, 1) == 0.0

    def test_sum_form_identity(self):
        for K in range(1, 7):
            for N in range(1, 7):
                for M in (0, N // 2, N):
                    assert rate_uncoded_sum_form(K, N, M) == rate_uncoded_exact(K, N, M)

    def test_float_matches_exact(self):
        assert rate_uncoded_analytic(50, 1000, 300) == pytest.approx(float(rate_uncoded_exact(50, 1000, 300)), rel=1e-12)

    def test_approx_and_centralized(self):
        assert rate_uncoded_approx(50, 0.3) == pytest.approx(35.0)
        assert rate_centralized_reference(50, 0.3) == pytest.approx(35.0 / 16.0)
        assert rate_centralized_reference(50, 0) == 50

    def test_csc_opt_brute_force(self):
        K, N, M = 3, 3, 1
        total = Fraction(0)
        for d in itertools.product(range(N), repeat=K):
            m = len(set(d))
            total += Fraction(N - M, M) * (1 - Fraction(N - M, N) ** m)
        assert rate_csc_opt_exact(K, N, M) == total / N ** K

    def test_csc_opt_extremes(self):
        assert rate_csc_opt_analytic(50, 1000, 1000) == 0.0
        with pytest.raises(ConfigurationError):
            rate_csc_opt_analytic(50, 1000, 0)

    def test_csc_opt_float_fallback(self):
        exact = rate_csc_opt_analytic(40, 200, 30)
        approximate = rate_csc_opt_analytic(40, 200, 30, bits_budget=1)
        assert approximate == pytest.approx(exact, rel=1e-9)

    def test_csc_opt_beats_uncoded(self):
        assert rate_csc_opt_analytic(50, 1000, 300) < rate_uncoded_analytic(50, 1000, 300)

    def test_gap_limit(self):
        K, N, M = 50, 1000, 999
        g_a, _ = coding_gains(rate_csc_opt_analytic(K, N, M), rate_uncoded_analytic(K, N, M))
        assert 1 - g_a == pytest.approx(csc_gap_limit(K, N), rel=0.01)


class TestCodingGains:
    def test_identity(self):
        g_a, g_m = coding_gains(10.0, 35.0)
        assert g_m == pytest.approx(3.5)
        assert g_a == pytest.approx(1 - 1 / g_m)

    @pytest.mark.parametrize("coded,uncoded", [(0.0, 1.0), (1.0, 0.0), (-1.0, 2.0)])
    def test_degenerate(self, coded, uncoded):
        with pytest.raises(DegenerateGainError):
            coding_gains(coded, uncoded)
