import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from renewcap import raft
from renewcap.checks import truncated_cdf_quadrature
from renewcap.errors import DomainError, NumericalInstabilityError
from renewcap.raft import (
    RaftParams,
    alive_expectation,
    block_index,
    death_pmf,
    expected_n,
    joint_pmf_cell,
    joint_pmf_table,
    lemma1_prob,
    n_pmf,
    rate_curve,
    rate_diagnostics,
    rate_limit,
)
from renewcap.series import poisson_tail

P6 = RaftParams(0.1, 6.0)
P12 = RaftParams(0.1, 12.0)


def test_params_validation():
    with pytest.raises(DomainError):
        RaftParams(0.0, 1.0)
    with pytest.raises(DomainError):
        RaftParams(1.0, -2.0)


def test_block_index_snaps_near_integers():
    assert block_index(0.3, 0.1) == 3  # 0.3/0.1 == 2.9999999999999996
    assert block_index(12.0, 12.0) == 1
    assert block_index(12.0 - 1e-9, 12.0) == 0
    assert block_index(5.0, 6.0) == 0


class TestTruncatedLifetimeCdf:
    def test_single_block_is_exponential_cdf(self):
        assert lemma1_prob(P6, 1, 5.0) == pytest.approx(1 - math.exp(-0.5), abs=1e-15)

    def test_two_lifetimes_against_quadrature(self):
        ref = truncated_cdf_quadrature(P6, 2, 10.0)
        # P(X1+X2 <= 10) minus the two symmetric pieces with one lifetime above 6
        e = math.exp
        by_hand = (1 - 2 * e(-1)) - 2 * ((e(-0.6) - e(-1)) - 0.4 * e(-1))
        assert ref == pytest.approx(by_hand, abs=1e-12)
        assert lemma1_prob(P6, 2, 10.0) == pytest.approx(ref, abs=1e-12)

    def test_constraint_vacuous_below_r(self):
        assert lemma1_prob(P6, 3, 2.0) == poisson_tail(0.2, 3)

    @pytest.mark.parametrize("n", [2, 3])
    @pytest.mark.parametrize("t", [5.0, 10.0, 14.0])
    def test_quadrature_oracle(self, n, t):
        assert abs(lemma1_prob(P6, n, t) - truncated_cdf_quadrature(P6, n, t)) <= 1e-8


class TestJointCell:
    def test_single_block_is_poisson(self):
        assert joint_pmf_cell(P6, 5.0, 0, 2) == pytest.approx(math.exp(-0.5) * 0.5**2 / 2, rel=1e-14)

    def test_one_age_replacement_no_failure(self):
        # X1 > 6, then the second part survives its 4 remaining time units.
        assert joint_pmf_cell(P6, 10.0, 1, 0) == pytest.approx(math.exp(-0.6) * math.exp(-0.4), rel=1e-14)

    def test_one_of_each(self):
        # Failure-then-age and age-then-failure orderings each contribute 0.4 e^{-1}.
        assert joint_pmf_cell(P6, 10.0, 1, 1) == pytest.approx(0.8 * math.exp(-1.0), rel=1e-13)

    def test_impossible_alive_count(self):
        assert joint_pmf_cell(P6, 10.0, 2, 0) == 0.0
        assert joint_pmf_cell(P6, 10.0, 2, 5) == 0.0

    def test_structural_zero_rows(self):
        # j = 4: every lifetime is at most 2, so at least 4 replacements by t = 9.
        p = RaftParams(0.3, 2.0)
        assert joint_pmf_cell(p, 9.0, 0, 1) == 0.0
        assert joint_pmf_cell(p, 9.0, 2, 1) == 0.0
        assert joint_pmf_cell(p, 9.0, 3, 1) > 0.0
        assert joint_pmf_cell(p, 9.0, 4, 0) > 0.0

    def test_too_many_blocks(self):
        with pytest.raises(NumericalInstabilityError):
            joint_pmf_cell(RaftParams(0.1, 1.0), 250.0, 0, 0)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0.01, 1.0), st.floats(0.5, 10.0), st.floats(0.05, 0.999), st.integers(0, 30))
    def test_first_block_reduces_to_death_pmf(self, lam, r, frac, l):
        t = frac * r
        assert joint_pmf_cell(RaftParams(lam, r), t, 0, l) == death_pmf(lam, t, l)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.02, 0.6), st.floats(1.0, 12.0), st.floats(0.1, 12.0), st.integers(0, 12), st.integers(0, 30))
    def test_double_path_matches_extended_precision(self, lam, r, tr, k, l):
        t = tr * r
        j = block_index(t, r)
        assume(k <= j)
        ref = raft._cell_mp(lam, r, t, j, k, l, dps=50)
        assert joint_pmf_cell(RaftParams(lam, r), t, k, l) == pytest.approx(ref, abs=1e-14)


class TestTable:
    def test_first_block_table(self):
        tab = joint_pmf_table(P6, 5.0, 1e-12)
        assert tab.j == 0 and tab.probs.shape[0] == 1
        assert tab.total() == pytest.approx(1 - poisson_tail(0.5, tab.l_max + 1), abs=1e-15)
        assert tab.truncated_mass < 1e-12

    def test_normalization(self):
        tab = joint_pmf_table(P6, 10.0, 1e-10)
        assert 1 - 1e-10 <= tab.total() <= 1 + 1e-12

    def test_alive_mean_consistency(self):
        tab = joint_pmf_table(P12, 100.0, 1e-10)
        assert tab.mean_alive() == pytest.approx(alive_expectation(P12, 100.0), abs=1e-8)

    def test_entries_exclude_impossible(self):
        tab = joint_pmf_table(P6, 10.0, 1e-10)
        assert max(k for k, _ in tab.entries) == tab.j == 1

    def test_bad_tolerance(self):
        with pytest.raises(DomainError):
            joint_pmf_table(P6, 10.0, 0.0)
        with pytest.raises(DomainError):
            joint_pmf_table(P6, 10.0, 1.0)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.02, 1.0), st.floats(0.5, 12.0), st.floats(0.05, 30.0))
    def test_normalization_property(self, lam, r, tr):
        t = tr * r
        assume(block_index(t, r) <= 30 and lam * t <= 120)
        tab = joint_pmf_table(RaftParams(lam, r), t, 1e-13)
        assert tab.total() + tab.truncated_mass >= 1 - 1e-10
        assert np.all(np.cumsum(tab.probs.ravel()) <= 1 + 1e-10)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.02, 1.0), st.floats(0.5, 12.0), st.floats(0.05, 20.0))
    def test_marginalization_property(self, lam, r, tr):
        t = tr * r
        assume(block_index(t, r) <= 20)
        params = RaftParams(lam, r)
        j = block_index(t, r)
        for l in range(41):
            marg = math.fsum(joint_pmf_cell(params, t, k, l) for k in range(j + 1))
            assert abs(marg - death_pmf(lam, t, l)) <= 1e-10


def test_death_pmf_examples():
    assert death_pmf(0.1, 10.0, 0) == pytest.approx(math.exp(-1), rel=1e-15)
    assert death_pmf(0.1, 10.0, 1) == pytest.approx(math.exp(-1), rel=1e-15)
    tab = joint_pmf_table(RaftParams(0.2, 6.0), 30.0, 1e-13)
    assert tab.death_marginal()[4] == pytest.approx(death_pmf(0.2, 30.0, 4), abs=1e-10)


class TestExpectations:
    def test_alive_examples(self):
        assert alive_expectation(P6, 5.0) == 0.0
        assert alive_expectation(P6, 10.0) == pytest.approx(1.4 * math.exp(-0.6), rel=1e-15)
        assert alive_expectation(P6, 10.0) == pytest.approx(0.7683363, abs=1e-7)
        assert alive_expectation(P6, 12.0) == pytest.approx(1.6 * math.exp(-0.6) + math.exp(-1.2), rel=1e-15)

    def test_alive_matches_table(self):
        tab = joint_pmf_table(P6, 12.0, 1e-13)
        assert tab.mean_alive() == pytest.approx(alive_expectation(P6, 12.0), abs=1e-10)

    def test_expected_n_examples(self):
        assert expected_n(P6, 5.0) == pytest.approx(0.5, rel=1e-15)
        assert expected_n(P6, 10.0) == pytest.approx(1 + 1.4 * math.exp(-0.6), rel=1e-15)
        assert expected_n(P6, 10.0) == pytest.approx(1.7683363, abs=1e-7)

    def test_jump_at_block_boundary(self):
        left = expected_n(P12, 12.0 - 1e-9)
        right = expected_n(P12, 12.0)
        assert right - left == pytest.approx(math.exp(-1.2), abs=1e-9)

    def test_n_pmf_examples(self):
        assert n_pmf(P6, 5.0, 0) == pytest.approx(math.exp(-0.5), rel=1e-15)
        assert n_pmf(P6, 6.0, 0) == 0.0
        assert n_pmf(P6, 10.0, 1) == pytest.approx(
            joint_pmf_cell(P6, 10.0, 0, 1) + joint_pmf_cell(P6, 10.0, 1, 0), rel=1e-15
        )

    def test_n_pmf_sums_to_one_and_mean(self):
        t = 40.0
        ps = [n_pmf(P6, t, n) for n in range(60)]
        assert math.fsum(ps) == pytest.approx(1.0, abs=1e-12)
        assert math.fsum(n * p for n, p in enumerate(ps)) == pytest.approx(expected_n(P6, t), abs=1e-10)


class TestRateCurve:
    def test_asymptote_values(self):
        assert rate_limit(P12) == pytest.approx(0.1431013, abs=1e-7)
        assert rate_limit(P6) == pytest.approx(0.2216369, abs=1e-7)

    @pytest.mark.parametrize("params", [P12, P6])
    def test_far_end_near_asymptote(self, params):
        curve = rate_curve(params, np.linspace(params.r, 600.0, 300))
        assert curve.values[-1] == pytest.approx(curve.asymptote, rel=0.01)
        assert curve.asymptote > params.lam

    def test_increasing_when_r_exceeds_mean_life(self):
        curve = rate_curve(P12, np.linspace(12.0, 60.0, 500))
        assert np.all(np.diff(curve.values) > 0)

    def test_jump_markers(self):
        curve = rate_curve(P12, np.linspace(10.0, 50.0, 10))
        assert curve.jump_markers == (12.0, 24.0, 36.0, 48.0)
        assert curve.marker_at(24.0) == "open"

    def test_grid_validation(self):
        with pytest.raises(DomainError):
            rate_curve(P6, [])
        with pytest.raises(DomainError):
            rate_curve(P6, [3.0, 2.0])
        with pytest.raises(DomainError):
            rate_curve(P6, [0.0, 2.0])

    def test_asymptote_at_hundred_scales(self):
        for params in (P6, P12, RaftParams(0.5, 2.0), RaftParams(0.05, 12.0)):
            t = 100 * max(params.r, 1 / params.lam)
            assert expected_n(params, t) / t == pytest.approx(rate_limit(params), rel=5e-3)


class TestDiagnostics:
    def test_first_block_long_age(self):
        d = rate_diagnostics(P12, 1)
        assert d.u_n == d.v_n == pytest.approx(math.exp(-1.2), rel=1e-15)
        assert d.increasing_on_block

    def test_first_block_short_age(self):
        d = rate_diagnostics(P6, 1)
        assert d.u_n == d.v_n
        assert not d.increasing_on_block

    def test_limit_ratio(self):
        d = rate_diagnostics(P6, 5000)
        ratio = 0.6 * d.v_n / d.u_n
        assert ratio == pytest.approx(0.6 / (1 - math.exp(-0.6)), rel=1e-9)
        assert round(ratio, 3) == 1.330
        assert d.increasing_on_block

    def test_short_age_turns_increasing(self):
        flags = [rate_diagnostics(P6, n).increasing_on_block for n in range(1, 8)]
        assert flags == [False, False, False, True, True, True, True]

    @pytest.mark.parametrize("n", [1, 2, 5, 40])
    def test_closed_forms_match_sums(self, n):
        d = rate_diagnostics(P6, n)
        u, v = raft.rate_diagnostics_closed_form(P6, n)
        assert u == pytest.approx(d.u_n, rel=1e-13)
        assert v == pytest.approx(d.v_n, rel=1e-13)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.01, 2.0), st.floats(0.1, 20.0), st.integers(1, 60))
    def test_u_below_v(self, lam, r, n):
        d = rate_diagnostics(RaftParams(lam, r), n)
        assert 0 < d.u_n <= d.v_n

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0.02, 0.5), st.floats(1.0, 15.0), st.integers(1, 6))
    def test_monotone_where_diagnostics_say_so(self, lam, r, n_blocks):
        params = RaftParams(lam, r)
        assume(all(rate_diagnostics(params, n).increasing_on_block for n in range(1, n_blocks + 1)))
        grid = np.linspace(r, (n_blocks + 1) * r, 400)[:-1]
        assert np.all(np.diff(rate_curve(params, grid).values) > 0)

    def test_short_age_first_decreases_then_increases(self):
        first = rate_curve(P6, np.linspace(6.0, 11.99, 50)).values
        late = rate_curve(P6, np.linspace(30.0, 35.99, 50)).values
        assert np.all(np.diff(first) < 0)
        assert np.all(np.diff(late) > 0)


def test_clamp_rules():
    assert raft._clamp_probability(-5e-15, "x") == 0.0
    with pytest.raises(NumericalInstabilityError):
        raft._clamp_probability(-1e-9, "x")
