import json
import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tunable_ht import (
    HypothesisPair,
    NumericError,
    TestKind,
    ValidationError,
    bayes_risk,
    bayes_test,
    bernoulli,
    calibrate_lambda,
    constant_test,
    error_pair,
    infty_mp_test,
    make_distribution,
    nu_mp_test,
    nu_type1_error,
    nu_type2_error,
    table_test,
    type_table,
)
from tunable_ht.nu_loss import nu_loss
from tunable_ht.prob_core import enumerate_sequences
from tunable_ht.randomized import classical_type2_error, test_from_dict

mpmath.mp.dps = 60


def direct_errors(test, pair, nu):
    """alpha_nu and beta_bar_nu summed sequence by sequence from the loss definition."""
    tt = test.types
    k, n = pair.alphabet_size, test.n
    reject = test.reject_probs()
    a_terms, b_terms = [], []
    for seq in enumerate_sequences(k, n):
        counts = np.bincount(seq, minlength=k)
        r = reject[tt.index_of(counts)]
        p0 = math.prod(pair.p0.probs[s] for s in seq)
        p1 = math.prod(pair.p1.probs[s] for s in seq)
        a_terms.append(p0 * nu_loss(nu, 1 - r) if p0 > 0 else 0.0)
        b_terms.append(p1 * nu_loss(nu, r) if p1 > 0 else 0.0)
    return math.fsum(a_terms), math.fsum(b_terms)


def binomial_tail(n, theta, ks):
    """Exact P(K in ks) for K ~ Binomial(n, theta) with rational theta."""
    theta = Fraction(theta)
    return sum(math.comb(n, k) * theta ** k * (1 - theta) ** (n - k) for k in ks)


class TestClosedFormMP:
    def test_equal_likelihoods_split_evenly(self):
        pair = HypothesisPair(bernoulli(0.4), bernoulli(0.4))
        for nu in (1, 1.5, 2, 9):
            np.testing.assert_allclose(nu_mp_test(nu, 1.0, pair, 4).reject_probs(), 0.5,
                                       atol=1e-15)

    def test_log_loss_threshold_example(self):
        pair = HypothesisPair(make_distribution([0.25, 0.75]), make_distribution([0.5, 0.5]))
        test = nu_mp_test(1, 2.0, pair, 1)
        assert test.reject_prob((1, 0)) == pytest.approx(0.5, abs=1e-15)
        # general form p1 / (p1 + lam p0) on the other type
        assert test.reject_prob((0, 1)) == pytest.approx(0.5 / (0.5 + 2 * 0.75), rel=1e-14)

    def test_vanishing_ratio_rejects(self, bern_pair):
        test = nu_mp_test(4, 1.0, bern_pair, 400)
        assert test.reject_prob((0, 400)) == pytest.approx(1.0, abs=1e-12)
        assert test.reject_prob((400, 0)) < 1e-50

    @pytest.mark.parametrize("nu", [1, 1.5, 2, 4])
    def test_matches_formula_at_high_precision(self, nu, bern_pair):
        lam = 1.7
        test = nu_mp_test(nu, lam, bern_pair, 9)
        for row in test.types.counts.tolist():
            p0 = mpmath.mpf("0.5") ** 9
            p1 = mpmath.mpf("0.3") ** row[0] * mpmath.mpf("0.7") ** row[1]
            ref = 1 / (1 + (lam * p0 / p1) ** nu)
            assert test.reject_prob(row) == pytest.approx(float(ref), rel=1e-12)

    def test_lambda_must_be_positive(self, bern_pair):
        with pytest.raises(ValidationError):
            nu_mp_test(2, -1.0, bern_pair, 3)

    def test_ratio_level_sets_share_decisions(self):
        # symbols 0 and 1 carry the same likelihood ratio
        pair = HypothesisPair(make_distribution([0.2, 0.2, 0.6]),
                              make_distribution([0.4, 0.4, 0.2]), (0.3, 0.7))
        n = 5
        for test in (nu_mp_test(2, 0.8, pair, n), infty_mp_test(0.8, pair, n),
                     nu_mp_test(1, 3.0, pair, n), bayes_test(1.5, pair, n),
                     bayes_test("inf", pair, n)):
            llr = type_table(3, n).log_ratio(pair)
            rej = test.reject_probs()
            for level in np.unique(np.round(llr, 9)):
                members = rej[np.abs(llr - level) < 1e-9]
                assert np.ptp(members) == 0.0


class TestInfinityMP:
    def test_identical_laws_unit_threshold_rejects_all(self):
        pair = HypothesisPair(bernoulli(0.3), bernoulli(0.3))
        np.testing.assert_array_equal(infty_mp_test(1.0, pair, 6).reject_probs(), 1.0)

    def test_tiny_threshold_rejects_nothing(self, bern_pair):
        np.testing.assert_array_equal(infty_mp_test(1e-30, bern_pair, 6).reject_probs(), 0.0)

    def test_agrees_with_exact_ratio_test(self, rng):
        for _ in range(10):
            a, b = (Fraction(int(v), 100) for v in rng.integers(5, 96, size=2))
            if a == b:
                continue
            pair = HypothesisPair(bernoulli(float(a)), bernoulli(float(b)))
            n = int(rng.integers(1, 9))
            lam = float(np.exp(rng.normal(0, 2)))
            test = infty_mp_test(lam, pair, n)
            for seq in enumerate_sequences(2, n):
                k = sum(seq)
                lr = ((1 - a) ** (n - k) * a ** k) / ((1 - b) ** (n - k) * b ** k)
                assert test.reject_prob((n - k, k)) == float(lr <= Fraction(lam))


class TestErrors:
    def test_always_accept(self, bern_pair):
        test = constant_test(0.0, 5, 2)
        for nu in (1, 2, "inf"):
            assert nu_type1_error(test, bern_pair, nu) == 0.0
        assert nu_type2_error(test, bern_pair, "inf") == pytest.approx(1.0, abs=1e-15)

    def test_always_reject(self, bern_pair):
        test = constant_test(1.0, 5, 2)
        assert nu_type1_error(test, bern_pair, 2) == pytest.approx(2.0, abs=1e-14)
        for nu in (1, 2, "inf"):
            assert nu_type2_error(test, bern_pair, nu) == 0.0

    def test_coin(self, bern_pair):
        test = constant_test(0.5, 5, 2)
        assert nu_type1_error(test, bern_pair, "inf") == pytest.approx(0.5, abs=1e-15)
        assert nu_type2_error(test, bern_pair, 1) == pytest.approx(1.0, abs=1e-14)

    def test_log_loss_can_be_infinite(self, bern_pair):
        assert nu_type1_error(constant_test(1.0, 3, 2), bern_pair, 1) == math.inf

    @pytest.mark.parametrize("nu", [1, 1.5, 2, 4, math.inf])
    def test_match_sequence_sums(self, nu, bern_pair, rng):
        n = 6
        test = table_test(rng.uniform(0.01, 0.99, n + 1), n, 2)
        alpha, beta = direct_errors(test, bern_pair, nu)
        ep = error_pair(test, bern_pair, nu)
        assert ep.alpha == pytest.approx(alpha, rel=1e-12)
        assert ep.beta_bar == pytest.approx(beta, rel=1e-12)

    @given(st.lists(st.floats(0.0, 1.0), min_size=5, max_size=5),
           st.sampled_from([1.5, 2.0, 3.0, math.inf]))
    def test_error_ranges(self, rejects, nu):
        pair = HypothesisPair(bernoulli(0.5), bernoulli(0.7))
        test = table_test(rejects, 4, 2)
        bound = 1.0 if nu == math.inf else nu / (nu - 1)
        ep = error_pair(test, pair, nu)
        assert -1e-15 <= ep.alpha <= bound + 1e-12
        assert -1e-15 <= ep.beta_bar <= bound + 1e-12

    def test_tiny_errors_keep_relative_accuracy(self, bern_pair):
        n = 800
        test = infty_mp_test(None, bern_pair, n, log2_lam=100.0)
        rej = test.reject_probs()
        counts = test.types.counts
        accept_ones = [int(c[1]) for c, r in zip(counts, rej) if r == 0.0]
        exact = binomial_tail(n, Fraction(7, 10), accept_ones)
        got = nu_type2_error(test, bern_pair, "inf")
        assert got == pytest.approx(float(exact), rel=1e-9)
        assert got < 1e-30

    def test_deterministic_tests_give_classical_errors(self, bern_pair, rng):
        n = 10
        for _ in range(5):
            rej = rng.integers(0, 2, n + 1).astype(float)
            test = table_test(rej, n, 2)
            ones_rejected = [k for k in range(n + 1) if rej[test.types.index_of((n - k, k))]]
            ones_accepted = [k for k in range(n + 1) if k not in ones_rejected]
            alpha = binomial_tail(n, Fraction(1, 2), ones_rejected)
            beta = binomial_tail(n, Fraction(7, 10), ones_accepted)
            assert nu_type1_error(test, bern_pair, "inf") == pytest.approx(float(alpha), abs=1e-12)
            assert nu_type2_error(test, bern_pair, "inf") == pytest.approx(float(beta), abs=1e-12)
            assert classical_type2_error(test, bern_pair) == pytest.approx(float(beta), abs=1e-12)


class TestCalibration:
    @pytest.mark.parametrize("nu", [1, 1.5, 2, 4])
    @pytest.mark.parametrize("eps", [0.01, 0.1, 0.45])
    def test_hits_size(self, nu, eps, bern_pair):
        cal = calibrate_lambda(nu, eps, bern_pair, 30)
        assert abs(cal.achieved_alpha - eps) <= 1e-9
        assert abs(nu_type1_error(cal.test, bern_pair, nu) - eps) <= 1e-9

    @pytest.mark.parametrize("nu", [1.5, 2, 4])
    def test_bracket_exists(self, nu, bern_pair):
        small = nu_type1_error(nu_mp_test(nu, 1e-6, bern_pair, 5), bern_pair, nu)
        large = nu_type1_error(nu_mp_test(nu, 1e6, bern_pair, 5), bern_pair, nu)
        assert small > 1.0
        assert large < 1e-6

    def test_deterministic_size_is_a_binomial_tail(self, bern_pair):
        n, eps = 10, 0.1
        cal = calibrate_lambda("inf", eps, bern_pair, n)
        # candidate tests reject when the success count is at least k
        feasible = [binomial_tail(n, Fraction(1, 2), range(k, n + 1)) for k in range(n + 2)]
        best = max(f for f in feasible if f <= Fraction(eps))
        assert cal.achieved_alpha == pytest.approx(float(best), abs=1e-15)
        assert cal.achieved_alpha <= eps

    @pytest.mark.parametrize("nu", [1, 1.5, 2, 4])
    def test_errors_are_monotone_in_lambda(self, nu, bern_pair):
        lams = np.logspace(-3, 3, 41)
        pairs = [error_pair(nu_mp_test(nu, lam, bern_pair, 12), bern_pair, nu) for lam in lams]
        alphas = np.array([p.alpha for p in pairs])
        betas = np.array([p.beta_bar for p in pairs])
        assert np.all(np.diff(alphas) < 0)
        assert np.all(np.diff(betas) > 0)

    def test_rejects_bad_epsilon(self, bern_pair):
        for eps in (0.0, 1.0, -0.2):
            with pytest.raises(ValidationError):
                calibrate_lambda(2, eps, bern_pair, 5)

    def test_unreachable_size_reports_state(self, bern_pair):
        with pytest.raises(NumericError) as info:
            calibrate_lambda(2, 0.3, bern_pair, 5, max_iter=3)
        assert "log2_lambda_lo" in info.value.state


class TestBayes:
    def test_log_loss_accepts_with_posterior(self, rng):
        pair = HypothesisPair(make_distribution([0.2, 0.5, 0.3]),
                              make_distribution([0.4, 0.1, 0.5]), (0.35, 0.65))
        n = 4
        test = bayes_test(1, pair, n)
        tt = test.types
        for row in tt.counts.tolist():
            p0 = math.prod(Fraction(v).limit_denominator(100) ** c for v, c in zip([0.2, 0.5, 0.3], row))
            p1 = math.prod(Fraction(v).limit_denominator(100) ** c for v, c in zip([0.4, 0.1, 0.5], row))
            post0 = Fraction(35, 100) * p0 / (Fraction(35, 100) * p0 + Fraction(65, 100) * p1)
            assert test.accept_prob(row) == pytest.approx(float(post0), rel=1e-13)

    def test_equal_posteriors(self):
        pair = HypothesisPair(bernoulli(0.3), bernoulli(0.3), (0.5, 0.5))
        np.testing.assert_allclose(bayes_test(2, pair, 3).accept_probs(), 0.5, atol=1e-15)
        np.testing.assert_array_equal(bayes_test("inf", pair, 3).accept_probs(), 1.0)

    def test_infinity_is_the_posterior_comparison(self, bern_pair):
        n = 25
        test = bayes_test("inf", bern_pair, n)
        for k in range(n + 1):
            lr = Fraction(1, 2) ** n / (Fraction(3, 10) ** (n - k) * Fraction(7, 10) ** k)
            assert test.reject_prob((n - k, k)) == float(lr <= 1)

    def test_risk_examples(self, bern_pair):
        pair = bern_pair.with_prior(0.3)
        assert bayes_risk("inf", constant_test(0.0, 4, 2), pair).risk == pytest.approx(0.7)
        assert bayes_risk("inf", constant_test(0.5, 4, 2), pair).risk == pytest.approx(0.5)

    @pytest.mark.parametrize("nu", [1, 1.5, 2, 4, math.inf])
    def test_beats_random_tables(self, nu, bern_pair, rng):
        pair = bern_pair.with_prior(0.4)
        n = 5
        best = bayes_risk(nu, bayes_test(nu, pair, n), pair).risk
        for _ in range(200):
            cand = table_test(rng.uniform(0, 1, n + 1), n, 2)
            assert bayes_risk(nu, cand, pair).risk >= best - 1e-12

    def test_needs_nondegenerate_prior(self, bern_pair):
        with pytest.raises(ValidationError):
            bayes_test(2, bern_pair.with_prior(1.0), 3)
        with pytest.raises(ValidationError):
            bayes_test(2, HypothesisPair(bern_pair.p0, bern_pair.p1), 3)


class TestSerialization:
    def test_round_trip(self, bern_pair):
        tests = [nu_mp_test(2, 1.3, bern_pair, 7), infty_mp_test(0.9, bern_pair, 7),
                 bayes_test(1.5, bern_pair, 7), bayes_test("inf", bern_pair, 7),
                 table_test(np.linspace(0, 1, 8), 7, 2)]
        for test in tests:
            payload = json.loads(test.to_json())
            back = test_from_dict(payload, bern_pair)
            assert back.kind == test.kind
            np.testing.assert_allclose(back.reject_probs(), test.reject_probs(), rtol=1e-14)

    def test_kinds_flag_determinism(self):
        assert TestKind.INFTY_MP.deterministic
        assert not TestKind.NU_MP.deterministic
