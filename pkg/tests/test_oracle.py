import math

import numpy as np
import pytest

from tunable_ht import (
    HypothesisPair,
    ValidationError,
    bayes_risk,
    bayes_test,
    bernoulli,
    calibrate_lambda,
    make_distribution,
    nu_mp_test,
)
from tunable_ht.oracle import (
    OracleConfig,
    bayes_oracle,
    check_bayes_instance,
    check_mp_instance,
    chernoff_grid_oracle,
    lagrangian_mp_oracle,
    match_mp_oracle,
    random_instances,
    run_verification,
)

CFG = OracleConfig()


class TestConfig:
    def test_resolution(self):
        assert CFG.resolution == pytest.approx(1e-3)

    @pytest.mark.parametrize("kwargs", [dict(grid_points=5), dict(refinement_rounds=-1),
                                        dict(grid_points=101, zoom=100)])
    def test_rejects(self, kwargs):
        with pytest.raises(ValidationError):
            OracleConfig(**kwargs)


class TestLagrangianOracle:
    @pytest.mark.parametrize("nu", [1, 2, "inf"])
    def test_free_multiplier_always_rejects(self, nu, bern_pair):
        oracle = lagrangian_mp_oracle(nu, 0.0, bern_pair, 4)
        np.testing.assert_array_equal(oracle.accept_probs(), 0.0)

    @pytest.mark.parametrize("nu", [1.5, 2, "inf"])
    def test_huge_multiplier_always_accepts(self, nu, bern_pair):
        oracle = lagrangian_mp_oracle(nu, 1e12, bern_pair, 4)
        np.testing.assert_allclose(oracle.accept_probs(), 1.0, atol=CFG.resolution)

    def test_matched_multiplier_reproduces_closed_form(self, bern_pair):
        cal = calibrate_lambda(2, 0.2, bern_pair, 4)
        mu, oracle = match_mp_oracle(2, 0.2, bern_pair, 4)
        gap = np.max(np.abs(oracle.accept_probs() - cal.test.accept_probs()))
        assert gap <= CFG.resolution
        # the stationarity conditions tie the multiplier to the threshold
        assert mu == pytest.approx(cal.lam, rel=1e-4)

    @pytest.mark.parametrize("nu", [1, 1.5, 2, 4])
    @pytest.mark.parametrize("lam", [0.3, 1.0, 2.7])
    def test_stationarity_replay(self, nu, lam, rng):
        pair = HypothesisPair(make_distribution(rng.uniform(0.1, 1, 3)),
                              make_distribution(rng.uniform(0.1, 1, 3)))
        oracle = lagrangian_mp_oracle(nu, lam, pair, 4)
        closed = nu_mp_test(nu, lam, pair, 4)
        assert np.max(np.abs(oracle.accept_probs() - closed.accept_probs())) <= CFG.resolution

    def test_negative_multiplier(self, bern_pair):
        with pytest.raises(ValidationError):
            lagrangian_mp_oracle(2, -1.0, bern_pair, 3)


class TestBayesOracle:
    def test_certain_null_prior_accepts(self, bern_pair):
        oracle = bayes_oracle(2, bern_pair.with_prior(1.0), 4)
        np.testing.assert_array_equal(oracle.accept_probs(), 1.0)

    def test_infinity_gives_endpoints(self, bern_pair):
        oracle = bayes_oracle("inf", bern_pair, 5)
        assert set(np.unique(oracle.accept_probs())) <= {0.0, 1.0}
        closed = bayes_test("inf", bern_pair, 5)
        assert bayes_risk("inf", oracle, bern_pair).risk == pytest.approx(
            bayes_risk("inf", closed, bern_pair).risk, abs=1e-15)

    def test_nu_two_uniform_prior(self, bern_pair):
        oracle = bayes_oracle(2, bern_pair, 3)
        closed = bayes_test(2, bern_pair, 3)
        assert np.max(np.abs(oracle.accept_probs() - closed.accept_probs())) <= CFG.resolution

    @pytest.mark.parametrize("nu", [1, 1.5, 2, 4])
    def test_gap_within_one_grid_step(self, nu):
        # a convex objective's grid argmin is a neighbour of the true minimizer
        pair = HypothesisPair(bernoulli(0.5), bernoulli(0.7), (0.4, 0.6))
        closed = bayes_test(nu, pair, 6).accept_probs()
        for g in (101, 201, 401, 801, 1601):
            oracle = bayes_oracle(nu, pair, 6, OracleConfig(g, 0, 1)).accept_probs()
            assert np.max(np.abs(oracle - closed)) <= 1.0 / (g - 1)

    @pytest.mark.parametrize("nu", [1, 2, 4])
    def test_refinement_tightens(self, nu, bern_pair):
        closed = bayes_test(nu, bern_pair, 6).accept_probs()
        coarse = bayes_oracle(nu, bern_pair, 6, OracleConfig(2001, 0)).accept_probs()
        fine = bayes_oracle(nu, bern_pair, 6, OracleConfig(2001, 2)).accept_probs()
        assert np.max(np.abs(fine - closed)) < np.max(np.abs(coarse - closed)) / 100


class TestInstanceChecks:
    @pytest.mark.parametrize("nu", ["1", "2", "inf"])
    def test_mp_check_passes(self, nu, bern_pair):
        res = check_mp_instance(nu, 0.15, bern_pair, 4)
        assert res.passed, res.to_dict()
        assert res.to_dict()["check"] == "mp"

    @pytest.mark.parametrize("nu", ["1.5", "inf"])
    def test_bayes_check_passes(self, nu, bern_pair):
        res = check_bayes_instance(nu, bern_pair.with_prior(0.3), 4)
        assert res.passed, res.to_dict()
        assert res.worst_improvement <= 1e-9

    def test_instances_are_reproducible(self):
        a, b = random_instances(3, 5), random_instances(3, 5)
        assert [(i.n, i.nu, i.epsilon) for i in a] == [(i.n, i.nu, i.epsilon) for i in b]
        assert all(2 <= i.n <= 6 and 0.05 <= i.epsilon <= 0.5 for i in a)

    def test_small_verification_run(self):
        results = run_verification(seed=11, instances=5)
        assert len(results) == 10
        assert all(r.passed for r in results)


class TestChernoffGrid:
    def test_disjoint(self):
        value, _ = chernoff_grid_oracle(make_distribution([1, 0]), make_distribution([0, 1]))
        assert value == math.inf

    def test_symmetric_argmin(self):
        _, lam = chernoff_grid_oracle(bernoulli(0.2), bernoulli(0.8))
        assert lam == pytest.approx(0.5, abs=1e-4)
