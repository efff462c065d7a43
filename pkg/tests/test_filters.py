import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from abhmm.filters import (
    Belief,
    FilterConfig,
    FilterNumericError,
    abhmm_step,
    abhmm_update,
    asl_step,
    asl_update,
    bayes_step,
    bayes_update,
    belief_to_log_ratios,
    check_transition,
    equal_exit_matrix,
    full_hmm_step,
    full_hmm_update,
    linearized_abhmm_update,
    log_ratios_to_belief,
)
from abhmm.model import TabularModel


def lik_model(*rows):
    """Tabular model whose symbol 0 has the given likelihood per state."""
    col = np.array(rows, dtype=float)
    return TabularModel(np.stack([col, 1 - col], axis=1))


def random_case(rng, M):
    prior = rng.dirichlet(np.ones(M))
    loglik = rng.uniform(-20, 5, M)
    return np.log(prior), loglik


def probs_update_abhmm(prior, lik, alpha, beta):
    """Probability-domain oracle."""
    w = ((1 - alpha * len(prior)) * prior + alpha) * lik**beta
    return w / w.sum()


class TestBayes:
    def test_uniform_prior(self):
        b = bayes_step(Belief.uniform(2), 0, lik_model(0.8, 0.2))
        np.testing.assert_allclose(b.probs, [0.8, 0.2], atol=1e-15)

    def test_equal_likelihoods_identity(self):
        b = bayes_step(Belief.from_probs([0.9, 0.1]), 0, lik_model(0.5, 0.5))
        np.testing.assert_allclose(b.probs, [0.9, 0.1], atol=1e-15)

    def test_symmetric_cancellation(self):
        b = bayes_step(Belief.from_probs([0.8, 0.2]), 0, lik_model(0.2, 0.8))
        np.testing.assert_allclose(b.probs, [0.5, 0.5], atol=1e-15)

    def test_zero_prior_stays_zero(self):
        b = bayes_step(Belief.from_probs([1.0, 0.0]), 0, lik_model(0.3, 0.9))
        assert b.probs[1] == 0.0

    def test_all_zero_likelihood_raises(self):
        with pytest.raises(FilterNumericError, match="zero total mass"):
            bayes_update(np.log([0.5, 0.5]), np.array([-np.inf, -np.inf]))


class TestAbhmm:
    def test_uniform_prior_is_mixing_fixed_point(self):
        b = abhmm_step(Belief.uniform(2), 0, lik_model(0.8, 0.2), 0.1, 1.0)
        np.testing.assert_allclose(b.probs, [0.8, 0.2], atol=1e-14)

    def test_mixing_only(self):
        b = abhmm_step(Belief.from_probs([1.0, 0.0]), 0, lik_model(0.5, 0.5), 0.1, 1.0)
        np.testing.assert_allclose(b.probs, [0.9, 0.1], atol=1e-14)

    def test_memoryless_at_one_over_m(self):
        for prior in ([0.99, 0.01], [0.1, 0.9], [1.0, 0.0]):
            b = abhmm_step(Belief.from_probs(prior), 0, lik_model(0.8, 0.2), 0.5, 1.0)
            np.testing.assert_allclose(b.probs, [0.8, 0.2], atol=1e-14)

    @pytest.mark.parametrize("alpha", [-0.01, 0.51])
    def test_alpha_out_of_range(self, alpha):
        with pytest.raises(ValueError, match="alpha must be in"):
            abhmm_step(Belief.uniform(2), 0, lik_model(0.8, 0.2), alpha, 1.0)

    def test_beta_must_be_positive(self):
        with pytest.raises(ValueError, match="beta"):
            abhmm_update(np.log([0.5, 0.5]), np.zeros(2), 0.1, 0.0)

    def test_nan_loglik_raises(self):
        with pytest.raises(FilterNumericError, match="non-finite"):
            abhmm_update(np.log([0.5, 0.5]), np.array([np.nan, 0.0]), 0.1, 1.0)

    def test_matches_probability_domain_oracle(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            M = int(rng.integers(2, 8))
            prior = rng.dirichlet(np.ones(M))
            lik = rng.uniform(0.01, 2.0, M)
            alpha, beta = rng.uniform(0, 1 / M), rng.uniform(0.1, 3)
            got = np.exp(abhmm_update(np.log(prior), np.log(lik), alpha, beta))
            np.testing.assert_allclose(got, probs_update_abhmm(prior, lik, alpha, beta), rtol=1e-12)

    def test_mixing_rescues_zero_prior(self):
        out = abhmm_update(np.array([0.0, -np.inf]), np.log([0.5, 0.5]), 0.1, 1.0)
        np.testing.assert_allclose(np.exp(out), [0.9, 0.1], atol=1e-14)

    def test_positivity_floor(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            M = int(rng.integers(2, 10))
            alpha = rng.uniform(1e-3, 1 / M)
            with np.errstate(divide="ignore"):  # sparse priors may hold exact zeros
                prior = np.log(rng.dirichlet(np.full(M, 0.05)))
            loglik = rng.uniform(-300, 0, M)
            out = abhmm_update(prior, loglik, alpha, 1.0)
            mixed = (1 - alpha * M) * np.exp(prior) + alpha
            floor = np.log(alpha) + loglik - np.log(np.sum(mixed * np.exp(loglik)))
            assert np.all(out >= floor - 1e-9)
            assert np.all(np.isfinite(out))

    def test_batched_parameters(self):
        prior = np.log(np.array([[0.7, 0.3]]))
        loglik = np.log(np.array([[0.4, 0.6]]))
        alpha = np.array([0.0, 0.2, 0.5])[:, None, None]
        out = abhmm_update(prior, loglik, alpha, 1.0)
        for k, a in enumerate([0.0, 0.2, 0.5]):
            np.testing.assert_allclose(out[k, 0], abhmm_update(prior[0], loglik[0], a, 1.0), rtol=1e-14)


class TestDegeneration:
    def test_alpha_zero_is_bayes(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            M = int(rng.choice([2, 3, 5, 10]))
            lp, ll = random_case(rng, M)
            np.testing.assert_allclose(abhmm_update(lp, ll, 0.0, 1.0), bayes_update(lp, ll),
                                       atol=1e-12, rtol=0)

    def test_equal_exit_hmm(self):
        rng = np.random.default_rng(2)
        for _ in range(1000):
            M = int(rng.choice([2, 3, 5, 10]))
            h = rng.uniform(0.01, (M - 1) / M)
            lp, ll = random_case(rng, M)
            got = np.exp(abhmm_update(lp, ll, h / (M - 1), 1.0))
            want = np.exp(full_hmm_update(lp, ll, equal_exit_matrix(M, h)))
            np.testing.assert_allclose(got, want, atol=1e-10, rtol=0)

    def test_config_alpha_zero_beta_one_bit_identical_to_bayes(self):
        rng = np.random.default_rng(3)
        lp, ll = random_case(rng, 4)
        a = FilterConfig("abhmm", alpha=0.0, beta=1.0).update(lp, ll)
        np.testing.assert_allclose(a, FilterConfig("bayes").update(lp, ll), atol=1e-15, rtol=0)


class TestFullHmm:
    def test_identity_transition_is_bayes(self):
        prior = Belief.from_probs([0.2, 0.5, 0.3])
        model = lik_model(0.1, 0.6, 0.3)
        np.testing.assert_allclose(full_hmm_step(prior, 0, model, np.eye(3)).probs,
                                   bayes_step(prior, 0, model).probs, atol=1e-15)

    def test_uniform_rows_erase_prior(self):
        P = np.full((3, 3), 1 / 3)
        b = full_hmm_step(Belief.from_probs([0.98, 0.01, 0.01]), 0, lik_model(0.1, 0.6, 0.3), P)
        np.testing.assert_allclose(b.probs, [0.1, 0.6, 0.3], atol=1e-14)

    def test_rejects_non_stochastic(self):
        with pytest.raises(ValueError, match="row-stochastic"):
            check_transition([[0.5, 0.6], [0.5, 0.5]])


class TestEqualExitMatrix:
    def test_values(self):
        P = equal_exit_matrix(3, 0.2)
        np.testing.assert_allclose(np.diag(P), 0.8)
        np.testing.assert_allclose(P[~np.eye(3, dtype=bool)], 0.1)

    def test_two_state_half_is_uniform(self):
        np.testing.assert_allclose(equal_exit_matrix(2, 0.5), 0.5)

    @given(st.integers(2, 12), st.floats(1e-6, 1 - 1e-6))
    def test_row_stochastic_and_symmetric(self, M, h):
        P = equal_exit_matrix(M, h)
        np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
        np.testing.assert_array_equal(P, P.T)

    @pytest.mark.parametrize("h", [0.0, 1.0, -0.2])
    def test_rejects_h(self, h):
        with pytest.raises(ValueError, match="h must be"):
            equal_exit_matrix(3, h)


class TestLinearizedAndAsl:
    def test_alpha_zero_is_bayes(self):
        rng = np.random.default_rng(6)
        lp, ll = random_case(rng, 5)
        np.testing.assert_allclose(linearized_abhmm_update(lp, ll, 0.0, 1.0), bayes_update(lp, ll), atol=1e-12)

    def test_uniform_prior_gives_tilted_likelihood(self):
        ll = np.log([0.5, 0.3, 0.2])
        out = np.exp(linearized_abhmm_update(np.full(3, -np.log(3)), ll, 0.2, 2.0))
        w = np.array([0.5, 0.3, 0.2]) ** 2
        np.testing.assert_allclose(out, w / w.sum(), rtol=1e-13)

    def test_log_ratio_recursion(self):
        # x = -1, LLR = 0.5 -> (1 - 0.2)(-1) + 0.5 = -0.3
        prior = log_ratios_to_belief(np.array([-1.0])).log_weights
        out = linearized_abhmm_update(prior, np.array([0.0, 0.5]), 0.1, 1.0)
        assert belief_to_log_ratios(out)[0] == pytest.approx(-0.3, abs=1e-14)

    def test_zero_prior_rejected(self):
        with pytest.raises(ValueError, match="strictly positive"):
            linearized_abhmm_update(np.array([0.0, -np.inf]), np.zeros(2), 0.1, 1.0)
        with pytest.raises(ValueError, match="strictly positive"):
            asl_update(np.array([0.0, -np.inf]), np.zeros(2), 0.5)

    @pytest.mark.parametrize("delta", [0.0, 1.0])
    def test_delta_bounds(self, delta):
        with pytest.raises(ValueError, match="delta"):
            asl_update(np.log([0.5, 0.5]), np.zeros(2), delta)

    def test_asl_example(self):
        b = asl_step(Belief.uniform(2), 0, lik_model(0.8, 0.2), 0.5)
        assert belief_to_log_ratios(b)[0] == pytest.approx(0.5 * math.log(0.25), abs=1e-14)
        p = np.sqrt([0.8, 0.2])
        np.testing.assert_allclose(b.probs, p / p.sum(), atol=1e-14)
        np.testing.assert_allclose(b.probs, [2 / 3, 1 / 3], atol=1e-12)

    def test_asl_equals_linearized(self):
        rng = np.random.default_rng(9)
        for _ in range(300):
            M = int(rng.integers(2, 8))
            delta = rng.uniform(0.01, 0.99)
            lp, ll = random_case(rng, M)
            np.testing.assert_allclose(asl_update(lp, ll, delta),
                                       linearized_abhmm_update(lp, ll, delta / M, delta), atol=1e-12)

    def test_first_order_agreement_with_abhmm(self):
        # one step from x near 0: the two rules differ by O(|x|^2)
        rng = np.random.default_rng(10)
        ll = rng.uniform(-1, 1, 4)
        ratios = []
        for scale in (1e-3, 5e-4, 2.5e-4):
            x = scale * rng.uniform(-1, 1, 3)
            x = x * scale / np.abs(x).max()
            lp = log_ratios_to_belief(x).log_weights
            diff = np.abs(belief_to_log_ratios(abhmm_update(lp, ll, 0.1, 1.0))
                          - belief_to_log_ratios(linearized_abhmm_update(lp, ll, 0.1, 1.0))).max()
            ratios.append(diff / scale**2)
        K = max(ratios)
        assert K < 10.0
        assert min(ratios) > 0


class TestRatios:
    def test_uniform_is_zero(self):
        np.testing.assert_allclose(belief_to_log_ratios(Belief.uniform(4)), 0.0, atol=1e-15)

    def test_three_state_example(self):
        x = belief_to_log_ratios(Belief.from_probs([0.5, 0.3, 0.2]))
        np.testing.assert_allclose(x, [math.log(0.6), math.log(0.4)], atol=1e-14)

    def test_very_negative_concentrates_on_reference(self):
        assert log_ratios_to_belief(np.array([-800.0, -900.0])).probs[0] == pytest.approx(1.0)

    def test_zero_reference_mass(self):
        with pytest.raises(ValueError, match="reference state has zero mass"):
            belief_to_log_ratios(Belief.from_probs([0.0, 1.0]))

    @given(hnp.arrays(float, st.integers(1, 9), elements=st.floats(-40, 40)))
    def test_round_trip(self, x):
        np.testing.assert_allclose(belief_to_log_ratios(log_ratios_to_belief(x)), x, atol=1e-12)


class TestInvariants:
    @settings(max_examples=200, deadline=None)
    @given(
        st.integers(2, 10).flatmap(lambda M: st.tuples(
            hnp.arrays(float, M, elements=st.floats(0.001, 1.0)),
            hnp.arrays(float, M, elements=st.floats(-300, 300)),
            st.floats(0, 1 / M),
            st.floats(0.05, 5),
        ))
    )
    def test_normalized_under_fuzz(self, case):
        w, ll, alpha, beta = case
        lp = np.log(w / w.sum())
        for out in (
            abhmm_update(lp, ll, alpha, beta),
            linearized_abhmm_update(lp, ll, alpha, beta),
            bayes_update(lp, ll),
            asl_update(lp, ll, 0.3),
        ):
            p = np.exp(out)
            assert np.all(np.isfinite(p))
            assert abs(p.sum() - 1) <= 1e-12

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-50, 50), st.integers(0, 2**32 - 1))
    def test_scale_invariance_every_variant(self, log_c, seed):
        rng = np.random.default_rng(seed)
        lp, ll = random_case(rng, 4)
        configs = [
            FilterConfig("abhmm", alpha=0.1, beta=1.7),
            FilterConfig("linearized_abhmm", alpha=0.1, beta=0.6),
            FilterConfig("bayes"),
            FilterConfig("asl", delta=0.4),
            FilterConfig("equal_exit_hmm", h=0.3),
        ]
        for cfg in configs:
            a, b = cfg.update(lp, ll), cfg.update(lp, ll + log_c)
            np.testing.assert_allclose(np.exp(a), np.exp(b), atol=1e-12)
            assert np.argmax(a) == np.argmax(b)


class TestFilterConfig:
    def test_missing_field_named(self):
        with pytest.raises(ValueError, match="^beta: required"):
            FilterConfig("abhmm", alpha=0.1)

    def test_extra_field_named(self):
        with pytest.raises(ValueError, match="^alpha: not used"):
            FilterConfig("bayes", alpha=0.1)

    def test_unknown_variant(self):
        with pytest.raises(ValueError, match="variant"):
            FilterConfig("kalman")

    def test_label_and_dict(self):
        cfg = FilterConfig("abhmm", alpha=0.05, beta=1.0)
        assert cfg.label == "abhmm_alpha=0.05_beta=1"
        assert cfg.to_dict() == {"variant": "abhmm", "alpha": 0.05, "beta": 1.0}

    def test_full_hmm_transition_stored_as_tuple(self):
        cfg = FilterConfig("full_hmm", transition=[[0.9, 0.1], [0.2, 0.8]])
        assert isinstance(cfg.transition, tuple)
        b = cfg.step(Belief.uniform(2), 0, lik_model(0.5, 0.5))
        np.testing.assert_allclose(b.probs, [0.55, 0.45], atol=1e-14)
