import numpy as np
import pytest

from tmdp_lab.beliefs import (
    BloomConditionalModel,
    CountingBloomFilter,
    DirichletBelief,
    MarkovMixtureModel,
    START_CONTEXT,
    load_snapshot,
)


class TestDirichletBelief:
    def test_observe_increments_single_count(self):
        belief = DirichletBelief([1.0, 1.0])
        belief.observe(0)
        assert belief.pseudocounts.tolist() == [2.0, 1.0]

    def test_observe_twice(self):
        belief = DirichletBelief([2.0, 1.0])
        belief.observe(1)
        belief.observe(1)
        assert belief.pseudocounts.tolist() == [2.0, 3.0]

    def test_counts_accumulate_on_prior(self):
        belief = DirichletBelief([1.0, 1.0, 1.0])
        for action, n in ((0, 10), (1, 20), (2, 30)):
            for _ in range(n):
                belief.observe(action)
        assert belief.pseudocounts.tolist() == [11.0, 21.0, 31.0]

    def test_forget_observe_reweights_then_counts(self):
        belief = DirichletBelief([1.0, 1.0], forget_lambda=0.8)
        belief.forget_observe(0)
        assert np.allclose(belief.pseudocounts, [1.8, 0.8])

    def test_forget_with_unit_lambda_equals_observe(self):
        rng = np.random.default_rng(0)
        plain = DirichletBelief([1.0, 2.0, 0.5])
        forget = DirichletBelief([1.0, 2.0, 0.5], forget_lambda=1.0)
        for _ in range(200):
            action = int(rng.integers(3))
            plain.observe(action)
            forget.forget_observe(action)
        assert np.array_equal(plain.pseudocounts, forget.pseudocounts)

    def test_repeated_observation_approaches_geometric_limit(self):
        belief = DirichletBelief([1.0, 1.0], forget_lambda=0.8)
        for _ in range(200):
            belief.forget_observe(0)
        # limit total 1/(1-lambda) = 5 with all mass on the observed action
        assert belief.pseudocounts[0] == pytest.approx(5.0, abs=1e-9)
        assert belief.pseudocounts[1] == pytest.approx(0.0, abs=1e-9)

    def test_total_matches_closed_form(self):
        lam = 0.93
        belief = DirichletBelief([0.4, 1.1, 0.2], forget_lambda=lam)
        t0 = belief.pseudocounts.sum()
        rng = np.random.default_rng(5)
        for k in range(1, 300):
            belief.forget_observe(int(rng.integers(3)))
            expected = lam ** k * t0 + (1 - lam ** k) / (1 - lam)
            assert belief.pseudocounts.sum() == pytest.approx(expected, abs=1e-9)

    def test_predictive_examples(self):
        assert np.allclose(DirichletBelief([1, 1]).predictive(), [0.5, 0.5])
        assert np.allclose(DirichletBelief([2, 1]).predictive(), [2 / 3, 1 / 3])
        assert np.allclose(DirichletBelief([1.8, 0.8]).predictive(), [9 / 13, 4 / 13])

    def test_invalid_construction(self):
        with pytest.raises(ValueError):
            DirichletBelief([0.0, 0.0])
        with pytest.raises(ValueError):
            DirichletBelief([-1.0, 2.0])
        with pytest.raises(ValueError):
            DirichletBelief([1.0], forget_lambda=0.0)
        with pytest.raises(ValueError):
            DirichletBelief([1.0], forget_lambda=1.2)

    def test_invalid_action_index(self):
        belief = DirichletBelief([1.0, 1.0])
        with pytest.raises(IndexError):
            belief.observe(2)
        with pytest.raises(IndexError):
            belief.forget_observe(-1)

    def test_predictive_always_a_distribution(self):
        rng = np.random.default_rng(17)
        belief = DirichletBelief(rng.uniform(0.1, 2.0, 4), forget_lambda=0.9)
        for _ in range(500):
            belief.forget_observe(int(rng.integers(4)))
            p = belief.predictive()
            assert np.all(p >= 0)
            assert p.sum() == pytest.approx(1.0, abs=1e-9)


class TestCountingBloomFilter:
    def test_never_undercounts_against_dict_oracle(self):
        rng = np.random.default_rng(42)
        filt = CountingBloomFilter(capacity=2000, n_hashes=4, fp_rate=0.01)
        truth: dict[int, int] = {}
        for _ in range(3000):
            key = int(rng.integers(500))
            filt.add(key)
            truth[key] = truth.get(key, 0) + 1
        for key, count in truth.items():
            assert filt.count(key) >= count

    def test_fresh_filter_counts_zero(self):
        filt = CountingBloomFilter(capacity=100)
        assert filt.count(12345) == 0

    def test_deterministic_across_instances(self):
        a = CountingBloomFilter(capacity=100)
        b = CountingBloomFilter(capacity=100)
        for key in (3, 11, 3, 99):
            a.add(key)
            b.add(key)
        assert np.array_equal(a.counters, b.counters)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            CountingBloomFilter(capacity=0)
        with pytest.raises(ValueError):
            CountingBloomFilter(n_hashes=0)
        with pytest.raises(ValueError):
            CountingBloomFilter(fp_rate=1.5)


class TestBloomConditionalModel:
    def test_update_touches_only_one_action_filter(self):
        model = BloomConditionalModel(2)
        model.update(0, 1)
        assert model.filters[1].count(0) >= 1
        assert model.filters[0].count(0) == 0

    def test_counts_bounded_by_oracle_slack(self):
        rng = np.random.default_rng(9)
        model = BloomConditionalModel(3, capacity=10_000)
        truth = np.zeros((200, 3))
        for _ in range(5000):
            s = int(rng.integers(200))
            b = int(rng.integers(3))
            model.update(s, b)
            truth[s, b] += 1
        for s in range(200):
            counts = model.state_counts(s)
            assert np.all(counts >= truth[s])
            # overshoot stays small for a stream well under capacity
            assert np.all(counts - truth[s] <= 0.05 * truth.sum())

    def test_marginal_tracks_action_frequencies(self):
        model = BloomConditionalModel(2)
        for b in (0, 0, 1):
            model.update(5, b)
        assert np.allclose(model.marginal.predictive(), [3 / 5, 2 / 5])

    def test_unseen_state_falls_back_to_marginal(self):
        model = BloomConditionalModel(2)
        for _ in range(10):
            model.update(1, 0)
        assert np.allclose(model.conditional_predictive(999),
                           model.marginal.predictive())

    def test_hand_computed_bayes_example(self):
        model = BloomConditionalModel(2)
        for _ in range(4):
            model.filters[0].add(7)
        # uniform marginal, likelihood pseudocount 1: (4+1, 0+1) -> (5/6, 1/6)
        assert np.allclose(model.conditional_predictive(7), [5 / 6, 1 / 6])

    def test_point_mass_marginal_wins(self):
        model = BloomConditionalModel(2, marginal_prior=[1e-12, 1.0])
        for _ in range(50):
            model.filters[0].add(3)
        p = model.conditional_predictive(3)
        assert p[1] == pytest.approx(1.0, abs=1e-9)

    def test_matches_exact_oracle_in_total_variation(self):
        rng = np.random.default_rng(77)
        model = BloomConditionalModel(2, capacity=50_000)
        exact = np.zeros((100, 2))
        marginal = DirichletBelief([1.0, 1.0])
        for _ in range(2000):
            s = int(rng.integers(100))
            b = int(rng.integers(2))
            model.update(s, b)
            exact[s, b] += 1
            marginal.observe(b)
        for s in range(100):
            oracle = (exact[s] + 1.0) * marginal.predictive()
            oracle /= oracle.sum()
            tv = 0.5 * np.abs(model.conditional_predictive(s) - oracle).sum()
            assert tv <= 0.02


class TestMarkovMixtureModel:
    def test_degenerate_weight_selects_component(self):
        model = MarkovMixtureModel([1.0, 0.0, 0.0], 2, 2, 3)
        model.by_prev_dm[1] = [8.0, 2.0]
        assert np.allclose(model.predictive(1, 0, 0), [0.8, 0.2])

    def test_uniform_components_stay_uniform(self):
        model = MarkovMixtureModel([0.2, 0.3, 0.5], 2, 2, 4)
        assert np.allclose(model.predictive(0, 1, 2), [0.5, 0.5])

    def test_hand_computed_convex_combination(self):
        model = MarkovMixtureModel([0.5, 0.5, 0.0], 2, 2, 1)
        model.by_prev_dm[0] = [8.0, 2.0]
        model.by_prev_opp[1] = [2.0, 8.0]
        assert np.allclose(model.predictive(0, 1, 0), [0.5, 0.5])

    def test_observe_updates_all_three_families(self):
        model = MarkovMixtureModel([1 / 3, 1 / 3, 1 / 3], 2, 2, 2)
        model.observe(1, 0, 1, 1)
        assert model.by_prev_dm[1, 1] == 2.0
        assert model.by_prev_opp[0, 1] == 2.0
        assert model.by_state[1, 1] == 2.0

    def test_start_context_has_its_own_row(self):
        model = MarkovMixtureModel([1 / 3, 1 / 3, 1 / 3], 2, 2, 2)
        model.observe(START_CONTEXT, START_CONTEXT, 0, 0)
        assert model.by_prev_dm[START_CONTEXT, 0] == 2.0
        assert model.by_prev_dm[0, 0] == 1.0

    def test_invalid_weights_rejected(self):
        with pytest.raises(ValueError):
            MarkovMixtureModel([0.5, 0.5, 0.5], 2, 2, 2)
        with pytest.raises(ValueError):
            MarkovMixtureModel([1.0, 0.0], 2, 2, 2)

    def test_invalid_context_rejected(self):
        model = MarkovMixtureModel([1 / 3, 1 / 3, 1 / 3], 2, 2, 2)
        with pytest.raises(IndexError):
            model.predictive(2, 0, 0)
        with pytest.raises(IndexError):
            model.observe(0, 0, 5, 0)

    def test_prediction_is_distribution(self):
        rng = np.random.default_rng(3)
        model = MarkovMixtureModel([0.2, 0.5, 0.3], 2, 3, 4)
        ctx = (START_CONTEXT, START_CONTEXT)
        for _ in range(300):
            s = int(rng.integers(4))
            b = int(rng.integers(3))
            a = int(rng.integers(2))
            model.observe(ctx[0], ctx[1], s, b)
            ctx = (a, b)
            p = model.predictive(ctx[0], ctx[1], s)
            assert np.all(p >= 0)
            assert p.sum() == pytest.approx(1.0, abs=1e-9)


class TestSnapshots:
    def test_dirichlet_round_trip(self):
        belief = DirichletBelief([1.8, 0.8, 2.5], forget_lambda=0.85)
        restored = load_snapshot(belief.snapshot())
        assert np.array_equal(restored.pseudocounts, belief.pseudocounts)
        assert restored.forget_lambda == belief.forget_lambda

    def test_bloom_round_trip(self):
        rng = np.random.default_rng(12)
        model = BloomConditionalModel(2, capacity=200)
        for _ in range(100):
            model.update(int(rng.integers(50)), int(rng.integers(2)))
        restored = load_snapshot(model.snapshot())
        for s in range(50):
            assert np.allclose(restored.conditional_predictive(s),
                               model.conditional_predictive(s))

    def test_mixture_round_trip(self):
        model = MarkovMixtureModel([0.2, 0.3, 0.5], 2, 2, 3)
        model.observe(1, 1, 2, 0)
        restored = load_snapshot(model.snapshot())
        assert np.array_equal(restored.by_state, model.by_state)
        assert np.allclose(restored.predictive(1, 1, 2), model.predictive(1, 1, 2))

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            load_snapshot("kind nonsense\n")
