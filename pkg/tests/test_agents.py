import numpy as np
import pytest

from tmdp_lab.agents import (
    FpqAgent,
    IndependentQAgent,
    Level2Agent,
    LevelKAgent,
    MemorylessView,
    SmootherAdversary,
    TftAgent,
    Transition,
    WolfPhcAgent,
    build_agent,
    epsilon_greedy,
    greedy_distribution,
    levelk_build,
)
from tmdp_lab.core import LearningParams
from tmdp_lab.environments import FoeStatelessEnv, Memory1GameEnv, PRISONERS_DILEMMA


def rng(seed=0):
    return np.random.default_rng(seed)


class TestEpsilonGreedy:
    def test_pure_argmax(self):
        assert epsilon_greedy(np.array([1.0, 3.0, 2.0]), 0.0, rng()) == 1

    def test_tie_breaks_to_lowest_index(self):
        assert epsilon_greedy(np.array([5.0, 5.0]), 0.0, rng()) == 0

    def test_full_exploration_is_uniform(self):
        g = rng(123)
        counts = np.zeros(3)
        n = 10_000
        for _ in range(n):
            counts[epsilon_greedy(np.array([9.0, 0.0, 0.0]), 1.0, g)] += 1
        p = 1 / 3
        sigma = np.sqrt(n * p * (1 - p))
        assert np.all(np.abs(counts - n * p) <= 3 * sigma)

    def test_empty_vector_rejected(self):
        with pytest.raises(ValueError):
            epsilon_greedy(np.array([]), 0.0, rng())

    def test_greedy_distribution_shape(self):
        dist = greedy_distribution(np.array([0.0, 2.0, 1.0]), 0.3)
        assert dist[1] == pytest.approx(0.7 + 0.1)
        assert dist[0] == dist[2] == pytest.approx(0.1)
        assert dist.sum() == pytest.approx(1.0)


class TestFpqAgent:
    def make(self, n_states=1, eps=0.0, **kwargs):
        params = LearningParams(kwargs.pop("alpha", 0.5), kwargs.pop("gamma", 0.0), eps)
        return FpqAgent(n_states, 2, 2, params, rng(1), **kwargs)

    def test_point_mass_belief_acts_on_that_column(self):
        agent = self.make()
        agent.q[0] = [[0.0, 9.0], [1.0, -9.0]]
        agent.beliefs[0].pseudocounts = np.array([1.0, 0.0])
        assert agent.act(0) == 1  # argmax over Q(., b0)

    def test_hand_evaluated_expected_utilities(self):
        agent = self.make()
        agent.q[0] = [[0.0, -3.0], [-1.0, -1.0]]
        # uniform belief: psi = (-1.5, -1.0), so the second action wins
        assert agent.act(0) == 1

    def test_uniform_values_tie_break_to_first(self):
        agent = self.make()
        assert agent.act(0) == 0

    def test_observe_updates_belief_then_q(self):
        agent = self.make()
        agent.observe(Transition(0, 0, 1, 0.0, 0.0, 0))
        assert np.allclose(agent.beliefs[0].predictive(), [1 / 3, 2 / 3])

    def test_zero_learning_rate_leaves_q(self):
        agent = self.make(alpha=0.0)
        before = agent.q.copy()
        agent.observe(Transition(0, 0, 1, 5.0, 0.0, 0))
        assert np.array_equal(agent.q, before)
        assert agent.beliefs[0].pseudocounts[1] == 2.0

    def test_single_transition_full_rate(self):
        agent = self.make(alpha=1.0, gamma=0.0)
        agent.observe(Transition(0, 1, 0, 1.0, 0.0, 0))
        assert agent.q[0, 1, 0] == 1.0

    def test_forgetting_belief_backend(self):
        agent = self.make(forget_lambda=0.8)
        agent.observe(Transition(0, 0, 0, 0.0, 0.0, 0))
        assert np.allclose(agent.beliefs[0].pseudocounts, [1.8, 0.8])

    def test_bloom_belief_backend(self):
        params = LearningParams(0.5, 0.9, 0.0)
        agent = FpqAgent(4, 2, 2, params, rng(2), belief="bloom", bloom_capacity=1000)
        agent.observe(Transition(2, 0, 1, 1.0, 0.0, 3))
        assert agent.beliefs.filters[1].count(2) >= 1
        row = agent.belief_row(2)
        assert row.sum() == pytest.approx(1.0)

    def test_mixture_belief_backend_tracks_context(self):
        params = LearningParams(0.5, 0.9, 0.0)
        agent = FpqAgent(3, 2, 2, params, rng(2), belief="mixture")
        agent.observe(Transition(0, 1, 0, 1.0, 0.0, 1))
        assert agent._ctx == (1, 0)
        agent.start_episode()
        assert agent._ctx == (-1, -1)

    def test_unknown_backend_rejected(self):
        with pytest.raises(ValueError):
            self.make(belief="magic")


class TestLevel2Agent:
    def make(self, eps=0.0, eps_opp=0.0, alpha=1.0, gamma=0.0, **kwargs):
        params = LearningParams(alpha, gamma, eps)
        return Level2Agent(1, 2, 2, params, rng(3), epsilon_opp=eps_opp, **kwargs)

    def test_greedy_chain_follows_modeled_opponent(self):
        agent = self.make()
        agent.q_opp[0] = [[0.0, 0.0], [5.0, 5.0]]  # opponent prefers action 1
        agent.q[0] = [[0.0, 2.0], [1.0, -1.0]]
        # point prediction on b1 -> act = argmax Q(., b1) = action 0
        assert np.allclose(agent.opponent_policy(0), [0.0, 1.0])
        assert agent.act(0) == 0

    def test_zero_rates_are_noops_on_tables(self):
        agent = self.make(alpha=0.0)
        agent._params_opp = LearningParams(0.0, 0.0, 0.0)
        q_before, opp_before = agent.q.copy(), agent.q_opp.copy()
        agent.observe(Transition(0, 0, 1, 3.0, -3.0, 0))
        assert np.array_equal(agent.q, q_before)
        assert np.array_equal(agent.q_opp, opp_before)

    def test_zero_sum_single_transition(self):
        agent = self.make(alpha=1.0, gamma=0.0, opponent_reward="zero_sum")
        agent.observe(Transition(0, 1, 0, 50.0, 999.0, 0, terminal=True))
        assert agent.q[0, 1, 0] == 50.0
        assert agent.q_opp[0, 0, 1] == -50.0

    def test_observed_reward_mode_uses_transition(self):
        agent = self.make(alpha=1.0, gamma=0.0)
        agent.observe(Transition(0, 1, 0, 50.0, -7.0, 0, terminal=True))
        assert agent.q_opp[0, 0, 1] == -7.0

    def test_dm_counts_track_own_actions(self):
        agent = self.make()
        agent.observe(Transition(0, 1, 0, 0.0, 0.0, 0, terminal=True))
        agent.observe(Transition(0, 1, 1, 0.0, 0.0, 0, terminal=True))
        assert agent.dm_counts[0].tolist() == [1.0, 3.0]

    def test_commitment_mode_episode_game(self):
        agent = self.make(alpha=1.0, gamma=0.0, opponent_model="commitment")
        # mid-episode: commitment revealed, belief pins to it
        agent.observe(Transition(0, 0, 1, -1.0, 0.0, 0, terminal=False))
        assert np.allclose(agent.opponent_policy(0), [0.0, 1.0])
        # arrival at the placed target: reward positive reveals choice == commit
        agent.observe(Transition(0, 0, 1, 49.0, -50.0, 0, terminal=True))
        assert agent.dm_counts[0].tolist() == [1.0, 2.0]
        assert agent.q_opp[0, 1, 1] == -50.0
        agent.start_episode()
        assert agent._commit is None

    def test_commitment_mode_wrong_target_reconstructed(self):
        agent = self.make(alpha=1.0, gamma=0.0, opponent_model="commitment")
        # commitment 0, reward negative: the DM must have chosen target 1
        agent.observe(Transition(0, 0, 0, -51.0, 50.0, 0, terminal=True))
        assert agent.dm_counts[0].tolist() == [1.0, 2.0]
        assert agent.q_opp[0, 0, 1] == 50.0

    def test_invalid_modes_rejected(self):
        with pytest.raises(ValueError):
            self.make(opponent_reward="guess")
        with pytest.raises(ValueError):
            self.make(opponent_model="cellwise")


def drive_matrix(agent_a, agent_b, env, steps):
    s_a, s_b = env.reset()
    trace = []
    for _ in range(steps):
        a = agent_a.act(s_a)
        b = agent_b.act(s_b)
        res = env.step(a, b)
        agent_a.observe(Transition(s_a, a, b, res.r_dm, res.r_opp, res.s_dm, res.terminal))
        agent_b.observe(Transition(s_b, b, a, res.r_opp, res.r_dm, res.s_opp, res.terminal))
        trace.append((a, b))
        s_a, s_b = res.s_dm, res.s_opp
    return trace


class TestLevelK:
    def test_level_one_is_fpq(self):
        agent = levelk_build(1, 1, 2, 2, LearningParams(0.3, 0.9, 0.1), rng(0))
        assert isinstance(agent, FpqAgent)

    def test_level_one_trace_matches_fpq(self):
        params = LearningParams(0.3, 0.96, 0.1)
        env = Memory1GameEnv(PRISONERS_DILEMMA)
        stack = levelk_build(1, env.n_states, 2, 2, params, rng(11))
        plain = FpqAgent(env.n_states, 2, 2, params, rng(11))
        opp_a, opp_b = IndependentQAgent(env.n_states, 2, params, rng(77)), \
            IndependentQAgent(env.n_states, 2, params, rng(77))
        t1 = drive_matrix(stack, opp_a, Memory1GameEnv(PRISONERS_DILEMMA), 1000)
        t2 = drive_matrix(plain, opp_b, Memory1GameEnv(PRISONERS_DILEMMA), 1000)
        assert t1 == t2

    def test_level_two_trace_matches_level2(self):
        params = LearningParams(0.3, 0.96, 0.1)
        env = Memory1GameEnv(PRISONERS_DILEMMA)
        stack = levelk_build(2, env.n_states, 2, 2, params, rng(21))
        direct = Level2Agent(env.n_states, 2, 2, params, rng(21))
        opp_a = IndependentQAgent(env.n_states, 2, params, rng(78))
        opp_b = IndependentQAgent(env.n_states, 2, params, rng(78))
        t1 = drive_matrix(stack, opp_a, Memory1GameEnv(PRISONERS_DILEMMA), 1000)
        t2 = drive_matrix(direct, opp_b, Memory1GameEnv(PRISONERS_DILEMMA), 1000)
        assert t1 == t2

    def test_level_three_runs_and_follows_nested_argmax(self):
        params = LearningParams(0.1, 0.8, 0.0)
        agent = levelk_build(3, 1, 2, 2, params, rng(31))
        assert isinstance(agent, LevelKAgent) and agent.level == 3
        env = FoeStatelessEnv()
        adversary = SmootherAdversary(2)
        for _ in range(200):
            a = agent.act(0)
            b = adversary.act(0)
            res = env.step(a, b)
            agent.observe(Transition(0, a, b, res.r_dm, res.r_opp, 0))
            adversary.observe(Transition(0, b, a, res.r_opp, res.r_dm, 0))
        predicted = agent.inner.policy(0)
        assert agent.act(0) == int(np.argmax(agent.q[0] @ predicted))

    def test_invalid_level_rejected(self):
        with pytest.raises(ValueError):
            levelk_build(0, 1, 2, 2, LearningParams(0.1, 0.9), rng(0))


class TestWolfPhc:
    def make(self, **kwargs):
        params = LearningParams(kwargs.pop("alpha", 1.0), kwargs.pop("gamma", 0.0), 0.0)
        return WolfPhcAgent(1, 2, params, rng(4), **kwargs)

    def test_winning_step_moves_policy_by_delta_win(self):
        agent = self.make(delta_win=0.1, delta_lose=0.2)
        agent.q[0] = [1.0, 0.0]
        # reward keeps Q unchanged; avg policy equals current -> "winning"
        agent.observe(Transition(0, 0, 0, 1.0, 0.0, 0, terminal=True))
        assert np.allclose(agent.policy_table[0], [0.6, 0.4])

    def test_point_mass_on_greedy_is_stable(self):
        agent = self.make()
        agent.q[0] = [1.0, 0.0]
        agent.policy_table[0] = [1.0, 0.0]
        agent.avg_policy[0] = [1.0, 0.0]
        agent.observe(Transition(0, 0, 0, 1.0, 0.0, 0, terminal=True))
        assert np.allclose(agent.policy_table[0], [1.0, 0.0])

    def test_average_policy_is_running_mean(self):
        agent = self.make()
        agent.q[0] = [1.0, 0.0]
        agent.policy_table[0] = [0.7, 0.3]
        for _ in range(5):
            snapshot = agent.policy_table[0].copy()
            agent.observe(Transition(0, 0, 0, 1.0, 0.0, 0, terminal=True))
            # next average includes the snapshot seen at observe time
        assert agent.visit_counts[0] == 5

    def test_losing_uses_larger_step(self):
        agent = self.make(delta_win=0.05, delta_lose=0.2)
        agent.q[0] = [1.0, 0.0]
        agent.policy_table[0] = [0.2, 0.8]
        agent.avg_policy[0] = [0.9, 0.1]  # average is better -> losing
        agent.visit_counts[0] = 100       # keep the mean update tiny
        agent.observe(Transition(0, 0, 0, 1.0, 0.0, 0, terminal=True))
        assert agent.policy_table[0][0] == pytest.approx(0.2 + 0.2, abs=0.02)

    def test_policy_stays_on_simplex_under_random_stream(self):
        params = LearningParams(0.3, 0.9, 0.2)
        agent = WolfPhcAgent(3, 3, params, rng(5))
        g = rng(6)
        for _ in range(2000):
            s = int(g.integers(3))
            t = Transition(s, agent.act(s), 0, float(g.normal()), 0.0, int(g.integers(3)))
            agent.observe(t)
        assert np.all(agent.policy_table >= 0)
        assert np.allclose(agent.policy_table.sum(axis=1), 1.0)
        assert np.allclose(agent.avg_policy.sum(axis=1), 1.0)

    def test_delta_ordering_enforced(self):
        with pytest.raises(ValueError):
            self.make(delta_win=0.3, delta_lose=0.2)

    def test_identical_snapshots_average_to_policy(self):
        agent = self.make()
        agent.q[0] = [1.0, 0.0]
        agent.policy_table[0] = [1.0, 0.0]  # stable under updates
        for _ in range(7):
            agent.observe(Transition(0, 0, 0, 1.0, 0.0, 0, terminal=True))
        assert np.allclose(agent.avg_policy[0], [1.0, 0.0])


class TestTft:
    def test_cooperates_at_start_state(self):
        assert TftAgent().act(0) == 0

    def test_replicates_counterpart_previous_action(self):
        agent = TftAgent()
        # own-perspective encoding: s = 1 + own_prev * 2 + opp_prev
        assert agent.act(1 + 0 * 2 + 1) == 1
        assert agent.act(1 + 1 * 2 + 0) == 0

    def test_two_tft_agents_cooperate_forever(self):
        env = Memory1GameEnv(PRISONERS_DILEMMA)
        trace = drive_matrix(TftAgent(), TftAgent(), env, 50)
        assert trace == [(0, 0)] * 50

    def test_non_memory1_state_rejected(self):
        with pytest.raises(ValueError):
            TftAgent().act(9)


class TestSmootherAdversary:
    def test_documented_update_and_placement(self):
        agent = SmootherAdversary(2, smoother_alpha=0.8)
        agent.update_estimate(0)
        assert np.allclose(agent.p, [0.6, 0.4])
        assert agent.act() == 1

    def test_alternating_choices_keep_estimate_interior(self):
        agent = SmootherAdversary(2, smoother_alpha=0.8)
        for i in range(200):
            agent.update_estimate(i % 2)
            assert 0.0 < agent.p[0] < 1.0
            assert agent.p.sum() == pytest.approx(1.0)

    def test_alpha_near_one_freezes_estimate(self):
        agent = SmootherAdversary(2, smoother_alpha=1 - 1e-12)
        before = agent.p.copy()
        agent.update_estimate(0)
        assert np.allclose(agent.p, before, atol=1e-11)

    def test_alpha_bounds_enforced(self):
        with pytest.raises(ValueError):
            SmootherAdversary(2, smoother_alpha=1.0)
        with pytest.raises(ValueError):
            SmootherAdversary(2, smoother_alpha=0.0)

    def test_observe_reads_counterpart_action(self):
        agent = SmootherAdversary(2, smoother_alpha=0.5)
        agent.observe(Transition(0, 0, 1, 0.0, 0.0, 0))
        assert np.allclose(agent.p, [0.25, 0.75])


class TestBuildAgentAndDeterminism:
    SPECS = [
        {"kind": "independent-q", "alpha": 0.3, "gamma": 0.9, "epsilon": 0.1},
        {"kind": "fpq", "alpha": 0.3, "gamma": 0.9, "epsilon": 0.1},
        {"kind": "fpq", "alpha": 0.3, "gamma": 0.9, "epsilon": 0.1, "forget_lambda": 0.8},
        {"kind": "level2", "alpha": 0.3, "gamma": 0.9, "epsilon": 0.1},
        {"kind": "levelk", "k": 3, "alpha": 0.3, "gamma": 0.9, "epsilon": 0.1},
        {"kind": "wolf-phc", "alpha": 0.3, "gamma": 0.9, "epsilon": 0.1},
        {"kind": "tft"},
        {"kind": "smoother-adversary", "smoother_alpha": 0.8},
    ]

    @pytest.mark.parametrize("spec", SPECS, ids=lambda s: s["kind"] + str(s.get("k", s.get("forget_lambda", ""))))
    def test_trace_is_reproducible_per_seed(self, spec):
        def trace():
            env = Memory1GameEnv(PRISONERS_DILEMMA)
            agent = build_agent(dict(spec), env.n_states, 2, 2, np.random.default_rng(42))
            opp = IndependentQAgent(env.n_states, 2, LearningParams(0.3, 0.9, 0.1),
                                    np.random.default_rng(7))
            return drive_matrix(agent, opp, env, 400)

        assert trace() == trace()

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            build_agent({"kind": "psychic"}, 1, 2, 2, rng(0))

    def test_unknown_option_rejected(self):
        with pytest.raises(ValueError):
            build_agent({"kind": "fpq", "warp": 9}, 1, 2, 2, rng(0))

    def test_memoryless_wrapper_pins_state_zero(self):
        agent = build_agent({"kind": "fpq", "memoryless": True, "alpha": 0.5,
                             "gamma": 0.0, "epsilon": 0.0}, 5, 2, 2, rng(0))
        assert isinstance(agent, MemorylessView)
        agent.observe(Transition(3, 0, 1, 1.0, 0.0, 4))
        assert agent.inner.q.shape[0] == 1
        assert agent.inner.beliefs[0].pseudocounts[1] == 2.0

    def test_actions_always_in_range(self):
        env = Memory1GameEnv(PRISONERS_DILEMMA)
        for spec in self.SPECS:
            agent = build_agent(dict(spec), env.n_states, 2, 2, rng(9))
            opp = IndependentQAgent(env.n_states, 2, LearningParams(0.3, 0.9, 0.5), rng(10))
            for a, b in drive_matrix(agent, opp, env, 200):
                assert a in (0, 1) and b in (0, 1)
