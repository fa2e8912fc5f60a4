"""Agent behaviors behind one interface: ``act(s)`` and ``observe(transition)``.

Seven kinds are available through :func:`build_agent`:

* ``independent-q`` -- opponent-agnostic Q-learner.
* ``fpq`` -- joint-action Q-learner scoring actions by their belief-weighted
  value (fictitious play over the opponent's observed actions).
* ``level2`` -- models the opponent as an ``fpq`` learner and best-responds
  to the policy that model implies.
* ``levelk`` -- the same idea stacked k levels deep, bottoming out in ``fpq``.
* ``wolf-phc`` -- mixed-policy hill climber with a small step when winning
  and a large one when losing.
* ``tft`` -- cooperates first, then mirrors the counterpart's previous move
  (memory-1 games only).
* ``smoother-adversary`` -- tracks the DM's choices with an exponential
  smoother and places the reward where she is least expected to go.

Transitions are always expressed in the observing agent's own perspective:
``a`` is that agent's action, ``b`` the counterpart's, ``r_dm`` its own
reward.  Each agent owns one RNG stream, so action traces are reproducible
per seed regardless of who else is in the simulation.
"""
from __future__ import annotations

import dataclasses
from typing import NamedTuple

import numpy as np

from .beliefs import START_CONTEXT, BloomConditionalModel, DirichletBelief, MarkovMixtureModel
from .core import (
    LearningParams,
    new_joint_q_table,
    new_q_table,
    q_update_independent,
    q_update_joint_row,
)

AGENT_KINDS = (
    "independent-q",
    "fpq",
    "level2",
    "levelk",
    "wolf-phc",
    "tft",
    "smoother-adversary",
)


class Transition(NamedTuple):
    """One observed step: state, joint action, both rewards, next state."""

    s: int
    a: int
    b: int
    r_dm: float
    r_opp: float
    s_next: int
    terminal: bool = False

    def swapped(self, r_dm_override: float | None = None) -> "Transition":
        """The same step seen from the counterpart's side."""
        r_own = self.r_opp if r_dm_override is None else r_dm_override
        return Transition(self.s, self.b, self.a, r_own, self.r_dm, self.s_next, self.terminal)


def epsilon_greedy(values, epsilon: float, rng: np.random.Generator) -> int:
    """Argmax with lowest-index tie-break, or a uniform action with prob. epsilon."""
    values = np.asarray(values)
    if values.size == 0:
        raise ValueError("cannot pick an action from an empty value vector")
    if rng.random() < epsilon:
        return int(rng.integers(values.size))
    return int(np.argmax(values))


def greedy_distribution(values, epsilon: float) -> np.ndarray:
    """The epsilon-greedy policy over ``values`` as an explicit distribution."""
    values = np.asarray(values)
    n = values.size
    policy = np.full(n, epsilon / n)
    policy[int(np.argmax(values))] += 1.0 - epsilon
    return policy


def _sample_index(p: np.ndarray, rng: np.random.Generator) -> int:
    """Draw an index from a probability vector."""
    return min(int(np.searchsorted(np.cumsum(p), rng.random(), side="right")), p.size - 1)


def _array_lines(name: str, arr: np.ndarray) -> list[str]:
    return [
        f"{name}_shape " + " ".join(str(d) for d in arr.shape),
        f"{name} " + " ".join(repr(float(v)) for v in np.asarray(arr, dtype=float).ravel()),
    ]


class Agent:
    """Base interface; concrete agents fill in ``act`` and ``observe``."""

    kind = "abstract"

    def act(self, s: int) -> int:
        raise NotImplementedError

    def observe(self, t: Transition) -> None:
        raise NotImplementedError

    def start_episode(self) -> None:
        """Hook called at every episode reset; most agents carry nothing over."""

    def policy(self, s: int) -> np.ndarray:
        """Action distribution at ``s``; defined for the model-usable agents."""
        raise NotImplementedError(f"{self.kind} agents do not expose a policy")

    def scale_epsilon(self, factor: float, inner_factor: float | None = None) -> None:
        """Apply one exploration-decay step; no-op for non-exploring agents."""

    @property
    def epsilon(self) -> float:
        return 0.0

    def snapshot(self) -> str:
        raise NotImplementedError


class IndependentQAgent(Agent):
    """Plain Q-learner that treats the opponent as part of the environment."""

    kind = "independent-q"

    def __init__(self, n_states: int, n_actions: int, params: LearningParams,
                 rng: np.random.Generator):
        self.n_actions = n_actions
        self.params = params
        self.rng = rng
        self.q = new_q_table(n_states, n_actions)

    def act(self, s: int) -> int:
        return epsilon_greedy(self.q[s], self.params.epsilon, self.rng)

    def observe(self, t: Transition) -> None:
        self.q = q_update_independent(self.q, t.s, t.a, t.r_dm, t.s_next, self.params, t.terminal)

    def scale_epsilon(self, factor, inner_factor=None):
        self.params = dataclasses.replace(self.params, epsilon=self.params.epsilon * factor)

    @property
    def epsilon(self) -> float:
        return self.params.epsilon

    def snapshot(self) -> str:
        return "\n".join(["kind independent-q", *_array_lines("q", self.q)]) + "\n"


class FpqAgent(Agent):
    """Joint-action Q-learner weighting values by an opponent belief.

    Acting scores each own action a by psi(a) = sum_b Q(s,a,b) p(b|s) under
    the current belief and is epsilon-greedy over psi.  Observing first folds
    the opponent's move into the belief, then updates Q with the post-update
    belief at the next state.  The belief backend is a per-state Dirichlet
    (optionally forgetting), a bloom-filter conditional model, or a
    Markov-mixture over previous-action contexts.
    """

    kind = "fpq"

    def __init__(self, n_states: int, n_dm_actions: int, n_opp_actions: int,
                 params: LearningParams, rng: np.random.Generator,
                 prior=None, forget_lambda: float = 1.0, belief: str = "dirichlet",
                 bloom_capacity: int = 100_000, bloom_hashes: int = 4,
                 bloom_fp_rate: float = 0.01, mixture_weights=None):
        self.n_dm_actions = n_dm_actions
        self.n_opp_actions = n_opp_actions
        self.params = params
        self.rng = rng
        self.q = new_joint_q_table(n_states, n_dm_actions, n_opp_actions)
        if prior is None:
            prior = np.ones(n_opp_actions)
        prior = np.broadcast_to(np.asarray(prior, dtype=float), (n_opp_actions,))
        self.belief_kind = belief
        if belief == "dirichlet":
            self.beliefs = [DirichletBelief(prior, forget_lambda) for _ in range(n_states)]
        elif belief == "bloom":
            self.beliefs = BloomConditionalModel(
                n_opp_actions, marginal_prior=prior, capacity=bloom_capacity,
                n_hashes=bloom_hashes, fp_rate=bloom_fp_rate, forget_lambda=forget_lambda,
            )
        elif belief == "mixture":
            if mixture_weights is None:
                mixture_weights = np.full(3, 1.0 / 3.0)
            self.beliefs = MarkovMixtureModel(
                mixture_weights, n_dm_actions, n_opp_actions, n_states,
            )
            self._ctx = (START_CONTEXT, START_CONTEXT)
        else:
            raise ValueError(f"unknown belief backend {belief!r}")

    def belief_row(self, s: int) -> np.ndarray:
        if self.belief_kind == "dirichlet":
            return self.beliefs[s].predictive()
        if self.belief_kind == "bloom":
            return self.beliefs.conditional_predictive(s)
        return self.beliefs.predictive(self._ctx[0], self._ctx[1], s)

    def _psi(self, s: int) -> np.ndarray:
        return self.q[s] @ self.belief_row(s)

    def act(self, s: int) -> int:
        return epsilon_greedy(self._psi(s), self.params.epsilon, self.rng)

    def policy(self, s: int) -> np.ndarray:
        return greedy_distribution(self._psi(s), self.params.epsilon)

    def observe(self, t: Transition) -> None:
        if self.belief_kind == "dirichlet":
            self.beliefs[t.s].forget_observe(t.b)
        elif self.belief_kind == "bloom":
            self.beliefs.update(t.s, t.b)
        else:
            self.beliefs.observe(self._ctx[0], self._ctx[1], t.s, t.b)
            self._ctx = (t.a, t.b)
        row = None if t.terminal else self.belief_row(t.s_next)
        self.q = q_update_joint_row(
            self.q, t.s, t.a, t.b, t.r_dm, t.s_next, row, self.params, t.terminal
        )

    def start_episode(self) -> None:
        if self.belief_kind == "mixture":
            self._ctx = (START_CONTEXT, START_CONTEXT)

    def scale_epsilon(self, factor, inner_factor=None):
        self.params = dataclasses.replace(self.params, epsilon=self.params.epsilon * factor)

    @property
    def epsilon(self) -> float:
        return self.params.epsilon

    def snapshot(self) -> str:
        lines = ["kind fpq", f"belief {self.belief_kind}", *_array_lines("q", self.q)]
        if self.belief_kind == "dirichlet":
            counts = np.stack([belief.pseudocounts for belief in self.beliefs])
            lines += _array_lines("belief_pseudocounts", counts)
        else:
            lines += ["belief_snapshot", self.beliefs.snapshot().rstrip("\n")]
        return "\n".join(lines) + "\n"


class LevelKAgent(Agent):
    """Joint-action learner that carries a level-(k-1) model of its opponent.

    The inner model is a full agent for the opposite seat.  Its epsilon-greedy
    policy serves as the opponent belief for both acting and the Q target;
    every observed transition is also replayed into the inner model with the
    roles (and rewards) swapped.
    """

    kind = "levelk"

    def __init__(self, level: int, n_states: int, n_dm_actions: int, n_opp_actions: int,
                 params: LearningParams, rng: np.random.Generator, inner: Agent,
                 opponent_reward: str = "observed"):
        if level < 2:
            raise ValueError("LevelKAgent is for levels >= 2; level 1 is FpqAgent")
        if opponent_reward not in ("observed", "zero_sum"):
            raise ValueError(f"unknown opponent_reward mode {opponent_reward!r}")
        self.level = level
        self.params = params
        self.rng = rng
        self.inner = inner
        self.opponent_reward = opponent_reward
        self.q = new_joint_q_table(n_states, n_dm_actions, n_opp_actions)

    def opponent_policy(self, s: int) -> np.ndarray:
        """Predicted distribution of the opponent's next action at ``s``."""
        return self.inner.policy(s)

    def _psi(self, s: int) -> np.ndarray:
        return self.q[s] @ self.inner.policy(s)

    def act(self, s: int) -> int:
        return epsilon_greedy(self._psi(s), self.params.epsilon, self.rng)

    def policy(self, s: int) -> np.ndarray:
        return greedy_distribution(self._psi(s), self.params.epsilon)

    def observe(self, t: Transition) -> None:
        r_model = None if self.opponent_reward == "observed" else -t.r_dm
        self.inner.observe(t.swapped(r_dm_override=r_model))
        row = None if t.terminal else self.inner.policy(t.s_next)
        self.q = q_update_joint_row(
            self.q, t.s, t.a, t.b, t.r_dm, t.s_next, row, self.params, t.terminal
        )

    def start_episode(self) -> None:
        self.inner.start_episode()

    def scale_epsilon(self, factor, inner_factor=None):
        self.params = dataclasses.replace(self.params, epsilon=self.params.epsilon * factor)
        if inner_factor is not None:
            self.inner.scale_epsilon(inner_factor, inner_factor)

    @property
    def epsilon(self) -> float:
        return self.params.epsilon

    def snapshot(self) -> str:
        lines = [f"kind levelk level {self.level}", *_array_lines("q", self.q),
                 "inner_snapshot", self.inner.snapshot().rstrip("\n")]
        return "\n".join(lines) + "\n"


class Level2Agent(Agent):
    """Explicit two-level learner: the opponent is modeled as a level-1 learner.

    Keeps an own joint table Q_dm(s, a, b) and a modeled opponent table
    Q_opp(s, b, a) together with per-state counts of the DM's own plays (the
    opponent's level-0 view of her).  Each observation updates, in order: the
    play counts, Q_opp with rate ``alpha_opp``, the opponent policy estimate
    (epsilon_opp-greedy over the modeled values), and finally Q_dm against
    that estimate.  Behavior matches a two-deep ``LevelKAgent`` trace for
    trace; the recursion and this direct form cross-check each other.

    ``opponent_model="commitment"`` covers adversaries that commit one action
    per episode (the spatial friend-or-foe placer): the inner model then plays
    the episode-level game of placements against the DM's realized target
    choices, and within an episode the revealed commitment replaces the
    prediction.
    """

    kind = "level2"

    def __init__(self, n_states: int, n_dm_actions: int, n_opp_actions: int,
                 params: LearningParams, rng: np.random.Generator,
                 alpha_opp: float | None = None, epsilon_opp: float | None = None,
                 inner_forget_lambda: float = 1.0, opponent_reward: str = "observed",
                 opponent_model: str = "state"):
        if opponent_reward not in ("observed", "zero_sum"):
            raise ValueError(f"unknown opponent_reward mode {opponent_reward!r}")
        if opponent_model not in ("state", "commitment"):
            raise ValueError(f"unknown opponent_model mode {opponent_model!r}")
        self.params = params
        self.rng = rng
        self.alpha_opp = params.alpha if alpha_opp is None else alpha_opp
        self.epsilon_opp = params.epsilon if epsilon_opp is None else epsilon_opp
        self.inner_forget_lambda = inner_forget_lambda
        self.opponent_reward = opponent_reward
        self.opponent_model = opponent_model
        self.q = new_joint_q_table(n_states, n_dm_actions, n_opp_actions)
        if opponent_model == "state":
            self.q_opp = new_joint_q_table(n_states, n_opp_actions, n_dm_actions)
            self.dm_counts = np.ones((n_states, n_dm_actions))
        else:
            # Episode-level game: the DM answers a placement with a target
            # choice, so both sides of the inner tables range over targets.
            self.q_opp = new_joint_q_table(1, n_opp_actions, n_opp_actions)
            self.dm_counts = np.ones((1, n_opp_actions))
            self._commit: int | None = None
        self._params_opp = LearningParams(self.alpha_opp, params.gamma, self.epsilon_opp)

    def _dm_policy_row(self, s: int) -> np.ndarray:
        row = self.dm_counts[s]
        return row / row.sum()

    def opponent_policy(self, s: int) -> np.ndarray:
        """Estimated opponent policy: epsilon-greedy over the modeled values."""
        if self.opponent_model == "commitment":
            if self._commit is not None:
                row = np.zeros(self.q_opp.shape[1])
                row[self._commit] = 1.0
                return row
            s = 0
        psi_opp = self.q_opp[s] @ self._dm_policy_row(s)
        return greedy_distribution(psi_opp, self.epsilon_opp)

    def _psi(self, s: int) -> np.ndarray:
        return self.q[s] @ self.opponent_policy(s)

    def act(self, s: int) -> int:
        return epsilon_greedy(self._psi(s), self.params.epsilon, self.rng)

    def policy(self, s: int) -> np.ndarray:
        return greedy_distribution(self._psi(s), self.params.epsilon)

    def observe(self, t: Transition) -> None:
        if self.opponent_model == "commitment":
            self._observe_commitment(t)
            return
        r_opp = t.r_opp if self.opponent_reward == "observed" else -t.r_dm
        counts = self.dm_counts[t.s]
        counts *= self.inner_forget_lambda
        counts[t.a] += 1.0
        dm_row_next = self._dm_policy_row(t.s_next)
        self.q_opp = q_update_joint_row(
            self.q_opp, t.s, t.b, t.a, r_opp, t.s_next,
            None if t.terminal else dm_row_next, self._params_opp, t.terminal,
        )
        if t.terminal:
            opp_row = None
        else:
            opp_row = greedy_distribution(self.q_opp[t.s_next] @ dm_row_next, self.epsilon_opp)
        self.q = q_update_joint_row(
            self.q, t.s, t.a, t.b, t.r_dm, t.s_next, opp_row, self.params, t.terminal
        )

    def _observe_commitment(self, t: Transition) -> None:
        self._commit = t.b
        if t.terminal:
            # The episode resolved at a target.  The sign of the DM's reward
            # reveals her realized choice (reward magnitude dominates the step
            # penalty), which is what the real adversary reacts to.
            choice = t.b if t.r_dm > 0 else 1 - t.b
            r_opp = t.r_opp if self.opponent_reward == "observed" else -t.r_dm
            counts = self.dm_counts[0]
            counts *= self.inner_forget_lambda
            counts[choice] += 1.0
            self.q_opp = q_update_joint_row(
                self.q_opp, 0, t.b, choice, r_opp, 0, None, self._params_opp, True,
            )
            row = None
        else:
            row = self.opponent_policy(t.s_next)
        self.q = q_update_joint_row(
            self.q, t.s, t.a, t.b, t.r_dm, t.s_next, row, self.params, t.terminal
        )

    def start_episode(self) -> None:
        if self.opponent_model == "commitment":
            self._commit = None

    def scale_epsilon(self, factor, inner_factor=None):
        self.params = dataclasses.replace(self.params, epsilon=self.params.epsilon * factor)
        if inner_factor is not None:
            self.epsilon_opp *= inner_factor
            self._params_opp = dataclasses.replace(
                self._params_opp, epsilon=self._params_opp.epsilon * inner_factor
            )

    @property
    def epsilon(self) -> float:
        return self.params.epsilon

    def snapshot(self) -> str:
        lines = ["kind level2", *_array_lines("q", self.q),
                 *_array_lines("q_opp", self.q_opp),
                 *_array_lines("dm_counts", self.dm_counts)]
        return "\n".join(lines) + "\n"


class WolfPhcAgent(Agent):
    """Policy hill climber with win-or-learn-fast step sizes.

    Samples from a mixed policy, learns Q with the independent rule, and after
    each step nudges the policy toward the greedy action: by ``delta_win``
    when the current policy already beats the historical average policy, by
    the larger ``delta_lose`` otherwise.  The policy is clipped to the simplex
    and renormalized after every move.
    """

    kind = "wolf-phc"

    def __init__(self, n_states: int, n_actions: int, params: LearningParams,
                 rng: np.random.Generator, delta_win: float = 0.05, delta_lose: float = 0.2):
        if not 0 < delta_win < delta_lose:
            raise ValueError("need 0 < delta_win < delta_lose")
        self.n_actions = n_actions
        self.params = params
        self.rng = rng
        self.delta_win = delta_win
        self.delta_lose = delta_lose
        self.q = new_q_table(n_states, n_actions)
        self.policy_table = np.full((n_states, n_actions), 1.0 / n_actions)
        self.avg_policy = np.full((n_states, n_actions), 1.0 / n_actions)
        self.visit_counts = np.zeros(n_states, dtype=np.int64)

    def act(self, s: int) -> int:
        if self.rng.random() < self.params.epsilon:
            return int(self.rng.integers(self.n_actions))
        return _sample_index(self.policy_table[s], self.rng)

    def observe(self, t: Transition) -> None:
        self.q = q_update_independent(self.q, t.s, t.a, t.r_dm, t.s_next, self.params, t.terminal)
        s = t.s
        self.visit_counts[s] += 1
        self.avg_policy[s] += (self.policy_table[s] - self.avg_policy[s]) / self.visit_counts[s]
        q_row = self.q[s]
        winning = float(self.policy_table[s] @ q_row) >= float(self.avg_policy[s] @ q_row)
        delta = self.delta_win if winning else self.delta_lose
        self.policy_table[s] = self._hill_climb(self.policy_table[s], q_row, delta)

    def _hill_climb(self, policy: np.ndarray, q_row: np.ndarray, delta: float) -> np.ndarray:
        if self.n_actions == 1:
            return policy
        greedy = int(np.argmax(q_row))
        moved = policy - delta / (self.n_actions - 1)
        moved[greedy] = policy[greedy] + delta
        np.clip(moved, 0.0, None, out=moved)
        return moved / moved.sum()

    def scale_epsilon(self, factor, inner_factor=None):
        self.params = dataclasses.replace(self.params, epsilon=self.params.epsilon * factor)

    @property
    def epsilon(self) -> float:
        return self.params.epsilon

    def snapshot(self) -> str:
        lines = ["kind wolf-phc", *_array_lines("q", self.q),
                 *_array_lines("policy", self.policy_table),
                 *_array_lines("avg_policy", self.avg_policy),
                 *_array_lines("visit_counts", self.visit_counts)]
        return "\n".join(lines) + "\n"


class TftAgent(Agent):
    """Cooperate on the opening move, then mirror the counterpart's last move.

    Requires the memory-1 state encoding: state 0 is the opening state and
    state 1 + own_prev * n_opp + opp_prev remembers the previous joint action
    from this agent's perspective.
    """

    kind = "tft"

    def __init__(self, n_own_actions: int = 2, n_opp_actions: int = 2):
        self.n_own_actions = n_own_actions
        self.n_opp_actions = n_opp_actions

    def act(self, s: int) -> int:
        if not 0 <= s < 1 + self.n_own_actions * self.n_opp_actions:
            raise ValueError(f"state {s} is not memory-1 encoded")
        if s == 0:
            return 0
        return (s - 1) % self.n_opp_actions

    def observe(self, t: Transition) -> None:
        pass

    def snapshot(self) -> str:
        return "kind tft\n"


class SmootherAdversary(Agent):
    """Adaptive target placer driven by an exponential smoother.

    Keeps an estimate ``p`` of which target the DM favors, updated as
    p <- alpha p + (1 - alpha) onehot(choice) on every revealed DM choice, and
    places the positive reward at the target with the smallest estimate.
    """

    kind = "smoother-adversary"

    def __init__(self, n_targets: int = 2, smoother_alpha: float = 0.8):
        if not 0.0 < smoother_alpha < 1.0:
            raise ValueError(f"smoother_alpha must be in (0, 1), got {smoother_alpha}")
        self.smoother_alpha = float(smoother_alpha)
        self.p = np.full(n_targets, 1.0 / n_targets)

    def act(self, s: int = 0) -> int:
        return int(np.argmin(self.p))

    def update_estimate(self, dm_choice: int) -> None:
        if not 0 <= dm_choice < self.p.size:
            raise IndexError(f"target {dm_choice} out of range [0, {self.p.size})")
        self.p *= self.smoother_alpha
        self.p[dm_choice] += 1.0 - self.smoother_alpha

    def observe(self, t: Transition) -> None:
        # t.b carries the DM's revealed target choice in this agent's perspective.
        self.update_estimate(t.b)

    def snapshot(self) -> str:
        return "\n".join(["kind smoother-adversary", *_array_lines("p", self.p)]) + "\n"


class MemorylessView(Agent):
    """Wrapper that hides the state from an agent (everything looks like state 0)."""

    def __init__(self, inner: Agent):
        self.inner = inner
        self.kind = inner.kind

    def act(self, s: int) -> int:
        return self.inner.act(0)

    def observe(self, t: Transition) -> None:
        self.inner.observe(Transition(0, t.a, t.b, t.r_dm, t.r_opp, 0, t.terminal))

    def start_episode(self) -> None:
        self.inner.start_episode()

    def policy(self, s: int) -> np.ndarray:
        return self.inner.policy(0)

    def scale_epsilon(self, factor, inner_factor=None):
        self.inner.scale_epsilon(factor, inner_factor)

    @property
    def epsilon(self) -> float:
        return self.inner.epsilon

    def snapshot(self) -> str:
        return self.inner.snapshot()


def levelk_build(k: int, n_states: int, n_dm_actions: int, n_opp_actions: int,
                 params: LearningParams, rng: np.random.Generator,
                 inner_alpha: float | None = None, inner_epsilon: float | None = None,
                 inner_forget_lambda: float = 1.0, prior=None,
                 opponent_reward: str = "observed") -> Agent:
    """Assemble a k-deep reasoning stack; k=1 is a plain ``fpq`` agent.

    Lower levels swap the two action spaces and reuse ``inner_alpha`` /
    ``inner_epsilon`` (defaulting to the top-level values) all the way down to
    the level-1 fictitious-play base.
    """
    if k < 1:
        raise ValueError(f"level must be >= 1, got {k}")
    if k == 1:
        return FpqAgent(n_states, n_dm_actions, n_opp_actions, params, rng,
                        prior=prior, forget_lambda=inner_forget_lambda)
    inner_params = LearningParams(
        params.alpha if inner_alpha is None else inner_alpha,
        params.gamma,
        params.epsilon if inner_epsilon is None else inner_epsilon,
    )
    inner = levelk_build(
        k - 1, n_states, n_opp_actions, n_dm_actions, inner_params,
        rng=np.random.default_rng(0),  # inner models never draw; stream unused
        inner_alpha=inner_alpha, inner_epsilon=inner_epsilon,
        inner_forget_lambda=inner_forget_lambda, opponent_reward="observed",
    )
    return LevelKAgent(k, n_states, n_dm_actions, n_opp_actions, params, rng,
                       inner, opponent_reward)


def build_agent(spec: dict, n_states: int, n_own_actions: int, n_opp_actions: int,
                rng: np.random.Generator) -> Agent:
    """Construct an agent from its configuration mapping.

    ``spec`` must carry ``kind`` plus the kind-specific hyperparameters;
    unknown keys are rejected so config typos fail loudly.
    """
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in AGENT_KINDS:
        raise ValueError(f"unknown agent kind {kind!r}, expected one of {AGENT_KINDS}")
    memoryless = bool(spec.pop("memoryless", False))

    def params():
        return LearningParams(
            alpha=spec.pop("alpha", 0.1),
            gamma=spec.pop("gamma", 0.9),
            epsilon=spec.pop("epsilon", 0.1),
        )

    states = 1 if memoryless else n_states
    if kind == "independent-q":
        agent: Agent = IndependentQAgent(states, n_own_actions, params(), rng)
    elif kind == "fpq":
        agent = FpqAgent(
            states, n_own_actions, n_opp_actions, params(), rng,
            prior=spec.pop("prior", None),
            forget_lambda=spec.pop("forget_lambda", 1.0),
            belief=spec.pop("belief", "dirichlet"),
            bloom_capacity=spec.pop("bloom_capacity", 100_000),
            bloom_hashes=spec.pop("bloom_hashes", 4),
            bloom_fp_rate=spec.pop("bloom_fp_rate", 0.01),
            mixture_weights=spec.pop("mixture_weights", None),
        )
    elif kind == "level2":
        agent = Level2Agent(
            states, n_own_actions, n_opp_actions, params(), rng,
            alpha_opp=spec.pop("inner_alpha", None),
            epsilon_opp=spec.pop("inner_epsilon", None),
            inner_forget_lambda=spec.pop("inner_forget_lambda", 1.0),
            opponent_reward=spec.pop("opponent_reward", "observed"),
            opponent_model=spec.pop("opponent_model", "state"),
        )
    elif kind == "levelk":
        agent = levelk_build(
            int(spec.pop("k")), states, n_own_actions, n_opp_actions, params(), rng,
            inner_alpha=spec.pop("inner_alpha", None),
            inner_epsilon=spec.pop("inner_epsilon", None),
            inner_forget_lambda=spec.pop("inner_forget_lambda", 1.0),
            prior=spec.pop("prior", None),
            opponent_reward=spec.pop("opponent_reward", "observed"),
        )
    elif kind == "wolf-phc":
        agent = WolfPhcAgent(
            states, n_own_actions, params(), rng,
            delta_win=spec.pop("delta_win", 0.05),
            delta_lose=spec.pop("delta_lose", 0.2),
        )
    elif kind == "tft":
        for key in ("alpha", "gamma", "epsilon"):  # inherited defaults, unused
            spec.pop(key, None)
        agent = TftAgent(n_own_actions, n_opp_actions)
    else:
        for key in ("alpha", "gamma", "epsilon"):
            spec.pop(key, None)
        agent = SmootherAdversary(n_own_actions, spec.pop("smoother_alpha", 0.8))
    if spec:
        raise ValueError(f"unknown {kind} agent option(s): {sorted(spec)}")
    if memoryless:
        agent = MemorylessView(agent)
    return agent
