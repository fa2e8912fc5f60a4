"""Tabular Q-learning primitives for decision making against an adversary.

Q-tables are plain numpy arrays: a ``QTable`` has shape (n_states, n_actions)
and a ``JointQTable`` has shape (n_states, n_dm_actions, n_opp_actions), i.e.
it scores the joint action (a, b) of the decision maker (DM) and her opponent
in every state.  Beliefs about the opponent are row-stochastic arrays of shape
(n_states, n_opp_actions).

Update functions are pure: they return a new table and leave the input
untouched.  All argmax/argmin tie-breaking is by lowest index so that seeded
runs are reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Absolute slack allowed when checking that a probability row sums to one.
DIST_ATOL = 1e-9

QTable = np.ndarray
JointQTable = np.ndarray
BeliefTable = np.ndarray


class ConvergenceError(RuntimeError):
    """Fixed-point iteration ran out of iterations before reaching tolerance."""

    def __init__(self, iterations: int, residual: float):
        super().__init__(
            f"no fixed point after {iterations} iterations (last residual {residual:.3e})"
        )
        self.iterations = iterations
        self.residual = residual


@dataclass(frozen=True)
class LearningParams:
    """Q-learning hyperparameters: step size, discount and exploration rate."""

    alpha: float
    gamma: float
    epsilon: float = 0.0

    def __post_init__(self):
        # alpha = 0 is the degenerate "never learn" case; useful in tests.
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")


def new_q_table(n_states: int, n_actions: int) -> QTable:
    """All-zero (n_states, n_actions) table, the initial value estimate."""
    return np.zeros((n_states, n_actions))


def new_joint_q_table(n_states: int, n_dm_actions: int, n_opp_actions: int) -> JointQTable:
    """All-zero (n_states, n_dm_actions, n_opp_actions) joint-action table."""
    return np.zeros((n_states, n_dm_actions, n_opp_actions))


def check_distribution(p: np.ndarray, what: str = "distribution") -> None:
    """Raise ValueError unless ``p`` is a valid probability vector."""
    p = np.asarray(p)
    if np.any(p < 0):
        raise ValueError(f"{what} has negative entries: {p}")
    total = float(p.sum())
    if abs(total - 1.0) > DIST_ATOL:
        raise ValueError(f"{what} sums to {total!r}, expected 1 within {DIST_ATOL}")


def check_belief_table(belief: BeliefTable, n_states: int, n_opp_actions: int) -> None:
    """Validate a per-state belief table over opponent actions."""
    belief = np.asarray(belief)
    if belief.shape != (n_states, n_opp_actions):
        raise ValueError(
            f"belief table shape {belief.shape} does not match "
            f"({n_states}, {n_opp_actions})"
        )
    for s in range(n_states):
        check_distribution(belief[s], f"belief row for state {s}")


def _check_index(name: str, value: int, size: int) -> None:
    if not 0 <= value < size:
        raise IndexError(f"{name} index {value} out of range [0, {size})")


@dataclass(frozen=True)
class TmdpSpec:
    """Explicit finite decision process with an adversary action set.

    ``transition[s, a, b]`` is the distribution over next states after the DM
    plays ``a`` and the opponent plays ``b`` in state ``s``; ``reward[s, a, b]``
    is the DM's (deterministic) reward for that joint step.  Small explicit
    instances like this back the operator and contraction tests; the learning
    agents themselves never need one.
    """

    transition: np.ndarray  # (S, A, B, S)
    reward: np.ndarray      # (S, A, B)

    def __post_init__(self):
        t = np.asarray(self.transition, dtype=float)
        r = np.asarray(self.reward, dtype=float)
        if t.ndim != 4 or t.shape[0] != t.shape[3]:
            raise ValueError(f"transition must have shape (S, A, B, S), got {t.shape}")
        if r.shape != t.shape[:3]:
            raise ValueError(
                f"reward shape {r.shape} does not match transition {t.shape[:3]}"
            )
        if np.any(t < 0):
            raise ValueError("transition probabilities must be nonnegative")
        row_sums = t.sum(axis=3)
        if np.any(np.abs(row_sums - 1.0) > DIST_ATOL):
            bad = np.unravel_index(np.argmax(np.abs(row_sums - 1.0)), row_sums.shape)
            raise ValueError(f"transition row {bad} sums to {row_sums[bad]!r}, expected 1")
        if not np.all(np.isfinite(r)):
            raise ValueError("rewards must be finite")
        object.__setattr__(self, "transition", t)
        object.__setattr__(self, "reward", r)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_dm_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def n_opp_actions(self) -> int:
        return self.transition.shape[2]


def q_update_independent(
    q: QTable, s: int, a: int, r: float, s_next: int,
    params: LearningParams, terminal: bool = False,
) -> QTable:
    """One opponent-agnostic update: Q(s,a) <- (1-a)Q(s,a) + a(r + g max Q(s',.)).

    Returns a new table; only the (s, a) entry differs from the input.  With
    ``terminal`` the bootstrap term is dropped and the target is the bare
    reward.
    """
    n_states, n_actions = q.shape
    _check_index("state", s, n_states)
    _check_index("action", a, n_actions)
    _check_index("next state", s_next, n_states)
    target = r if terminal else r + params.gamma * float(q[s_next].max())
    out = q.copy()
    out[s, a] = (1.0 - params.alpha) * q[s, a] + params.alpha * target
    return out


def expected_q(q: JointQTable, belief: BeliefTable, s: int, a: int) -> float:
    """Belief-weighted value sum_b Q(s,a,b) p(b|s) of DM action ``a`` at ``s``."""
    n_states, n_dm, _ = q.shape
    _check_index("state", s, n_states)
    _check_index("action", a, n_dm)
    row = np.asarray(belief)[s]
    check_distribution(row, f"belief row for state {s}")
    return float(q[s, a] @ row)


def q_update_joint_row(
    q: JointQTable, s: int, a: int, b: int, r: float, s_next: int,
    belief_row: np.ndarray, params: LearningParams, terminal: bool = False,
) -> JointQTable:
    """Joint-action update with the opponent belief at ``s_next`` given as a row.

    Q(s,a,b) <- (1-a)Q(s,a,b) + a(r + g max_a' sum_b' Q(s',a',b') p(b'|s')).
    Returns a new table; only the (s, a, b) entry changes.
    """
    n_states, n_dm, n_opp = q.shape
    _check_index("state", s, n_states)
    _check_index("DM action", a, n_dm)
    _check_index("opponent action", b, n_opp)
    _check_index("next state", s_next, n_states)
    if terminal:
        target = r
    else:
        check_distribution(belief_row, f"belief row for state {s_next}")
        target = r + params.gamma * float((q[s_next] @ belief_row).max())
    out = q.copy()
    out[s, a, b] = (1.0 - params.alpha) * q[s, a, b] + params.alpha * target
    return out


def q_update_joint(
    q: JointQTable, s: int, a: int, b: int, r: float, s_next: int,
    belief: BeliefTable, params: LearningParams, terminal: bool = False,
) -> JointQTable:
    """Joint-action update taking the full per-state belief table."""
    row = np.asarray(belief)[s_next]
    return q_update_joint_row(q, s, a, b, r, s_next, row, params, terminal)


def apply_operator_h(
    q: JointQTable, spec: TmdpSpec, belief: BeliefTable, gamma: float,
) -> JointQTable:
    """Exact one-step backup of a joint table under an explicit process.

    (Hq)(s,a,b) = r(s,a,b) + g sum_s' T(s'|s,a,b) max_a' sum_b' q(s',a',b') p(b'|s').
    A gamma-contraction in the sup norm, so iterating it converges to the
    unique fixed point.
    """
    if q.shape != spec.reward.shape:
        raise ValueError(f"table shape {q.shape} does not match spec {spec.reward.shape}")
    check_belief_table(belief, spec.n_states, spec.n_opp_actions)
    # m[s'] = max_a' E_{p(b'|s')} q(s', a', b')
    m = np.einsum("sab,sb->sa", q, belief).max(axis=1)
    return spec.reward + gamma * spec.transition @ m


def apply_operator_hbar(
    qbar: QTable, spec: TmdpSpec, belief: BeliefTable, gamma: float,
) -> QTable:
    """Exact backup of a DM-only table, averaging the opponent action out first.

    (Hbar qbar)(s,a) = E_{p(b|s)} [ r(s,a,b) + g sum_s' T(s'|s,a,b) max_a' qbar(s',a') ].
    Also a gamma-contraction in the sup norm.
    """
    if qbar.shape != (spec.n_states, spec.n_dm_actions):
        raise ValueError(
            f"table shape {qbar.shape} does not match spec "
            f"({spec.n_states}, {spec.n_dm_actions})"
        )
    check_belief_table(belief, spec.n_states, spec.n_opp_actions)
    inner = spec.reward + gamma * spec.transition @ qbar.max(axis=1)
    return np.einsum("sab,sb->sa", inner, belief)


def fixed_point_iterate(operator, q0: np.ndarray, tol: float = 1e-8, max_iters: int = 100_000):
    """Iterate ``q <- operator(q)`` until the sup-norm residual drops below tol.

    Returns ``(q_star, iterations)``.  Raises ConvergenceError when max_iters
    is exhausted; for a gamma-contraction with gamma < 1 that only happens if
    max_iters is too small for the requested tolerance.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    q = np.asarray(q0, dtype=float)
    residual = np.inf
    for iteration in range(1, max_iters + 1):
        q_next = operator(q)
        residual = float(np.max(np.abs(q_next - q)))
        q = q_next
        if residual < tol:
            return q, iteration
    raise ConvergenceError(max_iters, residual)
