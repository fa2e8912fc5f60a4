"""Self-check suite: operator contraction, fixed points and belief oracles.

Everything here is driven by one master seed so the report text is stable,
and it is shared between the ``verify`` CLI subcommand and the test suite.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beliefs import BloomConditionalModel, DirichletBelief
from .core import (
    ConvergenceError,
    TmdpSpec,
    apply_operator_h,
    apply_operator_hbar,
    fixed_point_iterate,
)

CONTRACTION_SLACK = 1e-9
FIXED_POINT_TOL = 1e-6
GAMMA_CHOICES = (0.5, 0.9, 0.99)


def random_tmdp_spec(rng: np.random.Generator, max_states: int = 5,
                     max_actions: int = 3) -> TmdpSpec:
    """Small random process: dense random transitions, rewards in [-1, 1]."""
    n_s = int(rng.integers(1, max_states + 1))
    n_a = int(rng.integers(1, max_actions + 1))
    n_b = int(rng.integers(1, max_actions + 1))
    transition = rng.random((n_s, n_a, n_b, n_s)) + 1e-3
    transition /= transition.sum(axis=3, keepdims=True)
    reward = rng.uniform(-1.0, 1.0, (n_s, n_a, n_b))
    return TmdpSpec(transition, reward)


def random_belief_table(rng: np.random.Generator, n_states: int, n_opp: int) -> np.ndarray:
    belief = rng.random((n_states, n_opp)) + 1e-3
    return belief / belief.sum(axis=1, keepdims=True)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.detail}"


def check_contraction(seed: int, n_specs: int = 100, pairs_per_spec: int = 10,
                      inject_gamma: float | None = None) -> list[CheckResult]:
    """Sup-norm contraction margins of both backup operators on random specs."""
    rng = np.random.default_rng(seed)
    worst_h = worst_hbar = -np.inf
    flagged = []
    gammas = list(GAMMA_CHOICES)
    if inject_gamma is not None:
        gammas.append(float(inject_gamma))
    for index in range(n_specs):
        spec = random_tmdp_spec(rng)
        belief = random_belief_table(rng, spec.n_states, spec.n_opp_actions)
        gamma = gammas[index % len(gammas)]
        if not 0.0 <= gamma < 1.0:
            flagged.append(f"spec {index}: gamma {gamma} leaves no contraction margin")
            continue
        shape_joint = spec.reward.shape
        shape_flat = (spec.n_states, spec.n_dm_actions)
        for _ in range(pairs_per_spec):
            q1 = rng.uniform(-10, 10, shape_joint)
            q2 = rng.uniform(-10, 10, shape_joint)
            lhs = np.max(np.abs(apply_operator_h(q1, spec, belief, gamma)
                                - apply_operator_h(q2, spec, belief, gamma)))
            margin = lhs - gamma * np.max(np.abs(q1 - q2))
            worst_h = max(worst_h, margin)
            f1 = rng.uniform(-10, 10, shape_flat)
            f2 = rng.uniform(-10, 10, shape_flat)
            lhs_bar = np.max(np.abs(apply_operator_hbar(f1, spec, belief, gamma)
                                    - apply_operator_hbar(f2, spec, belief, gamma)))
            worst_hbar = max(worst_hbar, lhs_bar - gamma * np.max(np.abs(f1 - f2)))
    results = []
    if flagged:
        results.append(CheckResult("contraction margin (joint operator)", False, flagged[0]))
        results.append(CheckResult("contraction margin (averaged operator)", False, flagged[0]))
    else:
        results.append(CheckResult(
            "contraction margin (joint operator)", worst_h <= CONTRACTION_SLACK,
            f"worst margin {worst_h:.3e} over {n_specs} specs (slack {CONTRACTION_SLACK:.0e})"))
        results.append(CheckResult(
            "contraction margin (averaged operator)", worst_hbar <= CONTRACTION_SLACK,
            f"worst margin {worst_hbar:.3e} over {n_specs} specs (slack {CONTRACTION_SLACK:.0e})"))
    return results


def check_fixed_points(seed: int, n_specs: int = 100) -> CheckResult:
    """Every random spec's joint operator iterates to a fixed point."""
    rng = np.random.default_rng(seed)
    worst_residual = 0.0
    for index in range(n_specs):
        spec = random_tmdp_spec(rng)
        belief = random_belief_table(rng, spec.n_states, spec.n_opp_actions)
        gamma = GAMMA_CHOICES[index % len(GAMMA_CHOICES)]
        try:
            q_star, _ = fixed_point_iterate(
                lambda q: apply_operator_h(q, spec, belief, gamma),
                np.zeros(spec.reward.shape), tol=FIXED_POINT_TOL,
            )
        except ConvergenceError as exc:
            return CheckResult("fixed point convergence", False,
                               f"spec {index}: {exc}")
        residual = float(np.max(np.abs(apply_operator_h(q_star, spec, belief, gamma) - q_star)))
        worst_residual = max(worst_residual, residual)
    return CheckResult(
        "fixed point convergence", worst_residual < FIXED_POINT_TOL,
        f"worst residual {worst_residual:.3e} over {n_specs} specs (tol {FIXED_POINT_TOL:.0e})")


def check_forget_closed_form(seed: int, n_cases: int = 50) -> CheckResult:
    """Forgetting pseudocount totals follow l^k t0 + (1 - l^k) / (1 - l)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        n = int(rng.integers(2, 5))
        lam = float(rng.uniform(0.5, 0.99))
        belief = DirichletBelief(rng.uniform(0.1, 2.0, n), forget_lambda=lam)
        t0 = belief.pseudocounts.sum()
        k = int(rng.integers(1, 200))
        for _ in range(k):
            belief.forget_observe(int(rng.integers(n)))
        expected = lam ** k * t0 + (1 - lam ** k) / (1 - lam)
        worst = max(worst, abs(belief.pseudocounts.sum() - expected))
    return CheckResult("forgetting pseudocount closed form", worst <= 1e-9,
                       f"worst total error {worst:.3e} over {n_cases} cases")


def check_bloom_oracle(seed: int, stream_length: int = 10_000,
                       n_states: int = 500, n_actions: int = 3) -> list[CheckResult]:
    """Bloom-backed conditional beliefs track an exact-count oracle."""
    rng = np.random.default_rng(seed)
    model = BloomConditionalModel(n_actions, capacity=100_000)
    exact = np.zeros((n_states, n_actions))
    marginal = DirichletBelief(np.ones(n_actions))
    # Opponent mixes state-dependent behavior so the conditionals are nontrivial.
    profiles = rng.random((8, n_actions)) + 0.1
    profiles /= profiles.sum(axis=1, keepdims=True)
    for _ in range(stream_length):
        s = int(rng.integers(n_states))
        b = int(np.searchsorted(np.cumsum(profiles[s % 8]), rng.random()))
        b = min(b, n_actions - 1)
        model.update(s, b)
        exact[s, b] += 1
        marginal.observe(b)
    undercounts = 0
    worst_tv = 0.0
    for s in range(n_states):
        approx = model.state_counts(s)
        if np.any(approx < exact[s]):
            undercounts += 1
        oracle = (exact[s] + 1.0) * marginal.predictive()
        oracle /= oracle.sum()
        worst_tv = max(worst_tv, 0.5 * float(np.abs(model.conditional_predictive(s) - oracle).sum()))
    return [
        CheckResult("bloom counts never undercount", undercounts == 0,
                    f"{undercounts} undercounting states out of {n_states}"),
        CheckResult("bloom conditional matches exact oracle", worst_tv <= 0.02,
                    f"worst total-variation distance {worst_tv:.4f} (budget 0.02)"),
    ]


def run_all_checks(seed: int, n_specs: int = 100,
                   inject_gamma: float | None = None) -> list[CheckResult]:
    results = check_contraction(seed, n_specs=n_specs, inject_gamma=inject_gamma)
    results.append(check_fixed_points(seed + 1, n_specs=n_specs))
    results.append(check_forget_closed_form(seed + 2))
    results.extend(check_bloom_oracle(seed + 3))
    return results
