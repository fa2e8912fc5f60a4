"""Opponent-action belief models.

Three families, all predicting a distribution over the opponent's next action:

* ``DirichletBelief`` -- conjugate pseudocounts, optionally with geometric
  forgetting so the prediction tracks a drifting opponent.
* ``BloomConditionalModel`` -- Bayes rule p(b|s) proportional to p(s|b) p(b)
  with the per-action state counts held in counting bloom filters, so the
  memory footprint is independent of the number of states.
* ``MarkovMixtureModel`` -- fixed-weight mixture of predictions conditioned on
  the previous DM action, the previous opponent action and the current state.

Beliefs are single-owner mutable objects; ``clone()`` gives an independent
copy and ``snapshot()`` a plain-text dump for checkpointing.
"""
from __future__ import annotations

import hashlib
import math

import numpy as np

from .core import DIST_ATOL

# Context index meaning "no previous action yet" for the mixture families.
START_CONTEXT = -1


class DirichletBelief:
    """Pseudocount vector over opponent actions with optional forgetting.

    ``forget_lambda`` = 1 keeps every observation forever; smaller values
    geometrically down-weight old observations, so the counts effectively
    cover the last 1/(1-lambda) plays.  Pseudocounts are reals because the
    reweighting produces fractional values.
    """

    def __init__(self, pseudocounts, forget_lambda: float = 1.0):
        counts = np.array(pseudocounts, dtype=float)
        if counts.ndim != 1 or counts.size == 0:
            raise ValueError("pseudocounts must be a nonempty vector")
        if np.any(counts < 0):
            raise ValueError(f"pseudocounts must be nonnegative, got {counts}")
        if counts.sum() <= 0:
            raise ValueError("at least one pseudocount must be positive")
        if not 0.0 < forget_lambda <= 1.0:
            raise ValueError(f"forget_lambda must be in (0, 1], got {forget_lambda}")
        self.pseudocounts = counts
        self.forget_lambda = float(forget_lambda)

    @property
    def n_actions(self) -> int:
        return self.pseudocounts.size

    def _check_action(self, action: int) -> None:
        if not 0 <= action < self.n_actions:
            raise IndexError(f"action index {action} out of range [0, {self.n_actions})")

    def observe(self, action: int) -> None:
        """Count one observed play: pseudocount of ``action`` grows by 1."""
        self._check_action(action)
        self.pseudocounts[action] += 1.0

    def forget_observe(self, action: int) -> None:
        """Reweight all pseudocounts by the forget factor, then count the play."""
        self._check_action(action)
        self.pseudocounts *= self.forget_lambda
        self.pseudocounts[action] += 1.0

    def predictive(self) -> np.ndarray:
        """Posterior-mean distribution: pseudocounts normalized to sum 1."""
        total = self.pseudocounts.sum()
        if total <= 0:
            raise ValueError("predictive undefined: all pseudocounts are zero")
        return self.pseudocounts / total

    def clone(self) -> "DirichletBelief":
        return DirichletBelief(self.pseudocounts, self.forget_lambda)

    def snapshot(self) -> str:
        lines = [
            "kind dirichlet",
            f"forget_lambda {self.forget_lambda!r}",
            "pseudocounts " + " ".join(repr(float(c)) for c in self.pseudocounts),
        ]
        return "\n".join(lines) + "\n"


class CountingBloomFilter:
    """Approximate counter over integer keys that never undercounts.

    Each insert bumps ``n_hashes`` counter cells chosen by double hashing of a
    keyed blake2b digest; a query returns the minimum of those cells, which is
    at least the true count and larger only on hash collisions.  The counter
    array is sized from ``capacity`` and ``fp_rate`` with the usual bloom
    geometry m = -n ln(p) / ln(2)^2.
    """

    def __init__(self, capacity: int = 100_000, n_hashes: int = 4, fp_rate: float = 0.01):
        if capacity < 1:
            raise ValueError(f"capacity must be positive, got {capacity}")
        if n_hashes < 1:
            raise ValueError(f"n_hashes must be positive, got {n_hashes}")
        if not 0.0 < fp_rate < 1.0:
            raise ValueError(f"fp_rate must be in (0, 1), got {fp_rate}")
        self.capacity = int(capacity)
        self.n_hashes = int(n_hashes)
        self.fp_rate = float(fp_rate)
        self.n_cells = max(
            self.n_hashes, math.ceil(-capacity * math.log(fp_rate) / math.log(2) ** 2)
        )
        self.counters = np.zeros(self.n_cells, dtype=np.uint32)

    def _cells(self, key: int) -> np.ndarray:
        digest = hashlib.blake2b(
            int(key).to_bytes(8, "little", signed=True), digest_size=16
        ).digest()
        h1 = int.from_bytes(digest[:8], "little")
        h2 = int.from_bytes(digest[8:], "little") | 1
        return (h1 + h2 * np.arange(self.n_hashes, dtype=np.uint64)) % self.n_cells

    def add(self, key: int) -> None:
        self.counters[self._cells(key)] += 1

    def count(self, key: int) -> int:
        return int(self.counters[self._cells(key)].min())

    def clone(self) -> "CountingBloomFilter":
        out = CountingBloomFilter(self.capacity, self.n_hashes, self.fp_rate)
        out.counters = self.counters.copy()
        return out


class BloomConditionalModel:
    """State-conditional opponent belief p(b|s) with bloom-filter likelihoods.

    Keeps one counting bloom filter per opponent action for the state counts
    p(s|b), plus a Dirichlet marginal over actions for p(b).  The conditional
    prediction applies Bayes rule with a pseudocount of
    ``likelihood_pseudocount`` added to each approximate state count, so a
    never-seen state falls back to the marginal instead of zeroing out.
    """

    def __init__(
        self,
        n_opp_actions: int,
        marginal_prior=None,
        capacity: int = 100_000,
        n_hashes: int = 4,
        fp_rate: float = 0.01,
        likelihood_pseudocount: float = 1.0,
        forget_lambda: float = 1.0,
    ):
        if n_opp_actions < 1:
            raise ValueError("n_opp_actions must be positive")
        if likelihood_pseudocount <= 0:
            raise ValueError("likelihood_pseudocount must be positive")
        if marginal_prior is None:
            marginal_prior = np.ones(n_opp_actions)
        self.filters = [
            CountingBloomFilter(capacity, n_hashes, fp_rate) for _ in range(n_opp_actions)
        ]
        self.marginal = DirichletBelief(marginal_prior, forget_lambda)
        if self.marginal.n_actions != n_opp_actions:
            raise ValueError("marginal prior length does not match n_opp_actions")
        self.likelihood_pseudocount = float(likelihood_pseudocount)

    @property
    def n_actions(self) -> int:
        return len(self.filters)

    def update(self, s: int, b: int) -> None:
        """Record that the opponent played ``b`` while the process was at ``s``."""
        if not 0 <= b < self.n_actions:
            raise IndexError(f"opponent action {b} out of range [0, {self.n_actions})")
        self.filters[b].add(s)
        self.marginal.forget_observe(b)

    def state_counts(self, s: int) -> np.ndarray:
        return np.array([f.count(s) for f in self.filters], dtype=float)

    def conditional_predictive(self, s: int) -> np.ndarray:
        """p(b|s) proportional to (count(s|b) + pseudocount) * p(b)."""
        weights = (self.state_counts(s) + self.likelihood_pseudocount) * self.marginal.predictive()
        return weights / weights.sum()

    def clone(self) -> "BloomConditionalModel":
        out = BloomConditionalModel.__new__(BloomConditionalModel)
        out.filters = [f.clone() for f in self.filters]
        out.marginal = self.marginal.clone()
        out.likelihood_pseudocount = self.likelihood_pseudocount
        return out

    def snapshot(self) -> str:
        ref = self.filters[0]
        lines = [
            "kind bloom",
            f"n_actions {self.n_actions}",
            f"capacity {ref.capacity}",
            f"n_hashes {ref.n_hashes}",
            f"fp_rate {ref.fp_rate!r}",
            f"likelihood_pseudocount {self.likelihood_pseudocount!r}",
            f"marginal_lambda {self.marginal.forget_lambda!r}",
            "marginal " + " ".join(repr(float(c)) for c in self.marginal.pseudocounts),
        ]
        for j, f in enumerate(self.filters):
            lines.append(f"filter_{j} " + f.counters.astype("<u4").tobytes().hex())
        return "\n".join(lines) + "\n"


class MarkovMixtureModel:
    """Fixed-weight mixture p(b | a_prev, b_prev, s) of three Dirichlet families.

    The families are pseudocount matrices keyed by the previous DM action, the
    previous opponent action and the current state; each carries one extra row
    (context ``START_CONTEXT``) used before any joint action exists.  The
    mixture weights are configuration, not learned.
    """

    def __init__(self, weights, n_dm_actions: int, n_opp_actions: int, n_states: int,
                 prior: float = 1.0):
        w = np.asarray(weights, dtype=float)
        if w.shape != (3,):
            raise ValueError(f"weights must have length 3, got shape {w.shape}")
        if np.any(w < 0) or abs(w.sum() - 1.0) > DIST_ATOL:
            raise ValueError(f"weights must be a distribution, got {w}")
        if prior <= 0:
            raise ValueError("prior pseudocount must be positive")
        self.weights = w
        self.by_prev_dm = np.full((n_dm_actions + 1, n_opp_actions), float(prior))
        self.by_prev_opp = np.full((n_opp_actions + 1, n_opp_actions), float(prior))
        self.by_state = np.full((n_states, n_opp_actions), float(prior))

    def _check_contexts(self, prev_a: int, prev_b: int, s: int) -> None:
        if not START_CONTEXT <= prev_a < self.by_prev_dm.shape[0] - 1:
            raise IndexError(f"previous DM action {prev_a} out of range")
        if not START_CONTEXT <= prev_b < self.by_prev_opp.shape[0] - 1:
            raise IndexError(f"previous opponent action {prev_b} out of range")
        if not 0 <= s < self.by_state.shape[0]:
            raise IndexError(f"state {s} out of range")

    def observe(self, prev_a: int, prev_b: int, s: int, b: int) -> None:
        """Count an opponent play under all three conditioning contexts."""
        self._check_contexts(prev_a, prev_b, s)
        self.by_prev_dm[prev_a, b] += 1.0
        self.by_prev_opp[prev_b, b] += 1.0
        self.by_state[s, b] += 1.0

    def predictive(self, prev_a: int, prev_b: int, s: int) -> np.ndarray:
        """Convex combination of the three per-context predictions."""
        self._check_contexts(prev_a, prev_b, s)
        parts = (
            self.weights[0] * self.by_prev_dm[prev_a] / self.by_prev_dm[prev_a].sum()
            + self.weights[1] * self.by_prev_opp[prev_b] / self.by_prev_opp[prev_b].sum()
            + self.weights[2] * self.by_state[s] / self.by_state[s].sum()
        )
        return parts

    def clone(self) -> "MarkovMixtureModel":
        out = MarkovMixtureModel.__new__(MarkovMixtureModel)
        out.weights = self.weights.copy()
        out.by_prev_dm = self.by_prev_dm.copy()
        out.by_prev_opp = self.by_prev_opp.copy()
        out.by_state = self.by_state.copy()
        return out

    def snapshot(self) -> str:
        lines = [
            "kind mixture",
            "weights " + " ".join(repr(float(w)) for w in self.weights),
        ]
        for name, table in (
            ("by_prev_dm", self.by_prev_dm),
            ("by_prev_opp", self.by_prev_opp),
            ("by_state", self.by_state),
        ):
            lines.append(f"{name}_shape {table.shape[0]} {table.shape[1]}")
            lines.append(f"{name} " + " ".join(repr(float(c)) for c in table.ravel()))
        return "\n".join(lines) + "\n"


def _snapshot_fields(text: str) -> dict:
    fields = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        key, _, value = line.partition(" ")
        fields[key] = value
    return fields


def _floats(text: str) -> np.ndarray:
    return np.array(text.split(), dtype=float)


def load_snapshot(text: str):
    """Rebuild a belief object from its ``snapshot()`` text."""
    fields = _snapshot_fields(text)
    kind = fields.get("kind")
    if kind == "dirichlet":
        return DirichletBelief(_floats(fields["pseudocounts"]), float(fields["forget_lambda"]))
    if kind == "bloom":
        model = BloomConditionalModel(
            n_opp_actions=int(fields["n_actions"]),
            capacity=int(fields["capacity"]),
            n_hashes=int(fields["n_hashes"]),
            fp_rate=float(fields["fp_rate"]),
            likelihood_pseudocount=float(fields["likelihood_pseudocount"]),
            forget_lambda=float(fields["marginal_lambda"]),
        )
        model.marginal.pseudocounts = _floats(fields["marginal"])
        for j, f in enumerate(model.filters):
            raw = bytes.fromhex(fields[f"filter_{j}"])
            f.counters = np.frombuffer(raw, dtype="<u4").astype(np.uint32)
        return model
    if kind == "mixture":
        model = MarkovMixtureModel.__new__(MarkovMixtureModel)
        model.weights = _floats(fields["weights"])
        for name in ("by_prev_dm", "by_prev_opp", "by_state"):
            shape = tuple(int(x) for x in fields[f"{name}_shape"].split())
            setattr(model, name, _floats(fields[name]).reshape(shape))
        return model
    raise ValueError(f"unknown snapshot kind {kind!r}")
