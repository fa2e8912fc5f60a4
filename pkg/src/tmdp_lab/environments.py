"""Experiment environments: iterated matrix games and friend-or-foe worlds.

Every environment is a small state machine with the same surface:

* ``reset()`` returns the pair of initial state indices ``(s_dm, s_opp)``,
  one per side, each expressed in that side's own perspective;
* ``step(a, b)`` consumes the DM action ``a`` and opponent action ``b`` and
  returns a :class:`StepResult`.

Per-side state views keep every agent seat-agnostic: in the memory-1 games
each player sees the previous joint action as (own move, other's move), so
the same agent code can sit on either side of the table.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

COOPERATE = 0
DEFECT = 1

MOVE_UP, MOVE_DOWN, MOVE_LEFT, MOVE_RIGHT = 0, 1, 2, 3
_MOVE_DELTAS = {
    MOVE_UP: (-1, 0),
    MOVE_DOWN: (1, 0),
    MOVE_LEFT: (0, -1),
    MOVE_RIGHT: (0, 1),
}

# How a friend-or-foe environment reports the adversary's reward.  The DM's
# reward is always +/-magnitude; "zero_sum" mirrors it, the other two are the
# alternative scalings (win/lose from the adversary's point of view).
FOE_SCALINGS = {
    "zero_sum": lambda r_dm, magnitude: -r_dm,
    "binary01": lambda r_dm, magnitude: 0.0 if r_dm > 0 else 1.0,
    "pm1": lambda r_dm, magnitude: -1.0 if r_dm > 0 else 1.0,
}


@dataclass
class StepResult:
    s_dm: int
    s_opp: int
    r_dm: float
    r_opp: float
    terminal: bool
    # Episode cut off by the step cap: the episode is over but the state is
    # not a dead end, so learners should still bootstrap through it.
    cutoff: bool = False
    # Target index the DM just committed to, when the step reveals one
    # (every round in the stateless game, on target arrival in the gridworld).
    dm_target: int | None = None


class PayoffBimatrix:
    """Complete payoff table (r_row, r_col) per joint action of a 2-player game."""

    def __init__(self, rewards_row, rewards_col, labels=("C", "D")):
        self.rewards_row = np.asarray(rewards_row, dtype=float)
        self.rewards_col = np.asarray(rewards_col, dtype=float)
        if self.rewards_row.ndim != 2:
            raise ValueError("payoff matrices must be 2-dimensional")
        if self.rewards_row.shape != self.rewards_col.shape:
            raise ValueError("row and column payoff matrices must have equal shape")
        if not (np.all(np.isfinite(self.rewards_row)) and np.all(np.isfinite(self.rewards_col))):
            raise ValueError("payoffs must be finite")
        self.labels = tuple(labels)

    @property
    def n_row_actions(self) -> int:
        return self.rewards_row.shape[0]

    @property
    def n_col_actions(self) -> int:
        return self.rewards_row.shape[1]


def matrix_step(game: PayoffBimatrix, a: int, b: int) -> tuple[float, float]:
    """Payoff lookup: rewards (row, column) for joint action (a, b)."""
    if not 0 <= a < game.n_row_actions:
        raise IndexError(f"row action {a} out of range [0, {game.n_row_actions})")
    if not 0 <= b < game.n_col_actions:
        raise IndexError(f"column action {b} out of range [0, {game.n_col_actions})")
    return float(game.rewards_row[a, b]), float(game.rewards_col[a, b])


# Payoff tables for the three social dilemmas, row player first.
PRISONERS_DILEMMA = PayoffBimatrix([[-1, -3], [0, -2]], [[-1, 0], [-3, -2]])
STAG_HUNT = PayoffBimatrix([[2, 0], [1, 1]], [[2, 1], [0, 1]])
CHICKEN = PayoffBimatrix([[0, -2], [1, -4]], [[0, 1], [-2, -4]])

GAMES = {
    "ipd": PRISONERS_DILEMMA,
    "stag_hunt": STAG_HUNT,
    "chicken": CHICKEN,
}


class MatrixGameEnv:
    """Memoryless iterated bimatrix game: a single state, no terminal."""

    def __init__(self, game: PayoffBimatrix):
        self.game = game
        self.n_states = 1
        self.n_dm_actions = game.n_row_actions
        self.n_opp_actions = game.n_col_actions

    def reset(self) -> tuple[int, int]:
        return 0, 0

    def step(self, a: int, b: int) -> StepResult:
        r_a, r_b = matrix_step(self.game, a, b)
        return StepResult(0, 0, r_a, r_b, terminal=False)


def memory1_state(a: int, b: int, n_second: int) -> int:
    """Index of the state remembering joint action (a, b); 0 is reserved for start."""
    return 1 + a * n_second + b


def memory1_transition(prev: int, a: int, b: int, n_opp_actions: int = 2) -> int:
    """Next memory-1 state after joint action (a, b); independent of ``prev``."""
    return memory1_state(a, b, n_opp_actions)


class Memory1GameEnv:
    """Iterated bimatrix game whose state is the previous joint action.

    States: index 0 is the initial no-history state, then one state per joint
    action.  Each side sees the joint action in its own order (own move
    first), so policies and opponent models stay seat-agnostic.
    """

    def __init__(self, game: PayoffBimatrix):
        self.game = game
        self.n_dm_actions = game.n_row_actions
        self.n_opp_actions = game.n_col_actions
        self.n_states = 1 + self.n_dm_actions * self.n_opp_actions

    def reset(self) -> tuple[int, int]:
        return 0, 0

    def step(self, a: int, b: int) -> StepResult:
        r_a, r_b = matrix_step(self.game, a, b)
        s_dm = memory1_state(a, b, self.n_opp_actions)
        s_opp = memory1_state(b, a, self.n_dm_actions)
        return StepResult(s_dm, s_opp, r_a, r_b, terminal=False)


class FoeStatelessEnv:
    """Single-state friend-or-foe: pick the target hiding the positive reward.

    The DM earns +magnitude when her choice matches the adversary's placement
    and -magnitude otherwise; the reported adversary reward follows the
    configured scaling.  Rounds are logged as one-step episodes but the game
    is a continuing repeated interaction, so steps are never terminal and the
    discount keeps its meaning across rounds.
    """

    def __init__(self, magnitude: float = 50.0, scaling: str = "zero_sum", n_targets: int = 2):
        if scaling not in FOE_SCALINGS:
            raise ValueError(f"unknown scaling {scaling!r}, expected one of {sorted(FOE_SCALINGS)}")
        if n_targets < 2:
            raise ValueError("need at least two targets")
        self.magnitude = float(magnitude)
        self.scaling = scaling
        self.n_states = 1
        self.n_dm_actions = n_targets
        self.n_opp_actions = n_targets

    def reset(self) -> tuple[int, int]:
        return 0, 0

    def step(self, dm_choice: int, adversary_target: int) -> StepResult:
        if not 0 <= dm_choice < self.n_dm_actions:
            raise IndexError(f"DM choice {dm_choice} out of range")
        if not 0 <= adversary_target < self.n_opp_actions:
            raise IndexError(f"adversary target {adversary_target} out of range")
        r_dm = self.magnitude if dm_choice == adversary_target else -self.magnitude
        r_opp = FOE_SCALINGS[self.scaling](r_dm, self.magnitude)
        return StepResult(0, 0, r_dm, r_opp, terminal=False, dm_target=dm_choice)


# Walled room with a corridor from the start branching to two targets at equal
# distance, mirroring the two-box layout of the spatial friend-or-foe task.
DEFAULT_FOE_MAP = """\
#######
#1###2#
#.###.#
#.....#
###.###
###S###
#######
"""


class GridWorld:
    """Two-target gridworld with an adversary deciding which target pays.

    The map uses ``#`` wall, ``.`` floor, ``S`` start and ``1``/``2`` target
    cells.  Moves into walls leave the position unchanged but still cost the
    step penalty; entering a target ends the episode with +/-magnitude on top
    of the step penalty, depending on whether the adversary placed the reward
    there.  Episodes are also cut off after ``max_steps`` moves.
    """

    def __init__(self, layout: str = DEFAULT_FOE_MAP, step_penalty: float = -1.0,
                 magnitude: float = 50.0, max_steps: int = 50, scaling: str = "zero_sum"):
        if scaling not in FOE_SCALINGS:
            raise ValueError(f"unknown scaling {scaling!r}, expected one of {sorted(FOE_SCALINGS)}")
        if max_steps < 1:
            raise ValueError("max_steps must be positive")
        self.step_penalty = float(step_penalty)
        self.magnitude = float(magnitude)
        self.max_steps = int(max_steps)
        self.scaling = scaling
        self._parse(layout)
        self.n_dm_actions = 4
        self.n_opp_actions = 2
        self._position: int | None = None
        self._steps_taken = 0
        self._terminal = True

    @classmethod
    def from_file(cls, path, **kwargs) -> "GridWorld":
        return cls(Path(path).read_text(), **kwargs)

    def _parse(self, layout: str) -> None:
        rows = [list(line) for line in layout.splitlines() if line]
        if not rows:
            raise ValueError("empty map")
        width = max(len(row) for row in rows)
        for row in rows:
            row.extend("#" * (width - len(row)))
        cells = {}          # (row, col) -> state index, walkable cells only
        start = None
        targets = {}
        for i, row in enumerate(rows):
            for j, ch in enumerate(row):
                if ch == "#":
                    continue
                if ch not in ".S12":
                    raise ValueError(f"unknown map character {ch!r} at {(i, j)}")
                cells[(i, j)] = len(cells)
                if ch == "S":
                    if start is not None:
                        raise ValueError("map must have exactly one start cell")
                    start = (i, j)
                elif ch in "12":
                    idx = int(ch) - 1
                    if idx in targets:
                        raise ValueError(f"map must have exactly one target {ch}")
                    targets[idx] = (i, j)
        if start is None:
            raise ValueError("map is missing the start cell")
        if sorted(targets) != [0, 1]:
            raise ValueError("map must contain both target cells 1 and 2")
        self._rows = rows
        self._cells = cells
        self._coords = {v: k for k, v in cells.items()}
        self._start = cells[start]
        self.target_states = (cells[targets[0]], cells[targets[1]])
        self.n_states = len(cells)
        for idx in (0, 1):
            if not self._reachable(start, targets[idx]):
                raise ValueError(f"target {idx + 1} is not reachable from the start")

    def _reachable(self, src, dst) -> bool:
        seen = {src}
        frontier = [src]
        while frontier:
            cell = frontier.pop()
            if cell == dst:
                return True
            for di, dj in _MOVE_DELTAS.values():
                nxt = (cell[0] + di, cell[1] + dj)
                if nxt in self._cells and nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return False

    def reset(self) -> tuple[int, int]:
        self._position = self._start
        self._steps_taken = 0
        self._terminal = False
        return self._start, 0

    def step(self, move: int, adversary_target: int) -> StepResult:
        if self._terminal:
            raise ValueError("step() called on a finished episode; call reset() first")
        if move not in _MOVE_DELTAS:
            raise IndexError(f"move {move} out of range [0, 4)")
        if adversary_target not in (0, 1):
            raise IndexError(f"adversary target {adversary_target} out of range [0, 2)")
        i, j = self._coords[self._position]
        di, dj = _MOVE_DELTAS[move]
        nxt = (i + di, j + dj)
        if nxt in self._cells:
            self._position = self._cells[nxt]
        self._steps_taken += 1

        r_dm = self.step_penalty
        # The adversary's stake is the attack outcome alone; the DM's travel
        # cost is hers, so plain steps are worth nothing to him.
        r_opp = 0.0
        dm_target = None
        cutoff = False
        if self._position in self.target_states:
            dm_target = self.target_states.index(self._position)
            bonus = self.magnitude if dm_target == adversary_target else -self.magnitude
            r_dm += bonus
            r_opp = FOE_SCALINGS[self.scaling](bonus, self.magnitude)
            self._terminal = True
        elif self._steps_taken >= self.max_steps:
            cutoff = True
            self._terminal = True
        return StepResult(self._position, 0, r_dm, r_opp,
                          self._terminal and not cutoff, cutoff, dm_target)
