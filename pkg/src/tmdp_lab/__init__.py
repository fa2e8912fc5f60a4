"""Opponent-aware tabular Q-learning: threatened decision processes, level-k
opponent models, iterated matrix games and adversarial gridworlds."""

from .agents import (
    Agent,
    FpqAgent,
    IndependentQAgent,
    Level2Agent,
    LevelKAgent,
    SmootherAdversary,
    TftAgent,
    Transition,
    WolfPhcAgent,
    build_agent,
    epsilon_greedy,
    greedy_distribution,
    levelk_build,
)
from .beliefs import (
    BloomConditionalModel,
    CountingBloomFilter,
    DirichletBelief,
    MarkovMixtureModel,
    load_snapshot,
)
from .core import (
    ConvergenceError,
    LearningParams,
    TmdpSpec,
    apply_operator_h,
    apply_operator_hbar,
    expected_q,
    fixed_point_iterate,
    new_joint_q_table,
    new_q_table,
    q_update_independent,
    q_update_joint,
    q_update_joint_row,
)
from .environments import (
    CHICKEN,
    DEFAULT_FOE_MAP,
    PRISONERS_DILEMMA,
    STAG_HUNT,
    FoeStatelessEnv,
    GridWorld,
    MatrixGameEnv,
    Memory1GameEnv,
    PayoffBimatrix,
    matrix_step,
    memory1_transition,
)
from .harness import (
    ConfigError,
    EpisodeLog,
    ExperimentConfig,
    RunSummary,
    aggregate_runs,
    moving_average,
    run_experiment,
    run_single_seed,
    write_csv,
)
from .presets import PRESETS, preset_config, preset_names

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
