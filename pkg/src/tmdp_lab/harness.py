"""Declarative experiment runner.

A run is described by a plain mapping (usually loaded from a TOML file or a
bundled preset): an ``environment`` section, one section per agent seat, the
horizon (``steps`` for the iterated games, ``episodes`` for the friend-or-foe
worlds), seed count and optional exploration-decay rules.  ``run_experiment``
executes one fully independent simulation per seed and returns the per-step
logs; ``aggregate_runs`` turns them into smoothed reward series and
``write_csv`` serializes those with stable formatting, so a fixed (config,
seed) pair always produces byte-identical output.

RNG derivation: seed k builds ``np.random.SeedSequence(k)`` and spawns one
child stream per seat (agent A first, then agent B).  Agents never share a
stream, so seat order in the loop cannot perturb traces.
"""
from __future__ import annotations

import copy
import csv
import json
from dataclasses import dataclass, field
from multiprocessing import Pool
from pathlib import Path

import numpy as np

from .agents import Agent, Transition, build_agent
from .environments import (
    DEFAULT_FOE_MAP,
    GAMES,
    FoeStatelessEnv,
    GridWorld,
    MatrixGameEnv,
    Memory1GameEnv,
    PayoffBimatrix,
)

EPISODIC_KINDS = ("foe_stateless", "foe_spatial")
STEPWISE_KINDS = ("matrix", "memory1")


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending field."""


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def build_environment(spec: dict):
    """Instantiate the environment described by a config section."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    _require(kind in EPISODIC_KINDS + STEPWISE_KINDS,
             f"environment.kind: expected one of {EPISODIC_KINDS + STEPWISE_KINDS}, got {kind!r}")
    if kind in ("matrix", "memory1"):
        game_name = spec.pop("game", None)
        if game_name is not None:
            _require(game_name in GAMES,
                     f"environment.game: unknown game {game_name!r}, expected one of {sorted(GAMES)}")
            game = GAMES[game_name]
        else:
            _require("payoff_dm" in spec and "payoff_opp" in spec,
                     "environment: need either game or payoff_dm/payoff_opp")
            game = PayoffBimatrix(spec.pop("payoff_dm"), spec.pop("payoff_opp"))
        env = MatrixGameEnv(game) if kind == "matrix" else Memory1GameEnv(game)
    elif kind == "foe_stateless":
        env = FoeStatelessEnv(
            magnitude=spec.pop("magnitude", 50.0),
            scaling=spec.pop("scaling", "zero_sum"),
            n_targets=spec.pop("n_targets", 2),
        )
    else:
        layout = spec.pop("map", None)
        map_file = spec.pop("map_file", None)
        if layout is None:
            layout = Path(map_file).read_text() if map_file else DEFAULT_FOE_MAP
        env = GridWorld(
            layout,
            step_penalty=spec.pop("step_penalty", -1.0),
            magnitude=spec.pop("magnitude", 50.0),
            max_steps=spec.pop("max_steps", 50),
            scaling=spec.pop("scaling", "zero_sum"),
        )
    _require(not spec, f"environment: unknown option(s) {sorted(spec)}")
    return kind, env


@dataclass
class ExperimentConfig:
    """Validated run description; see README for the full field reference."""

    environment: dict
    agent_a: dict
    agent_b: dict
    steps: int | None = None
    episodes: int | None = None
    seeds: list[int] = field(default_factory=lambda: [0])
    series: str = "step"
    ma_window: int = 100
    label: str = ""
    out: str | None = None
    workers: int = 1
    write_checkpoints: bool = False
    decay: dict | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = copy.deepcopy(raw)
        for section in ("environment", "agent_a", "agent_b"):
            _require(isinstance(raw.get(section), dict), f"{section}: missing section")
        env_kind = raw["environment"].get("kind")
        episodic = env_kind in EPISODIC_KINDS

        steps = raw.pop("steps", None)
        episodes = raw.pop("episodes", None)
        if episodic:
            _require(episodes is not None and steps is None,
                     "episodes: friend-or-foe environments run for a number of episodes")
            _require(isinstance(episodes, int) and episodes > 0,
                     f"episodes: must be a positive integer, got {episodes!r}")
        else:
            _require(steps is not None and episodes is None,
                     "steps: iterated games run for a number of steps")
            _require(isinstance(steps, int) and steps > 0,
                     f"steps: must be a positive integer, got {steps!r}")

        seeds = raw.pop("seeds", 1)
        seed_base = raw.pop("seed_base", 0)
        _require(isinstance(seed_base, int), f"seed_base: must be an integer, got {seed_base!r}")
        if isinstance(seeds, bool) or not isinstance(seeds, (int, list)):
            raise ConfigError(f"seeds: must be a count or a list, got {seeds!r}")
        if isinstance(seeds, int):
            _require(seeds > 0, f"seeds: count must be positive, got {seeds}")
            seed_list = [seed_base + i for i in range(seeds)]
        else:
            _require(len(seeds) > 0 and all(isinstance(s, int) for s in seeds),
                     f"seeds: list must hold integers, got {seeds!r}")
            seed_list = list(seeds)

        series = raw.pop("series", "episode" if episodic else "step")
        _require(series in ("step", "episode"), f"series: expected step or episode, got {series!r}")
        _require(series == "step" or episodic, "series: episode series requires an episodic environment")

        ma_window = raw.pop("ma_window", 100)
        _require(isinstance(ma_window, int) and ma_window > 0,
                 f"ma_window: must be a positive integer, got {ma_window!r}")

        workers = raw.pop("workers", 1)
        _require(isinstance(workers, int) and workers >= 1,
                 f"workers: must be >= 1, got {workers!r}")

        defaults = raw.pop("defaults", {})
        _require(isinstance(defaults, dict), "defaults: must be a section")
        agent_a = dict(raw.pop("agent_a"))
        agent_b = dict(raw.pop("agent_b"))
        for spec in (agent_a, agent_b):
            for key, value in defaults.items():
                spec.setdefault(key, value)

        decay = raw.pop("decay", None)
        if decay is not None:
            decay = dict(decay)
            cadence = [k for k in ("every_episodes", "every_steps") if k in decay]
            _require(len(cadence) == 1, "decay: set exactly one of every_episodes/every_steps")
            _require(isinstance(decay[cadence[0]], int) and decay[cadence[0]] > 0,
                     f"decay.{cadence[0]}: must be a positive integer")
            _require(cadence[0] == "every_steps" or episodic,
                     "decay.every_episodes: requires an episodic environment")
            for key in decay:
                if key in ("every_episodes", "every_steps"):
                    continue
                _require(key in ("agent_a", "agent_a_inner", "agent_b", "agent_b_inner"),
                         f"decay.{key}: unknown decay target")
                factor = decay[key]
                _require(isinstance(factor, (int, float)) and 0 < factor <= 1,
                         f"decay.{key}: factor must be in (0, 1], got {factor!r}")

        config = cls(
            environment=raw.pop("environment"),
            agent_a=agent_a,
            agent_b=agent_b,
            steps=steps,
            episodes=episodes,
            seeds=seed_list,
            series=series,
            ma_window=ma_window,
            label=str(raw.pop("label", "")),
            out=raw.pop("out", None),
            workers=workers,
            write_checkpoints=bool(raw.pop("write_checkpoints", False)),
            decay=decay,
        )
        _require(not raw, f"unknown top-level option(s): {sorted(raw)}")
        # Fail fast on bad env/agent sections: build them once now.
        _, env = build_environment(config.environment)
        rng = np.random.default_rng(0)
        try:
            build_agent(config.agent_a, env.n_states, env.n_dm_actions, env.n_opp_actions, rng)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"agent_a: {exc}") from exc
        try:
            build_agent(config.agent_b, env.n_states, env.n_opp_actions, env.n_dm_actions, rng)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"agent_b: {exc}") from exc
        return config


def parse_override_value(text: str):
    """Parse a ``--set`` value: JSON literal when possible, else a bare string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(config: dict, assignment: str) -> None:
    """Apply one ``dotted.path=value`` assignment in place."""
    path, sep, value = assignment.partition("=")
    if not sep or not path:
        raise ConfigError(f"override {assignment!r}: expected key=value")
    keys = path.split(".")
    node = config
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {assignment!r}: {key} is not a section")
    node[keys[-1]] = parse_override_value(value)


def merge_dicts(base: dict, extra: dict) -> dict:
    """Recursive dict merge; scalar values in ``extra`` win."""
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge_dicts(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass
class EpisodeLog:
    """Per-step trace of one seeded simulation."""

    seed: int
    steps: np.ndarray
    episodes: np.ndarray
    states: np.ndarray
    actions_dm: np.ndarray
    actions_opp: np.ndarray
    rewards_dm: np.ndarray
    rewards_opp: np.ndarray
    terminals: np.ndarray
    meta: dict

    def __len__(self) -> int:
        return self.steps.size

    @property
    def n_episodes(self) -> int:
        return int(self.episodes[-1]) + 1 if self.episodes.size else 0

    def episode_returns(self) -> tuple[np.ndarray, np.ndarray]:
        """Summed rewards per episode, for both sides."""
        n = self.n_episodes
        return (
            np.bincount(self.episodes, weights=self.rewards_dm, minlength=n),
            np.bincount(self.episodes, weights=self.rewards_opp, minlength=n),
        )

    def reward_series(self, series: str) -> tuple[np.ndarray, np.ndarray]:
        if series == "episode":
            return self.episode_returns()
        return self.rewards_dm, self.rewards_opp


def _spawn_agents(config: ExperimentConfig, env, seed: int) -> tuple[Agent, Agent]:
    stream_a, stream_b = np.random.SeedSequence(seed).spawn(2)
    agent_a = build_agent(config.agent_a, env.n_states, env.n_dm_actions,
                          env.n_opp_actions, np.random.default_rng(stream_a))
    agent_b = build_agent(config.agent_b, env.n_states, env.n_opp_actions,
                          env.n_dm_actions, np.random.default_rng(stream_b))
    return agent_a, agent_b


def _apply_decay(config: ExperimentConfig, agent_a: Agent, agent_b: Agent) -> None:
    decay = config.decay
    agent_a.scale_epsilon(decay.get("agent_a", 1.0), decay.get("agent_a_inner"))
    agent_b.scale_epsilon(decay.get("agent_b", 1.0), decay.get("agent_b_inner"))


class _TraceRecorder:
    """Append-only per-step buffers, converted to arrays once at the end."""

    def __init__(self):
        self.states, self.a, self.b = [], [], []
        self.r_dm, self.r_opp = [], []
        self.episodes, self.terminals = [], []

    def add(self, episode, s, a, b, r_dm, r_opp, terminal):
        self.episodes.append(episode)
        self.states.append(s)
        self.a.append(a)
        self.b.append(b)
        self.r_dm.append(r_dm)
        self.r_opp.append(r_opp)
        self.terminals.append(terminal)

    def to_log(self, seed: int, meta: dict) -> EpisodeLog:
        n = len(self.states)
        return EpisodeLog(
            seed=seed,
            steps=np.arange(n, dtype=np.int64),
            episodes=np.asarray(self.episodes, dtype=np.int64),
            states=np.asarray(self.states, dtype=np.int64),
            actions_dm=np.asarray(self.a, dtype=np.int64),
            actions_opp=np.asarray(self.b, dtype=np.int64),
            rewards_dm=np.asarray(self.r_dm, dtype=float),
            rewards_opp=np.asarray(self.r_opp, dtype=float),
            terminals=np.asarray(self.terminals, dtype=bool),
            meta=meta,
        )


def run_single_seed(config: ExperimentConfig, seed: int) -> EpisodeLog:
    """Run one fully independent simulation for ``seed``."""
    env_kind, env = build_environment(config.environment)
    agent_a, agent_b = _spawn_agents(config, env, seed)
    recorder = _TraceRecorder()
    epsilon_trace = [(0, agent_a.epsilon, agent_b.epsilon)]

    if env_kind in STEPWISE_KINDS:
        every = (config.decay or {}).get("every_steps")
        s_a, s_b = env.reset()
        agent_a.start_episode()
        agent_b.start_episode()
        for step in range(config.steps):
            if every and step > 0 and step % every == 0:
                _apply_decay(config, agent_a, agent_b)
                epsilon_trace.append((step, agent_a.epsilon, agent_b.epsilon))
            a = agent_a.act(s_a)
            b = agent_b.act(s_b)
            res = env.step(a, b)
            agent_a.observe(Transition(s_a, a, b, res.r_dm, res.r_opp, res.s_dm, res.terminal))
            agent_b.observe(Transition(s_b, b, a, res.r_opp, res.r_dm, res.s_opp, res.terminal))
            recorder.add(0, s_a, a, b, res.r_dm, res.r_opp, res.terminal)
            s_a, s_b = res.s_dm, res.s_opp
    else:
        every = (config.decay or {}).get("every_episodes")
        # The stateless game is a continuing repeated interaction: each round
        # counts as one episode for logging and decay, but steps never
        # terminate, so the discount keeps bridging rounds.
        one_round = env_kind == "foe_stateless"
        for episode in range(config.episodes):
            if every and episode > 0 and episode % every == 0:
                _apply_decay(config, agent_a, agent_b)
                epsilon_trace.append((episode, agent_a.epsilon, agent_b.epsilon))
            s_a, s_b = env.reset()
            agent_a.start_episode()
            agent_b.start_episode()
            commit = agent_b.act(s_b)
            while True:
                a = agent_a.act(s_a)
                res = env.step(a, commit)
                # A step-cap cutoff ends the episode but is not a dead end, so
                # the agents' transitions stay non-terminal and bootstrap on.
                agent_a.observe(Transition(s_a, a, commit, res.r_dm, res.r_opp,
                                           res.s_dm, res.terminal))
                if res.dm_target is not None:
                    agent_b.observe(Transition(s_b, commit, res.dm_target, res.r_opp,
                                               res.r_dm, res.s_opp, res.terminal))
                recorder.add(episode, s_a, a, commit, res.r_dm, res.r_opp,
                             res.terminal or res.cutoff)
                s_a = res.s_dm
                if res.terminal or res.cutoff or one_round:
                    break

    meta = {
        "label": config.label,
        "seed": seed,
        "steps": config.steps,
        "episodes": config.episodes,
        "agent_a": copy.deepcopy(config.agent_a),
        "agent_b": copy.deepcopy(config.agent_b),
        "alpha": config.agent_a.get("alpha"),
        "gamma": config.agent_a.get("gamma"),
        "epsilon": config.agent_a.get("epsilon"),
        "epsilon_trace": epsilon_trace,
    }
    log = recorder.to_log(seed, meta)
    if config.write_checkpoints and config.out:
        _write_agent_checkpoints(config, seed, agent_a, agent_b)
    return log


def _write_agent_checkpoints(config: ExperimentConfig, seed: int,
                             agent_a: Agent, agent_b: Agent) -> None:
    out_dir = Path(config.out).parent if Path(config.out).suffix else Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = config.label or "run"
    for side, agent in (("agent_a", agent_a), ("agent_b", agent_b)):
        path = out_dir / f"{stem}_seed{seed}_{side}.checkpoint.txt"
        path.write_text(agent.snapshot())


def _seed_worker(args) -> EpisodeLog:
    config, seed = args
    return run_single_seed(config, seed)


def run_experiment(config: ExperimentConfig | dict) -> list[EpisodeLog]:
    """Run every configured seed and return the logs in seed order."""
    if isinstance(config, dict):
        config = ExperimentConfig.from_dict(config)
    if config.workers > 1 and len(config.seeds) > 1:
        with Pool(min(config.workers, len(config.seeds))) as pool:
            return pool.map(_seed_worker, [(config, s) for s in config.seeds])
    return [run_single_seed(config, seed) for seed in config.seeds]


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Trailing moving average; the first window-1 entries average what exists."""
    values = np.asarray(values, dtype=float)
    if window == 1:
        return values.copy()
    csum = np.cumsum(values, axis=-1)
    out = np.empty_like(csum)
    head = min(window, values.shape[-1])
    out[..., :head] = csum[..., :head] / np.arange(1, head + 1)
    if values.shape[-1] > window:
        out[..., window:] = (csum[..., window:] - csum[..., :-window]) / window
    return out


@dataclass
class RunSummary:
    """Smoothed per-seed reward series plus their cross-seed means."""

    window: int
    series: str
    seeds: list[int]
    rewards_dm: np.ndarray   # (n_seeds, length)
    rewards_opp: np.ndarray
    ma_dm: np.ndarray
    ma_opp: np.ndarray

    @property
    def length(self) -> int:
        return 0 if self.rewards_dm.size == 0 else self.rewards_dm.shape[1]

    @property
    def mean_dm(self) -> np.ndarray:
        return self.rewards_dm.mean(axis=0)

    @property
    def mean_opp(self) -> np.ndarray:
        return self.rewards_opp.mean(axis=0)

    @property
    def mean_ma_dm(self) -> np.ndarray:
        return self.ma_dm.mean(axis=0)

    @property
    def mean_ma_opp(self) -> np.ndarray:
        return self.ma_opp.mean(axis=0)

    def final_mean(self, window: int | None = None) -> tuple[float, float]:
        """Cross-seed mean reward over the last ``window`` entries (both sides)."""
        w = window or self.window
        return (
            float(self.rewards_dm[:, -w:].mean()),
            float(self.rewards_opp[:, -w:].mean()),
        )


def aggregate_runs(logs: list[EpisodeLog], window: int, series: str = "step") -> RunSummary:
    """Stack per-seed reward series, smooth them and add cross-seed means."""
    if not logs:
        raise ValueError("aggregate_runs needs at least one log")
    pairs = [log.reward_series(series) for log in logs]
    lengths = {p[0].size for p in pairs}
    if len(lengths) != 1:
        raise ValueError(f"logs have unequal series lengths: {sorted(lengths)}")
    rewards_dm = np.stack([p[0] for p in pairs])
    rewards_opp = np.stack([p[1] for p in pairs])
    return RunSummary(
        window=window,
        series=series,
        seeds=[log.seed for log in logs],
        rewards_dm=rewards_dm,
        rewards_opp=rewards_opp,
        ma_dm=moving_average(rewards_dm, window),
        ma_opp=moving_average(rewards_opp, window),
    )


CSV_HEADER = ["step", "seed", "r_dm", "r_opp", "ma_r_dm", "ma_r_opp"]


def _fmt(x: float) -> str:
    return repr(float(x))


def write_csv(summary_or_logs, path, window: int = 100, series: str = "step") -> None:
    """Write reward series as CSV: one block per seed, then the mean block.

    Accepts either a :class:`RunSummary` or a (possibly empty) list of logs,
    which is aggregated first.  Float formatting uses ``repr`` so values
    round-trip exactly and repeated runs yield identical bytes.
    """
    if isinstance(summary_or_logs, RunSummary):
        summary = summary_or_logs
    elif summary_or_logs:
        summary = aggregate_runs(summary_or_logs, window, series)
    else:
        summary = None
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_HEADER)
        if summary is None:
            return
        for i, seed in enumerate(summary.seeds):
            for t in range(summary.length):
                writer.writerow([
                    t, seed,
                    _fmt(summary.rewards_dm[i, t]), _fmt(summary.rewards_opp[i, t]),
                    _fmt(summary.ma_dm[i, t]), _fmt(summary.ma_opp[i, t]),
                ])
        mean_dm, mean_opp = summary.mean_dm, summary.mean_opp
        mean_ma_dm, mean_ma_opp = summary.mean_ma_dm, summary.mean_ma_opp
        for t in range(summary.length):
            writer.writerow([
                t, "mean",
                _fmt(mean_dm[t]), _fmt(mean_opp[t]),
                _fmt(mean_ma_dm[t]), _fmt(mean_ma_opp[t]),
            ])


def read_checkpoint(path) -> dict:
    """Parse a checkpoint file back into arrays and scalar string fields."""
    fields = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition(" ")
        fields[key] = value
    out = {}
    for key, value in fields.items():
        if key.endswith("_shape"):
            continue
        shape_key = key + "_shape"
        if shape_key in fields:
            shape = tuple(int(x) for x in fields[shape_key].split())
            out[key] = np.array(value.split(), dtype=float).reshape(shape)
        else:
            out[key] = value
    return out
