"""Bundled experiment configurations, one per reported figure."""
from __future__ import annotations

import copy


def _matrix(game, agent_a, agent_b, **extra):
    config = {
        "label": "",
        "steps": 20000,
        "seeds": 10,
        "ma_window": 100,
        "environment": {"kind": "matrix", "game": game},
        "defaults": {"alpha": 0.3, "gamma": 0.96, "epsilon": 0.1},
        "agent_a": agent_a,
        "agent_b": agent_b,
    }
    config.update(extra)
    return config


def _foe_stateless(agent_a, scaling="zero_sum"):
    return {
        "label": "",
        "episodes": 5000,
        "seeds": 10,
        "ma_window": 100,
        "environment": {"kind": "foe_stateless", "magnitude": 50.0, "scaling": scaling},
        "defaults": {"alpha": 0.1, "gamma": 0.8, "epsilon": 0.1},
        "agent_a": agent_a,
        "agent_b": {"kind": "smoother-adversary", "smoother_alpha": 0.8},
        # Exploration is reported as an initial value; it decays on the same
        # cadence the spatial variant makes explicit.
        "decay": {"every_episodes": 10, "agent_a": 0.995},
    }


def _foe_spatial(agent_a, decay):
    return {
        "label": "",
        "episodes": 15000,
        "seeds": 10,
        "ma_window": 100,
        "environment": {"kind": "foe_spatial", "max_steps": 50},
        "defaults": {"alpha": 0.05, "gamma": 0.8, "epsilon": 0.99},
        "agent_a": agent_a,
        "agent_b": {"kind": "smoother-adversary", "smoother_alpha": 0.8},
        "decay": decay,
    }


_FPQ = {"kind": "fpq", "prior": [1.0, 1.0]}
_INDQ = {"kind": "independent-q"}

PRESETS: dict[str, dict] = {
    "ipd_qq": _matrix("ipd", dict(_INDQ), dict(_INDQ)),
    "ipd_fpq": _matrix("ipd", dict(_FPQ), dict(_INDQ)),
    "ish_qq": _matrix("stag_hunt", dict(_INDQ), dict(_INDQ)),
    "ish_fpq": _matrix("stag_hunt", dict(_FPQ), dict(_INDQ)),
    "chicken_qq": _matrix("chicken", dict(_INDQ), dict(_INDQ)),
    "chicken_fpq": _matrix("chicken", dict(_FPQ), dict(_INDQ)),
    # The hill climber learns its value table slowly, which is what lets it
    # wear down the level-1 learner; the level-2 DM predicts its concessions.
    "chicken_wolf_l1": _matrix("chicken", dict(_FPQ), {"kind": "wolf-phc", "alpha": 0.05}),
    "chicken_wolf_l2": _matrix("chicken", {"kind": "level2"}, {"kind": "wolf-phc", "alpha": 0.05}),
    "memory1_tft": _matrix(
        "ipd", {"kind": "fpq", "prior": [1.0, 1.0], "alpha": 0.05}, {"kind": "tft"},
        environment={"kind": "memory1", "game": "ipd"},
    ),
    "memory1_tft_memoryless": _matrix(
        "ipd",
        {"kind": "fpq", "prior": [1.0, 1.0], "alpha": 0.05, "memoryless": True},
        {"kind": "tft"},
        environment={"kind": "memory1", "game": "ipd"},
    ),
    "foe_stateless_indq": _foe_stateless(dict(_INDQ)),
    "foe_stateless_l1forget": _foe_stateless({"kind": "fpq", "forget_lambda": 0.8}),
    "foe_stateless_l2": _foe_stateless({"kind": "level2"}),
    "foe_scalings_01": _foe_stateless({"kind": "level2"}, scaling="binary01"),
    "foe_scalings_pm1": _foe_stateless({"kind": "level2"}, scaling="pm1"),
    "foe_spatial_indq": _foe_spatial(
        dict(_INDQ), {"every_episodes": 10, "agent_a": 0.995},
    ),
    "foe_spatial_l2": _foe_spatial(
        # The placer commits once per episode, so the opponent model plays the
        # episode-level placement game rather than a per-cell one.
        {"kind": "level2", "opponent_model": "commitment"},
        {"every_episodes": 10, "agent_a": 0.995, "agent_a_inner": 0.9},
    ),
}

DESCRIPTIONS = {
    "ipd_qq": "iterated prisoner's dilemma, Q-learner vs Q-learner",
    "ipd_fpq": "iterated prisoner's dilemma, belief-based FPQ vs Q-learner",
    "ish_qq": "iterated stag hunt, Q-learner vs Q-learner",
    "ish_fpq": "iterated stag hunt, FPQ vs Q-learner",
    "chicken_qq": "iterated chicken, Q-learner vs Q-learner",
    "chicken_fpq": "iterated chicken, FPQ vs Q-learner",
    "chicken_wolf_l1": "iterated chicken, FPQ (level-1) vs WoLF-PHC adversary",
    "chicken_wolf_l2": "iterated chicken, level-2 learner vs WoLF-PHC adversary",
    "memory1_tft": "memory-1 prisoner's dilemma, FPQ vs tit-for-tat",
    "memory1_tft_memoryless": "memory-1 prisoner's dilemma, memoryless FPQ vs tit-for-tat",
    "foe_stateless_indq": "stateless friend-or-foe, independent Q vs adaptive adversary",
    "foe_stateless_l1forget": "stateless friend-or-foe, forgetting FPQ vs adaptive adversary",
    "foe_stateless_l2": "stateless friend-or-foe, level-2 vs adaptive adversary",
    "foe_scalings_01": "stateless friend-or-foe, level-2, adversary rewards {0, 1}",
    "foe_scalings_pm1": "stateless friend-or-foe, level-2, adversary rewards {-1, 1}",
    "foe_spatial_indq": "gridworld friend-or-foe, independent Q vs adaptive adversary",
    "foe_spatial_l2": "gridworld friend-or-foe, level-2 vs adaptive adversary",
}


def preset_config(name: str) -> dict:
    """A deep copy of the named preset, labeled with its own name."""
    if name not in PRESETS:
        raise KeyError(name)
    config = copy.deepcopy(PRESETS[name])
    config["label"] = name
    return config


def preset_names() -> list[str]:
    return sorted(PRESETS)
