# logic/presets.py — beeplab
# ============================================================
# Protocol defaults and named experiment presets.
# - PROTOCOL_DEFAULTS: constants the constructors fall back to
# - COUNTER_DEFAULTS: the same for counter-machine runs (tighter ε)
# - PROTOCOLS: one entry per termination subroutine (API / CLI help)
# - EXPERIMENT_PRESETS: the acceptance grid + a few quick runs
# ============================================================
from typing import Any, Dict, List, Tuple

from beeping.errors import ArgumentError

PROTOCOL_DEFAULTS: Dict[str, Any] = {
    "epsilon": "1/10",
    "q": 2,
    "n_lower_bound": 1,
    "c": 5,              # state-optimal
    "count_bound": 8,    # constant-state / double-safe
}

COUNTER_DEFAULTS: Dict[str, Any] = {**PROTOCOL_DEFAULTS, "epsilon": "1/20"}

PROTOCOLS: Dict[str, Dict[str, Any]] = {
    "state-optimal":  {"label": "StateOptimal(Ñ)", "params": ("epsilon", "q", "n_lower_bound", "c"),
                       "slow": True,  "description": "δ rounds beeping w.p. 1-1/q̂; true iff all silent. Optimal state, exponential time in n."},
    "fixed-error":    {"label": "Fixed Error", "params": ("epsilon", "q"),
                       "slow": False, "description": "⌈log2(2/ε)⌉+2 round solo test; O(log 1/ε) states, error ε for every n."},
    "constant-state": {"label": "Constant State", "params": ("count_bound",),
                       "slow": False, "description": "Solo test timed by a distributed knockout counter; O(1) states, w.h.p. in n."},
    "double-safe":    {"label": "Double Safe", "params": ("epsilon", "q", "count_bound"),
                       "slow": False, "description": "Fixed Error ∧ Constant State; used to elect counter-machine coordinators."},
}

EXPERIMENT_PRESETS: Dict[str, Dict[str, Any]] = {
    # Fixed Error
    "fe_safety":        {"label": "Fixed Error safety grid, ε=1/10", "task": "elect", "protocol": "fixed-error", "epsilon": "1/10", "n": [1, 2, 4, 8, 16, 32], "trials": 20000, "seed": 1},
    "fe_safety_tight":  {"label": "Fixed Error safety grid, ε=1/50", "task": "elect", "protocol": "fixed-error", "epsilon": "1/50", "n": [1, 2, 4, 8, 16, 32], "trials": 20000, "seed": 2},
    "fe_solo":          {"label": "Fixed Error n=1 fast path",       "task": "elect", "protocol": "fixed-error", "epsilon": "1/10", "n": [1], "trials": 1000, "seed": 3},
    "fe_oracle":        {"label": "Fixed Error n=2 vs exact oracle", "task": "elect", "protocol": "fixed-error", "epsilon": "1/4",  "n": [2], "trials": 50000, "seed": 4},
    "fe_quick":         {"label": "Fixed Error quick look",          "task": "elect", "protocol": "fixed-error", "epsilon": "1/10", "n": [2, 8], "trials": 200, "seed": 5},
    # StateOptimal
    "so_small":         {"label": "StateOptimal n=Ñ=2",             "task": "elect", "protocol": "state-optimal", "epsilon": "1/10", "n_lower_bound": 2, "n": [2], "trials": 5000, "seed": 6, "cutoff": 10_000_000},
    # Constant State
    "cs_scaling":       {"label": "Constant State scaling",          "task": "elect", "protocol": "constant-state", "epsilon": "1/10", "n": [4, 16, 64, 256], "trials": 2000, "seed": 7},
    # Double Safe
    "ds_quick":         {"label": "Double Safe quick look",          "task": "elect", "protocol": "double-safe", "epsilon": "1/10", "n": [2, 8, 32], "trials": 500, "seed": 8},
    # Loneliness
    "lonely_solo":      {"label": "Loneliness n=1",                  "task": "lonely", "protocol": "fixed-error", "epsilon": "1/20", "n": [1], "trials": 1000, "seed": 9},
    "lonely_crowd":     {"label": "Loneliness crowds",               "task": "lonely", "protocol": "fixed-error", "epsilon": "1/20", "n": [2, 5, 10], "trials": 2000, "seed": 10},
    # Counter machines
    "parity_sweep":     {"label": "Parity for n=2..33",              "task": "counter", "program": "parity",  "epsilon": "1/20", "n": list(range(2, 34)), "init": ["c1=all"], "trials": 200, "seed": 11},
    "compare_grid":     {"label": "Compare on a 5x5 grid, n=8",      "task": "counter", "program": "compare", "epsilon": "1/20", "n": [8], "grid": [1, 2, 3, 5, 8], "trials": 200, "seed": 12},
}


def get_protocol(name: str) -> Dict[str, Any]:
    try:
        return PROTOCOLS[name]
    except KeyError:
        raise ArgumentError(f"unknown protocol {name!r}; choose from {', '.join(PROTOCOLS)}") from None


def defaults_for(task: str) -> Dict[str, Any]:
    return dict(COUNTER_DEFAULTS if task == "counter" else PROTOCOL_DEFAULTS)


def get_preset(name: str) -> Dict[str, Any]:
    """A copy of a named preset merged over the defaults for its task."""
    try:
        preset = EXPERIMENT_PRESETS[name]
    except KeyError:
        raise ArgumentError(f"unknown preset {name!r}") from None
    merged = defaults_for(preset.get("task", "elect"))
    merged.update({k: (list(v) if isinstance(v, list) else v) for k, v in preset.items()})
    return merged


def get_preset_groups() -> Dict[str, List[Tuple[str, str]]]:
    groups: Dict[str, List[Tuple[str, str]]] = {}
    for key, p in EXPERIMENT_PRESETS.items():
        task = p.get("task", "elect")
        if task == "elect": g = f"election / {p['protocol']}"
        elif task == "lonely": g = "loneliness"
        else: g = "counter machines"
        groups.setdefault(g, []).append((key, p.get("label", key)))
    return groups
