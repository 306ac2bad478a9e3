# beeping/machine.py — beeplab
"""
Probabilistic beep state machines and procedural node programs.

Provides:
  - exact distribution helpers (point, bernoulli, normalize, bind, draw)
  - BeepMachine: the explicit (Q_r, Q_b, q_s, delta_silent, delta_beep) model
  - NodeProgram: procedural node behaviour from which a BeepMachine is
    extracted by breadth-first enumeration of reachable local states
  - validate_precision / extract_machine / audit_state_count
  - find_solo_reachable_path and the crowd-following probability built on it
  - JSON import / export of machines

All probabilities are fractions.Fraction; nothing here touches floats except
the reporting helper loneliness_state_bound.
"""
from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from types import MappingProxyType
from typing import (Any, Callable, Dict, FrozenSet, Hashable, Iterable, List,
                    Mapping, NamedTuple, Optional, Sequence, Tuple)

from beeping.config import DEFAULT_STATE_CAP
from beeping.errors import (ArgumentError, EnumerationOverflowError,
                            MalformedMachineError)
from beeping.units import format_rational, parse_rational

logger = logging.getLogger(__name__)

Probability = Fraction
State = Hashable
Dist = Tuple[Tuple[Any, Fraction], ...]

ZERO = Fraction(0)
ONE = Fraction(1)
HALF = Fraction(1, 2)

LABELS: FrozenSet[str] = frozenset(
    {"leader", "follower", "alone", "crowd", "accept", "reject"})

_WORD_BITS = 64


# ──────────────────────────────────────────────────────────────────────────────
# Distributions
# ──────────────────────────────────────────────────────────────────────────────

def point(x: Any) -> Dist:
    return ((x, ONE),)


def bernoulli(p: Fraction, when_true: Any, when_false: Any) -> Dist:
    """``when_true`` with probability p, else ``when_false``."""
    return normalize(((when_true, Fraction(p)), (when_false, ONE - Fraction(p))))


def normalize(entries: Iterable[Tuple[Any, Fraction]]) -> Dist:
    """Merge duplicate outcomes and drop zero entries, keeping first-seen order."""
    merged: Dict[Any, Fraction] = {}
    for outcome, p in entries:
        if p:
            merged[outcome] = merged.get(outcome, ZERO) + p
    return tuple(merged.items())


def bind(dist: Dist, f: Callable[[Any], Dist]) -> Dist:
    """Sequential composition: draw x from ``dist``, then from ``f(x)``."""
    return normalize((y, p * r) for x, p in dist for y, r in f(x))


def dist_map(dist: Dist, f: Callable[[Any], Any]) -> Dist:
    return normalize((f(x), p) for x, p in dist)


def is_point(dist: Dist) -> bool:
    return len(dist) == 1 and dist[0][1] == ONE


def total_mass(dist: Dist) -> Fraction:
    return sum((p for _, p in dist), ZERO)


class Sampler:
    """
    Fixed-precision, rejection-free sampler for one exact distribution.

    A 64-bit word w selects bucket u = (w * L) >> 64 in [0, L), where L is the
    lcm of the denominators; outcome i owns the half-open range of buckets
    [cum_{i-1}, cum_i). Exactly one word is consumed per draw, so a stream is
    advanced identically whether or not the distribution is a point mass.
    """

    __slots__ = ("outcomes", "thresholds", "scale")

    def __init__(self, dist: Dist):
        if not dist:
            raise ArgumentError("cannot sample an empty distribution")
        scale = 1
        for _, p in dist:
            scale = scale * p.denominator // math.gcd(scale, p.denominator)
        acc = 0
        thresholds = []
        for _, p in dist:
            acc += p.numerator * (scale // p.denominator)
            thresholds.append(acc)
        if acc != scale:
            raise ArgumentError(f"distribution mass is {Fraction(acc, scale)}, not 1")
        self.outcomes = tuple(x for x, _ in dist)
        self.thresholds = tuple(thresholds)
        self.scale = scale

    def pick(self, word: int) -> Any:
        if len(self.outcomes) == 1:
            return self.outcomes[0]
        u = (word * self.scale) >> _WORD_BITS
        return self.outcomes[bisect_right(self.thresholds, u)]


def draw(dist: Dist, word: int) -> Any:
    return Sampler(dist).pick(word)


# ──────────────────────────────────────────────────────────────────────────────
# BeepMachine
# ──────────────────────────────────────────────────────────────────────────────

class PrecisionViolation(NamedTuple):
    state: int
    channel: str          # "silent" | "beep"
    target: int
    probability: Fraction


@dataclass(frozen=True)
class BeepMachine:
    """Explicit machine M = (Q_r, Q_b, q_s, delta_silent, delta_beep) plus labeled finals."""

    receive_states: FrozenSet[int]
    beep_states: FrozenSet[int]
    start: int
    delta_silent: Mapping[int, Dist]
    delta_beep: Mapping[int, Dist]
    finals: Mapping[str, int] = field(default_factory=dict)
    names: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "receive_states", frozenset(self.receive_states))
        object.__setattr__(self, "beep_states", frozenset(self.beep_states))
        for attr in ("delta_silent", "delta_beep", "finals", "names"):
            object.__setattr__(self, attr, MappingProxyType(dict(getattr(self, attr))))

    @property
    def states(self) -> Tuple[int, ...]:
        return tuple(sorted(self.receive_states | self.beep_states))

    @property
    def size(self) -> int:
        """The state count s = |Q_r| + |Q_b|."""
        return len(self.receive_states) + len(self.beep_states)

    def is_beep(self, state: int) -> bool:
        return state in self.beep_states

    def delta(self, state: int, channel: bool) -> Dist:
        return (self.delta_beep if channel else self.delta_silent)[state]

    def solo_delta(self, state: int) -> Dist:
        """The transition a lone node takes: it hears a beep iff it beeps."""
        return self.delta(state, self.is_beep(state))

    def label_of(self, state: int) -> Optional[str]:
        for label, sid in self.finals.items():
            if sid == state:
                return label
        return None

    def check_structure(self) -> None:
        """Raise MalformedMachineError on any structural invariant violation."""
        problems: List[str] = []
        overlap = self.receive_states & self.beep_states
        if overlap:
            problems.append(f"Q_r and Q_b overlap on {sorted(overlap)}")
        universe = self.receive_states | self.beep_states
        if self.start not in universe:
            problems.append(f"start state {self.start} is not a machine state")
        for channel, table in (("silent", self.delta_silent), ("beep", self.delta_beep)):
            missing = universe - set(table)
            if missing:
                problems.append(f"delta_{channel} undefined for {sorted(missing)}")
            for state, dist in table.items():
                if state not in universe:
                    problems.append(f"delta_{channel} defined for unknown state {state}")
                seen = set()
                mass = ZERO
                for target, p in dist:
                    if target in seen:
                        problems.append(f"delta_{channel}({state}) repeats {target}")
                    seen.add(target)
                    if target not in universe:
                        problems.append(f"delta_{channel}({state}) targets unknown {target}")
                    if not isinstance(p, Fraction) or p < 0 or p > 1:
                        problems.append(f"delta_{channel}({state}) has bad probability {p!r}")
                    else:
                        mass += p
                if mass != ONE:
                    problems.append(f"delta_{channel}({state}) sums to {mass}")
        for label, sid in self.finals.items():
            if label not in LABELS:
                problems.append(f"unknown final label {label!r}")
            if sid not in universe:
                problems.append(f"final {label!r} is not a machine state")
                continue
            if sid in self.beep_states:
                problems.append(f"final {label!r} must be a receive state")
            for table in (self.delta_silent, self.delta_beep):
                if tuple(table.get(sid, ())) != point(sid):
                    problems.append(f"final {label!r} is not terminal")
                    break
        if problems:
            raise MalformedMachineError("; ".join(problems))


def validate_precision(machine: BeepMachine, q: int) -> List[PrecisionViolation]:
    """
    List every probability outside {0, 1} ∪ [1/q, 1 - 1/q].

    Structural problems raise MalformedMachineError instead.
    """
    if not isinstance(q, int) or isinstance(q, bool) or q < 2:
        raise ArgumentError(f"precision q must be an integer >= 2, got {q!r}")
    machine.check_structure()
    lo, hi = Fraction(1, q), ONE - Fraction(1, q)
    violations: List[PrecisionViolation] = []
    for state in machine.states:
        for channel, table in (("silent", machine.delta_silent), ("beep", machine.delta_beep)):
            for target, p in table[state]:
                if p == ZERO or p == ONE or lo <= p <= hi:
                    continue
                violations.append(PrecisionViolation(state, channel, target, p))
    return violations


# ──────────────────────────────────────────────────────────────────────────────
# NodeProgram
# ──────────────────────────────────────────────────────────────────────────────

class NodeProgram(ABC):
    """
    Bounded-state procedural node behaviour.

    Local states must be hashable and immutable. ``act`` and ``step`` may only
    look at the local state (and the channel bit): never at round numbers or
    node identity. ``step`` returns the exact distribution of the next local
    state; ``advance`` is the same transition driven by one random word.
    """

    name: str = "program"
    variables: Tuple[str, ...] = ()
    final_labels: FrozenSet[str] = frozenset()

    @abstractmethod
    def start(self) -> State: ...

    @abstractmethod
    def act(self, state: State) -> bool:
        """True if a node in ``state`` beeps this round."""

    @abstractmethod
    def step(self, state: State, heard: bool) -> Dist:
        """Distribution of the next state; ``heard`` is the channel bit (⊤ = True)."""

    def label(self, state: State) -> Optional[str]:
        return None

    def phase(self, state: State) -> Hashable:
        """Public projection of the state that depends on channel history only."""
        return None

    def events(self, prev: Optional[State], heard: Optional[bool], nxt: State) -> Tuple[Tuple[str, Any], ...]:
        """Trace tags for the transition prev -> nxt (prev is None for the start state)."""
        return ()

    def override(self, state: State, variable: str, value: int) -> State:
        raise ArgumentError(f"{self.name} declares no variable {variable!r}")

    def initial(self, overrides: Optional[Mapping[str, int]] = None) -> State:
        state = self.start()
        for variable, value in (overrides or {}).items():
            if variable not in self.variables:
                raise ArgumentError(f"{self.name} declares no variable {variable!r}")
            state = self.override(state, variable, value)
        return state

    def advance(self, state: State, heard: bool, word: int) -> State:
        return draw(normalize(self.step(state, heard)), word)


class MachineProgram(NodeProgram):
    """Run an explicit BeepMachine through the NodeProgram interface."""

    def __init__(self, machine: BeepMachine):
        self.machine = machine
        self.name = "machine"
        self._labels = {sid: label for label, sid in machine.finals.items()}
        self.final_labels = frozenset(machine.finals)

    def start(self) -> int:
        return self.machine.start

    def act(self, state: int) -> bool:
        return state in self.machine.beep_states

    def step(self, state: int, heard: bool) -> Dist:
        return self.machine.delta(state, heard)

    def label(self, state: int) -> Optional[str]:
        return self._labels.get(state)


# ──────────────────────────────────────────────────────────────────────────────
# Extraction / audit
# ──────────────────────────────────────────────────────────────────────────────

def _explore(program: NodeProgram, cap: int):
    """BFS over reachable local states; returns (order, index, silent, beep)."""
    if cap < 1:
        raise ArgumentError(f"state cap must be >= 1, got {cap}")
    start = program.start()
    order: List[State] = [start]
    index: Dict[State, int] = {start: 0}
    silent: Dict[int, Dist] = {}
    beep: Dict[int, Dist] = {}
    queue = deque([start])
    while queue:
        state = queue.popleft()
        sid = index[state]
        on_beep = normalize(program.step(state, True))
        # a beeping node always experiences ⊤, so its δ⊥ is never taken
        on_silent = on_beep if program.act(state) else normalize(program.step(state, False))
        for dist in (on_silent, on_beep):
            for target, _ in dist:
                if target not in index:
                    if len(index) >= cap:
                        raise EnumerationOverflowError(len(index), cap)
                    index[target] = len(order)
                    order.append(target)
                    queue.append(target)
        silent[sid] = tuple((index[t], p) for t, p in on_silent)
        beep[sid] = tuple((index[t], p) for t, p in on_beep)
    logger.debug("explored %s: %d reachable states", program.name, len(order))
    return order, index, silent, beep


def extract_machine(program: NodeProgram, cap: int = DEFAULT_STATE_CAP) -> BeepMachine:
    """Enumerate ``program``'s reachable local states into an equivalent BeepMachine."""
    order, _, silent, beep = _explore(program, cap)
    receive_ids, beep_ids = set(), set()
    finals: Dict[str, int] = {}
    names: Dict[int, str] = {}
    for sid, state in enumerate(order):
        (beep_ids if program.act(state) else receive_ids).add(sid)
        names[sid] = repr(state)
        label = program.label(state)
        if label is not None:
            if label in finals:
                raise MalformedMachineError(f"label {label!r} marks more than one state")
            finals[label] = sid
    return BeepMachine(
        receive_states=receive_ids, beep_states=beep_ids, start=0,
        delta_silent=silent, delta_beep=beep, finals=finals, names=names,
    )


def audit_state_count(program: NodeProgram, cap: int = DEFAULT_STATE_CAP) -> int:
    """Number of reachable local states, i.e. the state count s of the extracted machine."""
    order, _, _, _ = _explore(program, cap)
    return len(order)


# ──────────────────────────────────────────────────────────────────────────────
# Solo reachable paths
# ──────────────────────────────────────────────────────────────────────────────

def find_solo_reachable_path(machine: BeepMachine, target: int) -> Optional[List[int]]:
    """
    Shortest state sequence q_s = q_1, ..., q_x = target that a lone node can
    follow with nonzero probability, or None. Shortest implies loop-free.
    """
    if target not in machine.receive_states and target not in machine.beep_states:
        raise ArgumentError(f"unknown state id {target!r}")
    parent: Dict[int, Optional[int]] = {machine.start: None}
    queue = deque([machine.start])
    while queue:
        state = queue.popleft()
        if state == target:
            path = [state]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            return path[::-1]
        for nxt, p in machine.solo_delta(state):
            if p > 0 and nxt not in parent:
                parent[nxt] = state
                queue.append(nxt)
    return None


def crowd_follow_probability(machine: BeepMachine, path: Sequence[int], k: int) -> Fraction:
    """
    Exact probability that k nodes started together all walk ``path`` in lockstep.

    While all k nodes share a state the channel is what a lone node would
    experience, so each step multiplies in p**k.
    """
    if k < 1:
        raise ArgumentError(f"k must be >= 1, got {k}")
    if not path or path[0] != machine.start:
        raise ArgumentError("path must start at the start state")
    prob = ONE
    for here, there in zip(path, path[1:]):
        p = dict(machine.solo_delta(here)).get(there, ZERO)
        if p == 0:
            return ZERO
        prob *= p ** k
    return prob


def loneliness_state_bound(epsilon: Fraction, q: int, k: int) -> float:
    """State count below which (1,k)-loneliness detection with error ε, precision q is impossible."""
    epsilon = Fraction(epsilon)
    if not (0 < epsilon < 1) or q < 2 or k < 1:
        raise ArgumentError("need 0 < ε < 1, q >= 2, k >= 1")
    return math.log(1 / epsilon) / (k * math.log(q))


# ──────────────────────────────────────────────────────────────────────────────
# JSON interface
# ──────────────────────────────────────────────────────────────────────────────

def _dist_to_json(dist: Dist) -> List[List[Any]]:
    return [[int(t), format_rational(p)] for t, p in dist]


def machine_to_json(machine: BeepMachine) -> Dict[str, Any]:
    doc = {
        "receive_states": sorted(machine.receive_states),
        "beep_states": sorted(machine.beep_states),
        "start": machine.start,
        "delta_silent": {str(s): _dist_to_json(machine.delta_silent[s]) for s in machine.states},
        "delta_beep": {str(s): _dist_to_json(machine.delta_beep[s]) for s in machine.states},
        "finals": dict(machine.finals),
    }
    if machine.names:
        doc["names"] = {str(s): n for s, n in machine.names.items()}
    return doc


def machine_from_json(doc: Mapping[str, Any]) -> BeepMachine:
    """Inverse of machine_to_json; validates structure."""
    try:
        def table(key):
            return {
                int(s): tuple((int(t), parse_rational(p)) for t, p in entries)
                for s, entries in doc[key].items()
            }
        machine = BeepMachine(
            receive_states=[int(s) for s in doc["receive_states"]],
            beep_states=[int(s) for s in doc["beep_states"]],
            start=int(doc["start"]),
            delta_silent=table("delta_silent"),
            delta_beep=table("delta_beep"),
            finals={str(k): int(v) for k, v in doc.get("finals", {}).items()},
            names={int(k): str(v) for k, v in doc.get("names", {}).items()},
        )
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise MalformedMachineError(f"bad machine document: {exc}") from None
    machine.check_structure()
    return machine


def describe_machine(machine: BeepMachine) -> Dict[str, Any]:
    """Small summary dict for CLI / API output."""
    probs = [p for s in machine.states for table in (machine.delta_silent, machine.delta_beep)
             for _, p in table[s] if 0 < p < 1]
    return {
        "states": machine.size,
        "receive_states": len(machine.receive_states),
        "beep_states": len(machine.beep_states),
        "finals": dict(machine.finals),
        "min_probability": format_rational(min(probs)) if probs else None,
    }


__all__ = [
    "Probability", "Dist", "LABELS", "point", "bernoulli", "normalize", "bind", "dist_map",
    "is_point", "total_mass", "Sampler", "draw", "BeepMachine", "PrecisionViolation",
    "validate_precision", "NodeProgram", "MachineProgram", "extract_machine",
    "audit_state_count", "find_solo_reachable_path", "crowd_follow_probability",
    "loneliness_state_bound", "machine_to_json", "machine_from_json", "describe_machine",
]
