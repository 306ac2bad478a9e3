# beeping/election.py — beeplab
"""
Universal leader election with pluggable termination subroutines.

    active, ko = 1, 1
    done = sub(active, ko); ko = 0
    while not done:                      # knockout loop, one round per iteration
        participate = 1 with prob 1 - 1/q_hat
        active ∧ participate  -> beep, else listen
        listened ∧ active ∧ heard -> active, ko = 0, 1
        silent round -> done = sub(active, ko); ko = 0
    active -> leader, else follower

Subroutines (state-optimal, fixed-error, constant-state, double-safe) are
written as small state machines whose public phase depends on the channel
history only, so every node, active or not, enters and leaves them in the
same round and returns the same bit.

Also here: the paired-round loneliness detector built on top of any election
program, direct subroutine invocations and the trace checks used by tests and
the harness (agreement, call boundaries, active counts, outcomes).
"""
from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from fractions import Fraction
from typing import (Any, Dict, FrozenSet, Hashable, List, NamedTuple, Optional,
                    Sequence, Tuple)

from beeping.config import DEFAULT_ROUND_CUTOFF
from beeping.engine import NetworkSpec, Trace, run_execution
from beeping.errors import ArgumentError
from beeping.machine import (HALF, ONE, Dist, NodeProgram, bernoulli, bind,
                             dist_map, is_point, point)
from beeping.units import ceil_fraction, ceil_log, ceil_log2, parse_rational

logger = logging.getLogger(__name__)

DEFAULT_C = 5
DEFAULT_COUNT_BOUND = 8

SUBROUTINE_NAMES: Tuple[str, ...] = ("state-optimal", "fixed-error", "constant-state", "double-safe")

AGREEMENT = "agreement"
SAFETY = "safety"
EVENTUAL = "eventual-termination"
FAST = "fast-termination"


# ──────────────────────────────────────────────────────────────────────────────
# Parameters
# ──────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class ElectionParams:
    """ε in (0, 1/2], precision q >= 2, network size lower bound Ñ >= 1."""

    epsilon: Fraction
    q: int = 2
    n_lower_bound: int = 1

    def __post_init__(self):
        eps = parse_rational(self.epsilon)
        if not (0 < eps <= Fraction(1, 2)):
            raise ArgumentError(f"epsilon must lie in (0, 1/2], got {eps}")
        if isinstance(self.q, bool) or not isinstance(self.q, int) or self.q < 2:
            raise ArgumentError(f"q must be an integer >= 2, got {self.q!r}")
        if isinstance(self.n_lower_bound, bool) or not isinstance(self.n_lower_bound, int) \
                or self.n_lower_bound < 1:
            raise ArgumentError(f"n_lower_bound must be an integer >= 1, got {self.n_lower_bound!r}")
        object.__setattr__(self, "epsilon", eps)

    @classmethod
    def parse(cls, epsilon, q=2, n_lower_bound=1) -> "ElectionParams":
        try:
            return cls(parse_rational(epsilon), int(q), int(n_lower_bound))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ArgumentError):
                raise
            raise ArgumentError(str(exc)) from None

    @property
    def q_hat(self) -> int:
        return min(self.q, ceil_fraction(1 / self.epsilon))

    def as_dict(self) -> Dict[str, Any]:
        return {"epsilon": str(self.epsilon), "q": self.q,
                "n_lower_bound": self.n_lower_bound, "q_hat": self.q_hat}


def invocation_bound(params: ElectionParams, n: int) -> float:
    """R = 4·log_q̂(max(n, 1/ε)); an analysis quantity, never used by nodes."""
    return 4 * math.log(max(n, float(1 / params.epsilon))) / math.log(params.q_hat)


def state_lower_bound(epsilon, q: int, n_lower_bound: int = 1) -> float:
    """log_q(1/ε)/Ñ, the order of the state count no correct election can go below."""
    eps = parse_rational(epsilon)
    if not (0 < eps < 1) or q < 2 or n_lower_bound < 1:
        raise ArgumentError("need 0 < ε < 1, q >= 2, Ñ >= 1")
    return math.log(1 / eps) / (math.log(q) * n_lower_bound)


def state_optimal_rounds(params: ElectionParams, c: int = DEFAULT_C) -> int:
    """δ = ⌈c·log_q̂(1/ε)/Ñ⌉, at least 1, computed exactly."""
    if c < 1:
        raise ArgumentError(f"c must be >= 1, got {c}")
    k = ceil_log(params.q_hat, (1 / params.epsilon) ** c)
    return max(1, -(-k // params.n_lower_bound))


# ──────────────────────────────────────────────────────────────────────────────
# Termination subroutines
# ──────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Return:
    """Marks the subroutine's exit in a step distribution."""

    value: bool


class TerminationSubroutine(ABC):
    """
    A subroutine fragment called with (active, ko) and returning one bit.

    ``step`` distributions range over fragment states and ``Return`` markers.
    Fragment states are tuples whose first field names the stage, so states of
    different subroutines never compare equal.
    """

    name: str = "subroutine"
    properties: FrozenSet[str] = frozenset()

    @abstractmethod
    def enter(self, active: bool, ko: bool) -> Dist: ...

    @abstractmethod
    def act(self, state) -> bool: ...

    @abstractmethod
    def step(self, state, heard: bool) -> Dist: ...

    @abstractmethod
    def phase(self, state) -> Hashable: ...

    def randomized_entry(self) -> bool:
        return any(not is_point(self.enter(a, k)) for a in (False, True) for k in (False, True))

    def describe(self) -> Dict[str, Any]:
        return {"name": self.name, "properties": sorted(self.properties)}


class SORound(NamedTuple):
    stage: str
    rnd: int
    beeping: bool
    clean: bool


class StateOptimal(TerminationSubroutine):
    """δ rounds of beeping with probability 1 - 1/q̂; true iff every round was silent."""

    name = "state-optimal"
    properties = frozenset({AGREEMENT, SAFETY, EVENTUAL})

    def __init__(self, params: ElectionParams, c: int = DEFAULT_C):
        self.params = params
        self.c = c
        self.delta = state_optimal_rounds(params, c)
        self._p_beep = ONE - Fraction(1, params.q_hat)

    def _round(self, rnd: int, clean: bool) -> Dist:
        return bernoulli(self._p_beep, SORound("so", rnd, True, clean), SORound("so", rnd, False, clean))

    def enter(self, active, ko):
        return self._round(0, True)

    def act(self, state):
        return state.beeping

    def step(self, state, heard):
        clean = state.clean and not heard
        if state.rnd + 1 >= self.delta:
            return point(Return(clean))
        return self._round(state.rnd + 1, clean)

    def phase(self, state):
        return (self.name, state.rnd)

    def describe(self):
        return {**super().describe(), "c": self.c, "rounds": self.delta}


class FEState(NamedTuple):
    stage: str          # fe-open | fe-mid | fe-final
    rnd: int
    active: bool
    beeping: bool
    solo: bool


class FixedError(TerminationSubroutine):
    """
    Fixed schedule of ⌈log2(2/ε)⌉ + 2 rounds.

    Opening round: nodes called with ko beep; silence aborts with false.
    Middle rounds: active nodes beep on a fair coin, and one that listens and
    hears a beep clears ``solo``. Final round: active nodes with solo cleared
    beep; the result is true iff it is silent.
    """

    name = "fixed-error"
    properties = frozenset({AGREEMENT, SAFETY, EVENTUAL, FAST})

    def __init__(self, params: ElectionParams):
        self.params = params
        self.middle_rounds = ceil_log2(2 / params.epsilon)

    @property
    def length(self) -> int:
        return self.middle_rounds + 2

    def _middle(self, rnd: int, active: bool, solo: bool) -> Dist:
        if not active:
            return point(FEState("fe-mid", rnd, False, False, True))
        return bernoulli(HALF, FEState("fe-mid", rnd, True, True, solo),
                         FEState("fe-mid", rnd, True, False, solo))

    def enter(self, active, ko):
        return point(FEState("fe-open", 0, bool(active), bool(ko), True))

    def act(self, state):
        return state.beeping

    def step(self, state, heard):
        if state.stage == "fe-open":
            if not heard:
                return point(Return(False))
            return self._middle(1, state.active, True)
        if state.stage == "fe-mid":
            solo = state.solo and not (state.active and not state.beeping and heard)
            if state.rnd < self.middle_rounds:
                return self._middle(state.rnd + 1, state.active, solo)
            return point(FEState("fe-final", state.rnd + 1, state.active,
                                 state.active and not solo, solo))
        return point(Return(not heard))

    def phase(self, state):
        return (self.name, state.stage, state.rnd)

    def describe(self):
        return {**super().describe(), "rounds": self.length}


class CSState(NamedTuple):
    stage: str          # cs-open | cs-odd | cs-even | cs-final
    count: int
    active: bool
    beeping: bool
    solo: bool
    attack: bool


class ConstantState(TerminationSubroutine):
    """
    Fixed Error with a distributed timer instead of a round counter.

    Odd rounds run the solo test. In even rounds every node holding ``attack``
    beeps on a fair coin and a listener that hears a beep drops ``attack``; a
    silent even round bumps ``count`` and re-arms everyone. The final round
    follows once ``count`` reaches ``count_bound``.
    """

    name = "constant-state"
    properties = frozenset({AGREEMENT, SAFETY, EVENTUAL, FAST})

    def __init__(self, count_bound: int = DEFAULT_COUNT_BOUND):
        if isinstance(count_bound, bool) or not isinstance(count_bound, int) or count_bound < 1:
            raise ArgumentError(f"count_bound must be an integer >= 1, got {count_bound!r}")
        self.count_bound = count_bound

    def _odd(self, count, active, solo, attack) -> Dist:
        if not active:
            return point(CSState("cs-odd", count, False, False, solo, attack))
        return bernoulli(HALF, CSState("cs-odd", count, True, True, solo, attack),
                         CSState("cs-odd", count, True, False, solo, attack))

    def _even(self, count, active, solo, attack) -> Dist:
        if not attack:
            return point(CSState("cs-even", count, active, False, solo, False))
        return bernoulli(HALF, CSState("cs-even", count, active, True, solo, True),
                         CSState("cs-even", count, active, False, solo, True))

    def enter(self, active, ko):
        return point(CSState("cs-open", 0, bool(active), bool(ko), True, True))

    def act(self, state):
        return state.beeping

    def step(self, state, heard):
        stage = state.stage
        if stage == "cs-open":
            if not heard:
                return point(Return(False))
            return self._odd(0, state.active, True, True)
        if stage == "cs-odd":
            solo = state.solo and not (state.active and not state.beeping and heard)
            # inactive nodes keep solo=1 so they never beep in the final round
            return self._even(state.count, state.active, solo, state.attack)
        if stage == "cs-even":
            if heard:
                return self._odd(state.count, state.active, state.solo, state.beeping)
            count = state.count + 1
            if count >= self.count_bound:
                return point(CSState("cs-final", count, state.active,
                                     state.active and not state.solo, state.solo, True))
            return self._odd(count, state.active, state.solo, True)
        return point(Return(not heard))

    def phase(self, state):
        return (self.name, state.stage, state.count)

    def describe(self):
        return {**super().describe(), "count_bound": self.count_bound}


class DSState(NamedTuple):
    part: str           # ds-fe | ds-cs
    inner: Any
    active: bool
    ko: bool
    first: bool         # Fixed Error's result, once known


class DoubleSafe(TerminationSubroutine):
    """Fixed Error then Constant State, always both; returns out1 ∧ out2."""

    name = "double-safe"
    properties = frozenset({AGREEMENT, SAFETY, EVENTUAL, FAST})

    def __init__(self, params: ElectionParams, count_bound: int = DEFAULT_COUNT_BOUND):
        self.params = params
        self.fixed = FixedError(params)
        self.constant = ConstantState(count_bound)

    def enter(self, active, ko):
        return dist_map(self.fixed.enter(active, ko),
                        lambda s: DSState("ds-fe", s, bool(active), bool(ko), False))

    def act(self, state):
        part = self.fixed if state.part == "ds-fe" else self.constant
        return part.act(state.inner)

    def step(self, state, heard):
        if state.part == "ds-fe":
            def lift(x):
                if isinstance(x, Return):
                    return dist_map(self.constant.enter(state.active, state.ko),
                                    lambda y: DSState("ds-cs", y, state.active, False, x.value))
                return point(state._replace(inner=x))
            return bind(self.fixed.step(state.inner, heard), lift)

        def finish(x):
            if isinstance(x, Return):
                return point(Return(state.first and x.value))
            return point(state._replace(inner=x))
        return bind(self.constant.step(state.inner, heard), finish)

    def phase(self, state):
        part = self.fixed if state.part == "ds-fe" else self.constant
        return (self.name, state.part, part.phase(state.inner))

    def describe(self):
        return {**super().describe(), "fixed_error_rounds": self.fixed.length,
                "count_bound": self.constant.count_bound}


def subroutine_state_optimal(params: ElectionParams, c: int = DEFAULT_C) -> StateOptimal:
    return StateOptimal(params, c)


def subroutine_fixed_error(params: ElectionParams) -> FixedError:
    return FixedError(params)


def subroutine_constant_state(count_bound: int = DEFAULT_COUNT_BOUND) -> ConstantState:
    return ConstantState(count_bound)


def subroutine_double_safe(params: ElectionParams,
                           count_bound: int = DEFAULT_COUNT_BOUND) -> DoubleSafe:
    return DoubleSafe(params, count_bound)


def make_subroutine(name: str, params: ElectionParams, c: int = DEFAULT_C,
                    count_bound: int = DEFAULT_COUNT_BOUND) -> TerminationSubroutine:
    """Build a subroutine by its canonical name."""
    if name == "state-optimal":
        return subroutine_state_optimal(params, c)
    if name == "fixed-error":
        return subroutine_fixed_error(params)
    if name == "constant-state":
        return subroutine_constant_state(count_bound)
    if name == "double-safe":
        return subroutine_double_safe(params, count_bound)
    raise ArgumentError(f"unknown subroutine {name!r}; choose from {', '.join(SUBROUTINE_NAMES)}")


# ──────────────────────────────────────────────────────────────────────────────
# Universal election
# ──────────────────────────────────────────────────────────────────────────────

class ElectionState(NamedTuple):
    mode: str           # boot | sub | loop | leader | follower
    active: bool
    ko: bool
    participate: bool
    sub: Any = None


LEADER = ElectionState("leader", True, False, False)
FOLLOWER = ElectionState("follower", False, False, False)


def _flag(bit: bool) -> Dict[str, int]:
    return {"value": int(bit)}


class UniversalElection:
    """
    The election loop as a reusable fragment.

    Embedding programs (the universal program itself, the counter simulation's
    sub-elections) keep an ElectionState inside their own state, start it with
    ``begin`` and stop once ``outcome`` is not None.
    """

    def __init__(self, sub: TerminationSubroutine, params: ElectionParams):
        if AGREEMENT not in sub.properties:
            raise ArgumentError(f"subroutine {sub.name} does not guarantee agreement")
        self.sub = sub
        self.params = params
        self._p_participate = ONE - Fraction(1, params.q_hat)

    def begin(self, active: bool = True, ko: bool = True) -> Dist:
        """Call the subroutine with (active, ko); ko is cleared in the caller."""
        active = bool(active)
        return dist_map(self.sub.enter(active, ko),
                        lambda s: ElectionState("sub", active, False, False, s))

    def start_state(self) -> ElectionState:
        first = self.begin(True, True)
        if is_point(first):
            return first[0][0]
        return ElectionState("boot", True, True, False)

    def _iteration(self, active: bool, ko: bool) -> Dist:
        if not active:
            return point(ElectionState("loop", False, ko, False))
        return bernoulli(self._p_participate, ElectionState("loop", True, ko, True),
                         ElectionState("loop", True, ko, False))

    def act(self, es: ElectionState) -> bool:
        if es.mode == "sub":
            return self.sub.act(es.sub)
        if es.mode == "loop":
            return es.active and es.participate
        return False

    def step(self, es: ElectionState, heard: bool) -> Dist:
        mode = es.mode
        if mode == "sub":
            def resume(x):
                if isinstance(x, Return):
                    if x.value:
                        return point(LEADER if es.active else FOLLOWER)
                    return self._iteration(es.active, False)
                return point(es._replace(sub=x))
            return bind(self.sub.step(es.sub, heard), resume)
        if mode == "loop":
            active, ko = es.active, es.ko
            if active and not es.participate and heard:
                active, ko = False, True
            if not heard:
                return self.begin(active, ko)
            return self._iteration(active, ko)
        if mode == "boot":
            return self.begin(True, True)
        return point(es)

    @staticmethod
    def outcome(es: ElectionState) -> Optional[bool]:
        if es.mode == "leader":
            return True
        if es.mode == "follower":
            return False
        return None

    def phase(self, es: ElectionState) -> Hashable:
        if es.mode == "sub":
            return ("sub", self.sub.phase(es.sub))
        if es.mode in ("leader", "follower"):
            return ("done",)
        return (es.mode,)

    def events(self, prev: Optional[ElectionState], nxt: ElectionState) -> List[Tuple[str, Any]]:
        tags: List[Tuple[str, Any]] = []
        if prev is None or prev.mode == "boot":
            if nxt.mode == "sub":
                tags.append(("call", {"active": 1, "ko": 1}))
            return tags
        if prev.mode == "loop":
            if prev.active and not nxt.active:
                tags.append(("knockout", 1))
            if nxt.mode == "sub":
                tags.append(("call", {"active": int(prev.active), "ko": int(prev.ko)}))
        elif prev.mode == "sub" and nxt.mode != "sub":
            tags.append(("return", nxt.mode in ("leader", "follower")))
        return tags


class UniversalProgram(NodeProgram):
    """Node program running the universal election with a given subroutine."""

    final_labels = frozenset({"leader", "follower"})

    def __init__(self, sub: TerminationSubroutine, params: ElectionParams):
        self.election = UniversalElection(sub, params)
        self.sub = sub
        self.params = params
        self.name = f"universal+{sub.name}"
        self._start = self.election.start_state()

    def start(self):
        return self._start

    def act(self, state):
        return self.election.act(state)

    def step(self, state, heard):
        return self.election.step(state, heard)

    def label(self, state):
        if state.mode == "leader":
            return "leader"
        if state.mode == "follower":
            return "follower"
        return None

    def phase(self, state):
        return self.election.phase(state)

    def events(self, prev, heard, nxt):
        tags = self.election.events(prev, nxt)
        if nxt.mode in ("leader", "follower") and (prev is None or prev.mode not in ("leader", "follower")):
            tags.append(("final", nxt.mode))
        return tuple(tags)


def build_universal(sub: TerminationSubroutine, params: ElectionParams) -> UniversalProgram:
    return UniversalProgram(sub, params)


def build_election(name: str, params: ElectionParams, c: int = DEFAULT_C,
                   count_bound: int = DEFAULT_COUNT_BOUND) -> UniversalProgram:
    return build_universal(make_subroutine(name, params, c, count_bound), params)


# ──────────────────────────────────────────────────────────────────────────────
# Direct subroutine invocations
# ──────────────────────────────────────────────────────────────────────────────

class InvocationState(NamedTuple):
    stage: str          # boot | run | accept | reject
    inner: Any = None


class SubroutineProgram(NodeProgram):
    """
    One node calling ``sub`` once with fixed (active, ko).

    When the subroutine's entry is randomized for some argument pair, every
    node spends one listening boot round drawing it, so nodes with different
    arguments stay in step.
    """

    final_labels = frozenset({"accept", "reject"})

    def __init__(self, sub: TerminationSubroutine, active: bool, ko: bool):
        self.sub = sub
        self.active = bool(active)
        self.ko = bool(ko)
        self.name = f"invoke+{sub.name}"
        self.boot_rounds = 1 if sub.randomized_entry() else 0

    def _run(self, x):
        return InvocationState("run", x)

    def start(self):
        if self.boot_rounds:
            return InvocationState("boot")
        return self._run(self.sub.enter(self.active, self.ko)[0][0])

    def act(self, state):
        return state.stage == "run" and self.sub.act(state.inner)

    def step(self, state, heard):
        if state.stage == "boot":
            return dist_map(self.sub.enter(self.active, self.ko), self._run)
        if state.stage == "run":
            def finish(x):
                if isinstance(x, Return):
                    return point(InvocationState("accept" if x.value else "reject"))
                return point(self._run(x))
            return bind(self.sub.step(state.inner, heard), finish)
        return point(state)

    def label(self, state):
        return state.stage if state.stage in ("accept", "reject") else None

    def phase(self, state):
        if state.stage == "run":
            return ("sub", self.sub.phase(state.inner))
        return ("done",) if state.stage in ("accept", "reject") else ("boot",)

    def events(self, prev, heard, nxt):
        if nxt.stage == "run" and (prev is None or prev.stage == "boot"):
            return (("call", {"active": int(self.active), "ko": int(self.ko)}),)
        if prev is not None and prev.stage == "run" and nxt.stage in ("accept", "reject"):
            return (("return", nxt.stage == "accept"),)
        return ()


@dataclass
class Invocation:
    values: List[Optional[bool]]        # per node; None if the cutoff hit first
    rounds: int                         # subroutine rounds, boot round excluded
    trace: Trace

    @property
    def agreed(self) -> bool:
        return len(set(self.values)) == 1 and self.values[0] is not None

    @property
    def value(self) -> Optional[bool]:
        return self.values[0] if self.agreed else None


def invoke_subroutine(sub: TerminationSubroutine, args: Sequence[Tuple[bool, bool]], seed: int,
                      cutoff: int = DEFAULT_ROUND_CUTOFF) -> Invocation:
    """Run one call of ``sub`` on len(args) nodes, node i called with args[i] = (active, ko)."""
    if not args:
        raise ArgumentError("an invocation needs at least one node")
    cache: Dict[Tuple[bool, bool], SubroutineProgram] = {}
    programs = []
    for active, ko in args:
        key = (bool(active), bool(ko))
        if key not in cache:
            cache[key] = SubroutineProgram(sub, *key)
        programs.append(cache[key])
    trace = run_execution(NetworkSpec(len(programs), tuple(programs)), seed, cutoff)
    values = [None if lab is None else lab == "accept" for lab in trace.final_labels]
    return Invocation(values, trace.rounds_elapsed - programs[0].boot_rounds, trace)


# ──────────────────────────────────────────────────────────────────────────────
# Loneliness detection
# ──────────────────────────────────────────────────────────────────────────────

class LonelyState(NamedTuple):
    stage: str          # elect | announce | check | alone | crowd
    inner: Any
    leader: bool


ALONE = LonelyState("alone", None, False)
CROWD = LonelyState("crowd", None, False)


class LonelinessProgram(NodeProgram):
    """
    Rounds come in pairs: the first runs one round of the election, in the
    second every elected leader beeps. After a heard announcement one check
    round follows in which every non-leader beeps; silence means alone.
    """

    final_labels = frozenset({"alone", "crowd"})

    def __init__(self, base: NodeProgram):
        if "leader" not in base.final_labels:
            raise ArgumentError(f"{base.name} has no leader label")
        self.base = base
        self.name = f"lonely+{base.name}"

    def _is_leader(self, inner) -> bool:
        return self.base.label(inner) == "leader"

    def start(self):
        return LonelyState("elect", self.base.start(), False)

    def act(self, state):
        if state.stage == "elect":
            return self.base.act(state.inner)
        if state.stage == "announce":
            return state.leader
        if state.stage == "check":
            return not state.leader
        return False

    def step(self, state, heard):
        stage = state.stage
        if stage == "elect":
            return dist_map(self.base.step(state.inner, heard),
                            lambda s: LonelyState("announce", s, self._is_leader(s)))
        if stage == "announce":
            if heard:
                return point(LonelyState("check", None, state.leader))
            return point(LonelyState("elect", state.inner, False))
        if stage == "check":
            return point(CROWD if heard else ALONE)
        return point(state)

    def label(self, state):
        return state.stage if state.stage in ("alone", "crowd") else None

    def phase(self, state):
        if state.stage in ("elect", "announce"):
            return (state.stage, self.base.phase(state.inner))
        return ("done",) if state.stage in ("alone", "crowd") else ("check",)

    def events(self, prev, heard, nxt):
        if prev is None:
            return tuple(self.base.events(None, None, nxt.inner))
        tags = []
        if prev.stage == "elect":
            tags.extend(self.base.events(prev.inner, heard, nxt.inner))
        if nxt.stage in ("alone", "crowd") and prev.stage == "check":
            tags.append(("final", nxt.stage))
        return tuple(tags)


def loneliness_from_leader_election(le_program: NodeProgram) -> LonelinessProgram:
    return LonelinessProgram(le_program)


# ──────────────────────────────────────────────────────────────────────────────
# Trace checks
# ──────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class ElectionOutcome:
    leader_count: int
    rounds: int
    terminated: bool

    @property
    def safety_ok(self) -> bool:
        return self.leader_count <= 1

    @property
    def liveness_ok(self) -> bool:
        return self.terminated and self.leader_count >= 1


def check_election_outcome(trace: Trace) -> ElectionOutcome:
    if "leader" not in trace.declared_labels:
        raise ArgumentError("trace was not produced by an election program")
    return ElectionOutcome(trace.label_count("leader"), trace.rounds_elapsed, trace.terminated)


def check_agreement(trace: Trace) -> List[int]:
    """Times of subroutine returns where nodes disagree or some node is missing."""
    bad = []
    for event in trace.events_of("return"):
        if len(set(event.nodes.values())) != 1 or len(event.nodes) != trace.n:
            bad.append(event.time)
    return bad


def call_boundaries(trace: Trace) -> List[Tuple[int, Optional[int]]]:
    """(first round, return time) of every subroutine call, from recorded events."""
    calls = [e.time for e in trace.events_of("call")]
    returns = [e.time for e in trace.events_of("return")]
    out = []
    for i, begin in enumerate(calls):
        out.append((begin, returns[i] if i < len(returns) else None))
    return out


def phase_boundaries(phases: Sequence[Hashable]) -> List[Tuple[int, Optional[int]]]:
    """The same boundaries recovered from a replayed phase sequence."""
    def inside(ph):
        return isinstance(ph, tuple) and len(ph) > 0 and ph[0] == "sub"

    out: List[Tuple[int, Optional[int]]] = []
    begin = None
    for t, ph in enumerate(phases):
        if inside(ph) and begin is None:
            begin = t
        elif not inside(ph) and begin is not None:
            out.append((begin, t))
            begin = None
    if begin is not None:
        out.append((begin, None))
    return out


def active_counts(trace: Trace) -> List[Tuple[int, int, bool]]:
    """(time, active nodes, some node has ko) at every subroutine call."""
    out = []
    for event in trace.events_of("call"):
        active = sum(args["active"] for args in event.nodes.values())
        any_ko = any(args["ko"] for args in event.nodes.values())
        out.append((event.time, active, any_ko))
    return out


def active_series(trace: Trace) -> List[int]:
    """Active node count at every time 0..rounds_elapsed, from knockout events."""
    drops: Dict[int, int] = {}
    for event in trace.events_of("knockout"):
        drops[event.time] = drops.get(event.time, 0) + len(event.nodes)
    series, active = [], trace.n
    for t in range(trace.rounds_elapsed + 1):
        active -= drops.get(t, 0)
        series.append(active)
    return series


__all__ = [
    "DEFAULT_C", "DEFAULT_COUNT_BOUND", "SUBROUTINE_NAMES", "ElectionParams",
    "invocation_bound", "state_lower_bound", "state_optimal_rounds", "Return",
    "TerminationSubroutine", "StateOptimal", "FixedError", "ConstantState", "DoubleSafe",
    "subroutine_state_optimal", "subroutine_fixed_error", "subroutine_constant_state",
    "subroutine_double_safe", "make_subroutine", "ElectionState", "UniversalElection",
    "UniversalProgram", "build_universal", "build_election", "SubroutineProgram",
    "Invocation", "invoke_subroutine", "LonelinessProgram", "loneliness_from_leader_election",
    "ElectionOutcome", "check_election_outcome", "check_agreement", "call_boundaries",
    "phase_boundaries", "active_counts", "active_series",
]
