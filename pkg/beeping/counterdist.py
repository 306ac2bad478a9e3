# beeping/counterdist.py — beeplab
"""
Counter machines run by a beeping network.

Counters live in unary: counter i holds the number of nodes whose bit c[i]
is set. A coordinator, elected with the double-safe election, walks the
counter program and announces one operation per frame:

    frame      1 framing round (coordinator beeps) + 6 pattern rounds:
               3 opcode bits, 2 counter-index bits, 1 parity bit
    INC/DEC    1 pre-round in which eligible nodes beep (silence = saturated,
               nothing to do), then a sub-election among eligible nodes whose
               winner flips its bit; everyone else observes
    ZERO       1 round, every node clears its bit
    CMPZ       1 round, nodes with the bit set beep; only the coordinator
               uses the answer (to pick the JZ branch)
    ACCEPT/REJECT  every node enters the matching final state

JMP never costs a round: the coordinator resolves jump chains itself.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from types import MappingProxyType
from typing import (Any, Dict, List, Mapping, NamedTuple, Optional, Sequence,
                    Tuple, Union)

from beeping.config import DEFAULT_ROUND_CUTOFF
from beeping.election import (DEFAULT_COUNT_BOUND, FOLLOWER, LEADER, DoubleSafe,
                              ElectionParams, UniversalElection)
from beeping.engine import NetworkSpec, Trace, run_execution
from beeping.errors import ArgumentError, CounterProgramError, NonDeciderError
from beeping.machine import NodeProgram, bind, dist_map, point
from beeping.units import parse_counter_init

logger = logging.getLogger(__name__)

MAX_COUNTERS = 4
DEFAULT_STEP_BUDGET = 1_000_000
PROGRAMS_DIR = Path(__file__).resolve().parent.parent / "static" / "programs"
SHIPPED_PROGRAMS = ("parity", "compare", "threshold")


# ──────────────────────────────────────────────────────────────────────────────
# Opcode frames
# ──────────────────────────────────────────────────────────────────────────────

class Op(IntEnum):
    INC = 0
    DEC = 1
    ZERO = 2
    CMPZ = 3
    ACCEPT = 4
    REJECT = 5


FRAME_BITS = 6


def encode_opcode(op: Op, index: int = 0) -> Tuple[int, ...]:
    """Six pattern bits: op (3, MSB first), counter index (2), parity of the five."""
    if not 0 <= index < MAX_COUNTERS:
        raise ArgumentError(f"counter index {index} out of range")
    payload = [(int(op) >> 2) & 1, (int(op) >> 1) & 1, int(op) & 1, (index >> 1) & 1, index & 1]
    return tuple(payload) + (sum(payload) & 1,)


def decode_opcode(bits: Sequence[int]) -> Optional[Tuple[Op, int]]:
    """Inverse of encode_opcode; None on a parity failure or unknown opcode."""
    if len(bits) != FRAME_BITS:
        raise ArgumentError(f"a frame has {FRAME_BITS} pattern bits, got {len(bits)}")
    bits = [1 if b else 0 for b in bits]
    if sum(bits[:5]) & 1 != bits[5]:
        return None
    code = bits[0] << 2 | bits[1] << 1 | bits[2]
    if code > Op.REJECT:
        return None
    return Op(code), bits[3] << 1 | bits[4]


def _frame_bits(acc: int) -> List[int]:
    return [(acc >> (FRAME_BITS - 1 - i)) & 1 for i in range(FRAME_BITS)]


# ──────────────────────────────────────────────────────────────────────────────
# Counter programs
# ──────────────────────────────────────────────────────────────────────────────

class Instruction(NamedTuple):
    mnemonic: str               # INC DEC ZERO JZ JMP ACCEPT REJECT
    counter: Optional[int]      # 0-based
    target: Optional[int]       # instruction index
    line: int


_OPERANDS = {"INC": 1, "DEC": 1, "ZERO": 1, "JZ": 2, "JMP": 1, "ACCEPT": 0, "REJECT": 0}
_LABEL_RE = re.compile(r"^\s*([A-Za-z_]\w*)\s*:(.*)$")


@dataclass(frozen=True)
class CounterProgram:
    k: int
    instructions: Tuple[Instruction, ...]
    labels: Mapping[str, int] = field(default_factory=dict)
    name: str = "program"

    def __post_init__(self):
        object.__setattr__(self, "instructions", tuple(self.instructions))
        object.__setattr__(self, "labels", MappingProxyType(dict(self.labels)))

    def resolve(self, pc: int) -> int:
        """Follow JMP chains from ``pc`` to the next real instruction."""
        seen = set()
        while self.instructions[pc].mnemonic == "JMP":
            if pc in seen:
                raise ArgumentError(f"JMP cycle at instruction {pc}")
            seen.add(pc)
            pc = self.instructions[pc].target
        return pc

    def announcement(self, pc: int) -> Tuple[Op, int]:
        """Operation the coordinator announces at ``pc``."""
        ins = self.instructions[self.resolve(pc)]
        if ins.mnemonic == "JZ":
            return Op.CMPZ, ins.counter
        op = Op[ins.mnemonic]
        return op, ins.counter if ins.counter is not None else 0

    def after(self, pc: int, is_zero: Optional[bool] = None) -> int:
        ins = self.instructions[self.resolve(pc)]
        if ins.mnemonic == "JZ" and is_zero:
            return self.resolve(ins.target)
        return self.resolve(self.resolve(pc) + 1)

    def source(self) -> str:
        names = {idx: name for name, idx in self.labels.items()}
        inverse = {v: k for k, v in self.labels.items()}
        lines = []
        for i, ins in enumerate(self.instructions):
            prefix = f"{names[i]}: " if i in names else ""
            args = []
            if ins.counter is not None:
                args.append(str(ins.counter + 1))
            if ins.target is not None:
                args.append(inverse[ins.target])
            lines.append(prefix + " ".join([ins.mnemonic] + args))
        return "\n".join(lines) + "\n"


def parse_counter_program(source: str, k: Optional[int] = None, name: str = "program") -> CounterProgram:
    """
    Parse counter assembly. ``k`` defaults to the largest counter index used.

    Raises CounterProgramError with every (line, message) problem found.
    """
    limit = MAX_COUNTERS if k is None else k
    if not 1 <= limit <= MAX_COUNTERS:
        raise ArgumentError(f"k must be in 1..{MAX_COUNTERS}, got {k}")
    problems: List[Tuple[int, str]] = []
    raw: List[Tuple[str, List[str], int]] = []
    labels: Dict[str, int] = {}
    label_lines: Dict[str, int] = {}
    pending: List[Tuple[str, int]] = []

    for lineno, line in enumerate(source.splitlines(), start=1):
        text = line.split("#", 1)[0]
        m = _LABEL_RE.match(text)
        while m:
            label = m.group(1)
            if label in labels or any(label == p for p, _ in pending):
                problems.append((lineno, f"duplicate label {label!r}"))
            pending.append((label, lineno))
            text = m.group(2)
            m = _LABEL_RE.match(text)
        parts = text.split()
        if not parts:
            continue
        for label, ln in pending:
            labels[label] = len(raw)
            label_lines[label] = ln
        pending = []
        raw.append((parts[0].upper(), parts[1:], lineno))

    for label, ln in pending:
        problems.append((ln, f"label {label!r} has no instruction"))
    if not raw and not problems:
        problems.append((0, "program has no instructions"))

    instructions: List[Instruction] = []
    used = 0
    for mnemonic, args, lineno in raw:
        if mnemonic not in _OPERANDS:
            problems.append((lineno, f"unknown mnemonic {mnemonic!r}"))
            continue
        if len(args) != _OPERANDS[mnemonic]:
            problems.append((lineno, f"{mnemonic} expects {_OPERANDS[mnemonic]} operand(s)"))
            continue
        counter = target = None
        if mnemonic in ("INC", "DEC", "ZERO", "JZ"):
            try:
                idx = int(args[0])
            except ValueError:
                problems.append((lineno, f"bad counter index {args[0]!r}"))
                continue
            if not 1 <= idx <= limit:
                problems.append((lineno, f"counter index out of range: {idx} (k={limit})"))
                continue
            counter = idx - 1
            used = max(used, idx)
        if mnemonic in ("JZ", "JMP"):
            label = args[-1]
            if label not in labels:
                problems.append((lineno, f"undefined label {label!r}"))
                continue
            target = labels[label]
        instructions.append(Instruction(mnemonic, counter, target, lineno))

    if not problems:
        last = instructions[-1]
        if last.mnemonic not in ("ACCEPT", "REJECT", "JMP"):
            problems.append((last.line, "execution can run past the last instruction"))
        for i, ins in enumerate(instructions):
            if ins.mnemonic != "JMP":
                continue
            seen, pc = set(), i
            while instructions[pc].mnemonic == "JMP" and pc not in seen:
                seen.add(pc)
                pc = instructions[pc].target
            if instructions[pc].mnemonic == "JMP":
                problems.append((ins.line, "JMP cycle never reaches an operation"))
                break

    if problems:
        raise CounterProgramError(sorted(problems))
    program = CounterProgram(k if k is not None else max(used, 1), tuple(instructions), labels, name)
    logger.debug("parsed counter program %s: %d instructions, k=%d",
                 name, len(instructions), program.k)
    return program


def load_counter_program(path: Union[str, Path], k: Optional[int] = None) -> CounterProgram:
    path = Path(path)
    return parse_counter_program(path.read_text(encoding="utf-8"), k, name=path.stem)


def shipped_program(name: str) -> CounterProgram:
    """One of the example programs in static/programs."""
    stem = name[:-3] if name.endswith(".cm") else name
    if stem not in SHIPPED_PROGRAMS:
        raise ArgumentError(f"unknown shipped program {name!r}; choose from {', '.join(SHIPPED_PROGRAMS)}")
    return load_counter_program(PROGRAMS_DIR / f"{stem}.cm")


# ──────────────────────────────────────────────────────────────────────────────
# Reference interpreter
# ──────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class InterpretResult:
    decision: str               # accept | reject
    steps: int
    values: Tuple[int, ...]


def _check_inputs(prog: CounterProgram, inputs: Sequence[int], cap: int) -> List[int]:
    if len(inputs) > prog.k:
        raise ArgumentError(f"{len(inputs)} inputs for a program with {prog.k} counters")
    values = [int(v) for v in inputs] + [0] * (prog.k - len(inputs))
    for i, v in enumerate(values):
        if not 0 <= v <= cap:
            raise ArgumentError(f"input c{i + 1}={v} outside 0..{cap}")
    return values


def interpret_counter_program(prog: CounterProgram, inputs: Sequence[int], cap: int,
                              budget: int = DEFAULT_STEP_BUDGET) -> InterpretResult:
    """Centralised semantics: INC saturates at ``cap``, DEC at 0; every instruction is a step."""
    values = _check_inputs(prog, inputs, cap)
    pc, steps = 0, 0
    while True:
        if steps >= budget:
            raise NonDeciderError(budget, pc)
        ins = prog.instructions[pc]
        steps += 1
        m = ins.mnemonic
        if m == "ACCEPT" or m == "REJECT":
            return InterpretResult(m.lower(), steps, tuple(values))
        if m == "INC":
            values[ins.counter] = min(cap, values[ins.counter] + 1)
        elif m == "DEC":
            values[ins.counter] = max(0, values[ins.counter] - 1)
        elif m == "ZERO":
            values[ins.counter] = 0
        elif m == "JZ":
            if values[ins.counter] == 0:
                pc = ins.target
                continue
        elif m == "JMP":
            pc = ins.target
            continue
        pc += 1


class ShadowCounter:
    """Operation-level interpreter stepping in lockstep with a distributed run."""

    def __init__(self, prog: CounterProgram, inputs: Sequence[int], cap: int):
        self.prog = prog
        self.cap = cap
        self.values = _check_inputs(prog, inputs, cap)
        self.pc = prog.resolve(0)

    def announcement(self) -> Tuple[Op, int]:
        return self.prog.announcement(self.pc)

    def execute(self) -> None:
        op, idx = self.announcement()
        zero = None
        if op is Op.INC:
            self.values[idx] = min(self.cap, self.values[idx] + 1)
        elif op is Op.DEC:
            self.values[idx] = max(0, self.values[idx] - 1)
        elif op is Op.ZERO:
            self.values[idx] = 0
        elif op is Op.CMPZ:
            zero = self.values[idx] == 0
        else:
            return
        self.pc = self.prog.after(self.pc, zero)


# ──────────────────────────────────────────────────────────────────────────────
# Node program
# ──────────────────────────────────────────────────────────────────────────────

class CounterState(NamedTuple):
    stage: str          # elect | frame | pre | sub | zero | cmp | accept | reject
    coord: bool
    pc: int             # coordinator only; followers keep 0
    bits: Tuple[int, ...]
    pos: int            # frame rounds already heard
    acc: int            # frame pattern bits heard so far
    op: int             # decoded opcode, -1 for none
    idx: int
    elect: Any = None   # ElectionState during elect / sub


ACCEPTED = CounterState("accept", False, 0, (), 0, 0, int(Op.ACCEPT), 0)
REJECTED = CounterState("reject", False, 0, (), 0, 0, int(Op.REJECT), 0)
# a garbled frame halts the node in the same terminal state as REJECT
GARBLED = REJECTED


class CounterNodeProgram(NodeProgram):
    """Follower logic for every node plus program control once a node is coordinator."""

    final_labels = frozenset({"accept", "reject"})

    def __init__(self, prog: CounterProgram, params: ElectionParams,
                 count_bound: int = DEFAULT_COUNT_BOUND):
        self.prog = prog
        self.params = params
        self.election = UniversalElection(DoubleSafe(params, count_bound), params)
        self.name = f"counter+{prog.name}"
        self.variables = tuple(f"c{i + 1}" for i in range(prog.k))
        self._entry = prog.resolve(0)

    def start(self):
        return CounterState("elect", False, 0, (0,) * self.prog.k, 0, 0, -1, 0,
                            self.election.start_state())

    def override(self, state, variable, value):
        if variable not in self.variables:
            raise ArgumentError(f"{self.name} declares no variable {variable!r}")
        if value not in (0, 1):
            raise ArgumentError(f"counter bits are 0 or 1, got {value!r}")
        i = self.variables.index(variable)
        return state._replace(bits=state.bits[:i] + (int(value),) + state.bits[i + 1:])

    def _eligible(self, s: CounterState) -> bool:
        want = 0 if s.op == Op.INC else 1
        return s.bits[s.idx] == want

    def _decoded(self, s: CounterState, heard: bool) -> Optional[Tuple[Op, int]]:
        """
        Operation carried by a completed frame.

        None when the frame is garbled, names a counter the program lacks, or
        differs from what this node announced as coordinator.
        """
        if s.pos == 0:
            return None
        decoded = decode_opcode(_frame_bits((s.acc << 1) | int(heard)))
        if decoded is None:
            return None
        op, idx = decoded
        if op not in (Op.ACCEPT, Op.REJECT) and idx >= self.prog.k:
            return None
        if s.coord and decoded != self.prog.announcement(s.pc):
            return None
        return decoded

    def _frame(self, s: CounterState, bits, pc: int) -> CounterState:
        return CounterState("frame", s.coord, pc if s.coord else 0, bits, 0, 0, -1, 0)

    def _finish_op(self, s: CounterState, bits, is_zero: Optional[bool] = None) -> CounterState:
        pc = self.prog.after(s.pc, is_zero) if s.coord else 0
        return self._frame(s, bits, pc)

    def act(self, s):
        stage = s.stage
        if stage in ("elect", "sub"):
            return self.election.act(s.elect)
        if stage == "frame":
            if not s.coord:
                return False
            if s.pos == 0:
                return True
            return bool(encode_opcode(*self.prog.announcement(s.pc))[s.pos - 1])
        if stage == "pre":
            return self._eligible(s)
        if stage == "cmp":
            return s.bits[s.idx] == 1
        return False

    def step(self, s, heard):
        stage = s.stage
        if stage == "elect":
            def settle(e):
                won = self.election.outcome(e)
                if won is None:
                    return point(s._replace(elect=e))
                coord = s._replace(coord=won)
                return point(self._frame(coord, s.bits, self._entry))
            return bind(self.election.step(s.elect, heard), settle)
        if stage == "frame":
            if s.pos == 0:
                return point(s._replace(pos=1) if heard else GARBLED)
            acc = (s.acc << 1) | int(heard)
            if s.pos < FRAME_BITS:
                return point(s._replace(pos=s.pos + 1, acc=acc))
            decoded = self._decoded(s, heard)
            if decoded is None:
                return point(GARBLED)
            op, idx = decoded
            if op is Op.ACCEPT:
                return point(ACCEPTED)
            if op is Op.REJECT:
                return point(REJECTED)
            nxt = {Op.INC: "pre", Op.DEC: "pre", Op.ZERO: "zero", Op.CMPZ: "cmp"}[op]
            return point(s._replace(stage=nxt, pos=0, acc=0, op=int(op), idx=idx))
        if stage == "pre":
            if not heard:
                return point(self._finish_op(s, s.bits))
            eligible = self._eligible(s)
            return dist_map(self.election.begin(eligible, eligible),
                            lambda e: s._replace(stage="sub", elect=e))
        if stage == "sub":
            def settle_op(e):
                won = self.election.outcome(e)
                if won is None:
                    return point(s._replace(elect=e))
                bits = s.bits
                if won:
                    flipped = 1 if s.op == Op.INC else 0
                    bits = bits[:s.idx] + (flipped,) + bits[s.idx + 1:]
                return point(self._finish_op(s, bits))
            return bind(self.election.step(s.elect, heard), settle_op)
        if stage == "zero":
            return point(self._finish_op(s, s.bits[:s.idx] + (0,) + s.bits[s.idx + 1:]))
        if stage == "cmp":
            return point(self._finish_op(s, s.bits, is_zero=not heard))
        return point(s)

    def label(self, s):
        return s.stage if s.stage in ("accept", "reject") else None

    def phase(self, s):
        stage = s.stage
        if stage == "elect":
            return ("elect", self.election.phase(s.elect))
        if stage == "sub":
            return ("sub-election", s.op, s.idx, self.election.phase(s.elect))
        if stage == "frame":
            return ("frame", s.pos, s.acc)
        if stage in ("pre", "zero", "cmp"):
            return (stage, s.op, s.idx)
        return ("done", stage, s.op)

    def events(self, prev, heard, nxt):
        if prev is None:
            return tuple(self.election.events(None, nxt.elect))
        tags: List[Tuple[str, Any]] = []
        ps, ns = prev.stage, nxt.stage
        if ps in ("elect", "sub"):
            if ns == ps:
                tags.extend(self.election.events(prev.elect, nxt.elect))
            else:
                won = nxt.coord if ps == "elect" else prev.bits != nxt.bits
                tags.extend(self.election.events(prev.elect, LEADER if won else FOLLOWER))
                tags.append(("coordinator" if ps == "elect" else "election", int(won)))
        if ps == "pre" and ns == "sub":
            eligible = int(self._eligible(prev))
            tags.append(("call", {"active": eligible, "ko": eligible}))
        if ps == "pre" and ns == "frame":
            tags.append(("skip", 1))
        if ps == "frame" and ns != "frame":
            decoded = self._decoded(prev, heard)
            if decoded is None:
                tags.append(("frame_error", 1))
            else:
                tags.append(("frame", [int(decoded[0]), decoded[1]]))
        if ps in ("pre", "sub", "zero", "cmp") and ns == "frame":
            tags.append(("op_done", list(nxt.bits)))
        if ns == "frame" and nxt.pos == 0 and nxt.coord and ps != "frame":
            op, idx = self.prog.announcement(nxt.pc)
            tags.append(("intent", [int(op), idx]))
        if ns in ("accept", "reject") and ps not in ("accept", "reject"):
            tags.append(("halt", ns))
        return tuple(tags)


# ──────────────────────────────────────────────────────────────────────────────
# Networks and runs
# ──────────────────────────────────────────────────────────────────────────────

InitSpec = Union[Mapping[int, Optional[int]], Sequence[str], None]


def resolve_counter_init(prog: CounterProgram, init: InitSpec, n: int) -> List[int]:
    """Counter input values from {1-based index: value | None for all} or ["c1=all", ...]."""
    values = [0] * prog.k
    if init is None:
        return values
    if isinstance(init, Mapping):
        items = list(init.items())
    else:
        items = [parse_counter_init(text) for text in init]
    for index, value in items:
        index = int(index)
        if not 1 <= index <= prog.k:
            raise ArgumentError(f"counter c{index} not in program (k={prog.k})")
        v = n if value is None else int(value)
        if v < 0:
            raise ArgumentError(f"counter c{index} cannot start negative")
        if v > n:
            raise ArgumentError(f"counter c{index}={v} exceeds unary capacity n={n}")
        values[index - 1] = v
    return values


def build_counter_network(prog: CounterProgram, params: ElectionParams, init: InitSpec, n: int,
                          count_bound: int = DEFAULT_COUNT_BOUND) -> NetworkSpec:
    """All nodes run the same program; the first v nodes start with c[i] set for input v."""
    values = resolve_counter_init(prog, init, n)
    program = CounterNodeProgram(prog, params, count_bound)
    overrides: Dict[int, Dict[str, int]] = {}
    for i, v in enumerate(values):
        for node in range(v):
            overrides.setdefault(node, {})[f"c{i + 1}"] = 1
    return NetworkSpec(n, program, overrides)


@dataclass
class CounterRun:
    decision: str               # accept | reject | timeout
    trace: Trace

    @property
    def rounds(self) -> int:
        return self.trace.rounds_elapsed


def run_counter_simulation(spec: NetworkSpec, seed: int,
                           cutoff: int = DEFAULT_ROUND_CUTOFF) -> CounterRun:
    trace = run_execution(spec, seed, cutoff)
    decision = trace.final_labels[0] if trace.terminated else "timeout"
    return CounterRun(decision, trace)


@dataclass
class CounterAudit:
    failed_elections: int = 0
    frame_mismatches: int = 0
    consistency_violations: List[int] = field(default_factory=list)
    operations: int = 0
    decision: Optional[str] = None
    shadow_decision: Optional[str] = None

    @property
    def ok(self) -> bool:
        return (self.failed_elections == 0 and self.frame_mismatches == 0
                and not self.consistency_violations)


def audit_counter_trace(trace: Trace, prog: CounterProgram, inputs: Sequence[int]) -> CounterAudit:
    """
    Replay a counter trace against a lockstep shadow interpreter.

    Counts coordinator/sub-elections without exactly one winner, frames that
    do not match the announced intent, and operation frames after which a
    distributed counter value differs from the shadow's.
    """
    audit = CounterAudit()
    shadow = ShadowCounter(prog, inputs, cap=trace.n)
    intent: Optional[Tuple[int, ...]] = None
    for event in trace.events:
        kind = event.type
        if kind in ("coordinator", "election"):
            if sum(event.nodes.values()) != 1:
                audit.failed_elections += 1
        elif kind == "intent":
            payloads = {tuple(v) for v in event.nodes.values()}
            intent = payloads.pop() if len(payloads) == 1 else None
        elif kind == "frame":
            payloads = {tuple(v) for v in event.nodes.values()}
            if len(payloads) != 1 or intent is None or payloads != {intent}:
                audit.frame_mismatches += 1
            op, idx = shadow.announcement()
            if intent is not None and (int(op), idx) != intent:
                audit.consistency_violations.append(event.time)
        elif kind == "frame_error":
            audit.frame_mismatches += 1
        elif kind == "op_done":
            shadow.execute()
            audit.operations += 1
            observed = [sum(bits[i] for bits in event.nodes.values()) for i in range(prog.k)]
            if observed != shadow.values:
                audit.consistency_violations.append(event.time)
        elif kind == "halt":
            labels = set(event.nodes.values())
            audit.decision = labels.pop() if len(labels) == 1 else "split"
            op, _ = shadow.announcement()
            audit.shadow_decision = op.name.lower() if op in (Op.ACCEPT, Op.REJECT) else None
    return audit


__all__ = [
    "MAX_COUNTERS", "SHIPPED_PROGRAMS", "Op", "encode_opcode", "decode_opcode",
    "Instruction", "CounterProgram", "parse_counter_program", "load_counter_program",
    "shipped_program", "InterpretResult", "interpret_counter_program", "ShadowCounter",
    "CounterState", "CounterNodeProgram", "resolve_counter_init", "build_counter_network",
    "CounterRun", "run_counter_simulation", "CounterAudit", "audit_counter_trace",
]
