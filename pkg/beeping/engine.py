# beeping/engine.py — beeplab
"""
Synchronous single-hop execution of node programs.

Each round every node that is not listening beeps, the channel bit is ⊤ iff at
least one node beeped, and every node then draws its next local state from its
program's transition distribution using one 64-bit word of its own Philox
stream. Executions stop when every node sits in a labeled final state or when
the round cutoff is reached.

Per-node streams: ``numpy.random.Philox(SeedSequence([seed, node_index]))``,
consumed in buffered blocks of ``random_raw`` words, one word per node per
round in node order (nodes already in a final state still consume theirs).
"""
from __future__ import annotations

import io
import json
import logging
import weakref
from array import array
from dataclasses import dataclass, field
from typing import (IO, Any, Dict, FrozenSet, Hashable, Iterable, Iterator, List,
                    Mapping, NamedTuple, Optional, Sequence, Tuple, Union)

import numpy as np
import pandas as pd

from beeping.config import DEFAULT_ROUND_CUTOFF
from beeping.errors import ArgumentError
from beeping.machine import NodeProgram, Sampler, normalize

logger = logging.getLogger(__name__)

SEED_MASK = (1 << 64) - 1


# ──────────────────────────────────────────────────────────────────────────────
# Channel
# ──────────────────────────────────────────────────────────────────────────────

def resolve_channel(actions: Sequence[bool]) -> bool:
    """⊤ (True) iff at least one node beeps."""
    if len(actions) == 0:
        raise ArgumentError("a round needs at least one node")
    return any(actions)


# ──────────────────────────────────────────────────────────────────────────────
# Randomness
# ──────────────────────────────────────────────────────────────────────────────

class NodeStream:
    """Buffered 64-bit words from a Philox generator keyed by (seed, node index)."""

    BLOCK = 512

    def __init__(self, seed: int, index: int):
        self._gen = np.random.Philox(np.random.SeedSequence([seed & SEED_MASK, index]))
        self._buf: List[int] = []
        self._pos = 0

    def next_word(self) -> int:
        if self._pos >= len(self._buf):
            self._buf = self._gen.random_raw(self.BLOCK).tolist()
            self._pos = 0
        word = self._buf[self._pos]
        self._pos += 1
        return word


# ──────────────────────────────────────────────────────────────────────────────
# Network / trace types
# ──────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class NetworkSpec:
    """n nodes, a program per node (or one shared program) and initial-bit overrides."""

    n: int
    programs: Union[NodeProgram, Tuple[NodeProgram, ...]]
    overrides: Mapping[int, Mapping[str, int]] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise ArgumentError(f"n must be a positive integer, got {self.n!r}")
        if not isinstance(self.programs, NodeProgram):
            programs = tuple(self.programs)
            if len(programs) != self.n:
                raise ArgumentError(f"{len(programs)} programs for {self.n} nodes")
            object.__setattr__(self, "programs", programs)
        for node, assignment in self.overrides.items():
            if not 0 <= node < self.n:
                raise ArgumentError(f"override for unknown node {node}")
            program = self.program_for(node)
            for variable in assignment:
                if variable not in program.variables:
                    raise ArgumentError(f"{program.name} declares no variable {variable!r}")

    def program_for(self, node: int) -> NodeProgram:
        if isinstance(self.programs, NodeProgram):
            return self.programs
        return self.programs[node]

    def initial_states(self) -> List[Hashable]:
        return [self.program_for(i).initial(self.overrides.get(i)) for i in range(self.n)]


class TraceEvent(NamedTuple):
    time: int                 # completed rounds when the event fired
    type: str
    nodes: Dict[int, Any]     # node index -> payload


@dataclass
class Trace:
    seed: int
    n: int
    channels: bytearray = field(default_factory=bytearray)
    beep_counts: array = field(default_factory=lambda: array("I"))
    actions: List[Optional[bytes]] = field(default_factory=list)
    events: List[TraceEvent] = field(default_factory=list)
    terminated: bool = False
    rounds_elapsed: int = 0
    final_labels: List[Optional[str]] = field(default_factory=list)
    declared_labels: FrozenSet[str] = frozenset()

    def channel(self, rnd: int) -> bool:
        return bool(self.channels[rnd])

    def events_of(self, kind: str) -> List[TraceEvent]:
        return [e for e in self.events if e.type == kind]

    def label_count(self, label: str) -> int:
        return sum(1 for x in self.final_labels if x == label)


# ──────────────────────────────────────────────────────────────────────────────
# Compiled program cache
# ──────────────────────────────────────────────────────────────────────────────

class _Compiled:
    """Memoised act / sampler / label / events lookups for one program."""

    __slots__ = ("program", "acts", "samplers", "labels", "events")

    def __init__(self, program: NodeProgram):
        self.program = program
        self.acts: Dict[Hashable, bool] = {}
        self.samplers: Dict[Tuple[Hashable, bool], Sampler] = {}
        self.labels: Dict[Hashable, Optional[str]] = {}
        self.events: Dict[Tuple[Any, Any, Any], Tuple[Tuple[str, Any], ...]] = {}

    def act(self, state) -> bool:
        try:
            return self.acts[state]
        except KeyError:
            value = self.acts[state] = bool(self.program.act(state))
            return value

    def sampler(self, state, heard: bool) -> Sampler:
        key = (state, heard)
        try:
            return self.samplers[key]
        except KeyError:
            s = self.samplers[key] = Sampler(normalize(self.program.step(state, heard)))
            return s

    def label(self, state) -> Optional[str]:
        try:
            return self.labels[state]
        except KeyError:
            value = self.labels[state] = self.program.label(state)
            return value

    def tags(self, prev, heard, nxt):
        key = (prev, heard, nxt)
        try:
            return self.events[key]
        except KeyError:
            value = self.events[key] = tuple(self.program.events(prev, heard, nxt))
            return value


_COMPILED: "weakref.WeakKeyDictionary[NodeProgram, _Compiled]" = weakref.WeakKeyDictionary()


def _compiled(program: NodeProgram) -> _Compiled:
    comp = _COMPILED.get(program)
    if comp is None:
        comp = _COMPILED[program] = _Compiled(program)
    return comp


# ──────────────────────────────────────────────────────────────────────────────
# Execution
# ──────────────────────────────────────────────────────────────────────────────

def _emit(trace: Trace, time: int, pending: Dict[str, Dict[int, Any]], sink) -> None:
    for kind, nodes in pending.items():
        event = TraceEvent(time, kind, nodes)
        trace.events.append(event)
        if sink is not None:
            sink.write(json.dumps(_event_record(event), sort_keys=True) + "\n")


def run_execution(spec: NetworkSpec, seed: int, round_cutoff: int = DEFAULT_ROUND_CUTOFF,
                  action_window: Optional[int] = None,
                  stream_to: Optional[IO[str]] = None) -> Trace:
    """
    Simulate ``spec`` until every node is labeled or ``round_cutoff`` rounds ran.

    ``action_window`` keeps only the most recent per-node action vectors in
    memory; ``stream_to`` receives the trace as JSON lines while it runs.
    """
    if not isinstance(round_cutoff, int) or round_cutoff < 1:
        raise ArgumentError(f"round_cutoff must be >= 1, got {round_cutoff!r}")
    if not isinstance(seed, int) or not 0 <= seed <= SEED_MASK:
        raise ArgumentError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    if action_window is not None and action_window < 0:
        raise ArgumentError("action_window must be >= 0")

    n = spec.n
    comps = [_compiled(spec.program_for(i)) for i in range(n)]
    streams = [NodeStream(seed, i) for i in range(n)]
    states = spec.initial_states()
    declared = frozenset().union(*(c.program.final_labels for c in comps))
    trace = Trace(seed=seed, n=n, declared_labels=declared)
    if stream_to is not None:
        stream_to.write(json.dumps({"type": "header", "seed": seed, "n": n}) + "\n")

    pending: Dict[str, Dict[int, Any]] = {}
    for i, state in enumerate(states):
        for kind, payload in comps[i].tags(None, None, state):
            pending.setdefault(kind, {})[i] = payload
    _emit(trace, 0, pending, stream_to)

    labels = [comps[i].label(s) for i, s in enumerate(states)]
    rnd = 0
    while rnd < round_cutoff and not all(label is not None for label in labels):
        acts = [comps[i].act(s) for i, s in enumerate(states)]
        beeps = sum(acts)
        heard = beeps > 0
        trace.channels.append(heard)
        trace.beep_counts.append(beeps)
        vector = bytes(acts)
        trace.actions.append(vector)
        if action_window is not None and len(trace.actions) > action_window:
            trace.actions[len(trace.actions) - action_window - 1] = None
        if stream_to is not None:
            stream_to.write(json.dumps({
                "type": "round", "round": rnd, "channel": int(heard), "beeps": beeps,
                "actions": "".join("1" if a else "0" for a in acts),
            }) + "\n")

        pending = {}
        for i in range(n):
            prev = states[i]
            comp = comps[i]
            nxt = comp.sampler(prev, heard).pick(streams[i].next_word())
            if nxt != prev or comp.label(prev) is None:
                for kind, payload in comp.tags(prev, heard, nxt):
                    pending.setdefault(kind, {})[i] = payload
            states[i] = nxt
            labels[i] = comp.label(nxt)
        rnd += 1
        if pending:
            _emit(trace, rnd, pending, stream_to)

    trace.rounds_elapsed = rnd
    trace.terminated = all(label is not None for label in labels)
    trace.final_labels = labels
    if stream_to is not None:
        stream_to.write(json.dumps(_summary_record(trace)) + "\n")
    logger.debug("execution seed=%d n=%d: %d rounds, terminated=%s",
                 seed, n, rnd, trace.terminated)
    return trace


def replay_phases(program: NodeProgram, channels: Iterable[bool],
                  start: Optional[Hashable] = None) -> List[Hashable]:
    """
    Public phases at times 0..len(channels), computed from channel bits alone.

    Follows one branch of every transition and requires all branches to agree
    on the next phase; a phase that depends on private randomness is rejected.
    """
    state = program.start() if start is None else start
    phases = [program.phase(state)]
    for rnd, heard in enumerate(channels):
        dist = normalize(program.step(state, bool(heard)))
        upcoming = {program.phase(s) for s, _ in dist}
        if len(upcoming) != 1:
            raise ArgumentError(f"{program.name}: phase after round {rnd} depends on randomness")
        state = dist[0][0]
        phases.append(program.phase(state))
    return phases


def check_channel_soundness(trace: Trace) -> List[int]:
    """Rounds whose recorded channel bit disagrees with the actions; empty when sound."""
    bad = []
    for rnd in range(trace.rounds_elapsed):
        heard = bool(trace.channels[rnd])
        vector = trace.actions[rnd] if rnd < len(trace.actions) else None
        if (trace.beep_counts[rnd] > 0) != heard:
            bad.append(rnd)
        elif vector is not None and resolve_channel(list(vector)) != heard:
            bad.append(rnd)
    return bad


# ──────────────────────────────────────────────────────────────────────────────
# Export
# ──────────────────────────────────────────────────────────────────────────────

def _jsonable(payload: Any) -> Any:
    if isinstance(payload, (list, tuple)):
        return [_jsonable(x) for x in payload]
    if isinstance(payload, dict):
        return {str(k): _jsonable(v) for k, v in payload.items()}
    if isinstance(payload, bool) or payload is None or isinstance(payload, (int, float, str)):
        return payload
    return str(payload)


def _event_record(event: TraceEvent) -> Dict[str, Any]:
    return {
        "type": "event", "event": event.type, "time": event.time,
        "nodes": {str(k): _jsonable(v) for k, v in sorted(event.nodes.items())},
    }


def _summary_record(trace: Trace) -> Dict[str, Any]:
    return {
        "type": "summary", "terminated": trace.terminated,
        "rounds_elapsed": trace.rounds_elapsed, "final_labels": trace.final_labels,
    }


def iter_trace_records(trace: Trace) -> Iterator[Dict[str, Any]]:
    """Header, then round records with the events fired after each round, then a summary."""
    yield {"type": "header", "seed": trace.seed, "n": trace.n}
    by_time: Dict[int, List[TraceEvent]] = {}
    for event in trace.events:
        by_time.setdefault(event.time, []).append(event)
    for event in by_time.get(0, ()):
        yield _event_record(event)
    for rnd in range(trace.rounds_elapsed):
        record = {"type": "round", "round": rnd, "channel": trace.channels[rnd],
                  "beeps": trace.beep_counts[rnd]}
        vector = trace.actions[rnd] if rnd < len(trace.actions) else None
        if vector is not None:
            record["actions"] = "".join("1" if a else "0" for a in vector)
        yield record
        for event in by_time.get(rnd + 1, ()):
            yield _event_record(event)
    yield _summary_record(trace)


def trace_to_jsonl(trace: Trace, fp: Optional[IO[str]] = None) -> Optional[str]:
    """Write the trace as JSON lines to ``fp``; return the text when no file is given."""
    out = fp if fp is not None else io.StringIO()
    for record in iter_trace_records(trace):
        out.write(json.dumps(record, sort_keys=True) + "\n")
    return out.getvalue() if fp is None else None


def trace_summary_frame(trace: Trace) -> pd.DataFrame:
    return pd.DataFrame({
        "round": np.arange(trace.rounds_elapsed, dtype=np.int64),
        "channel": np.array(list(trace.channels), dtype=np.int64),
        "n_beeping": np.asarray(trace.beep_counts, dtype=np.int64),
    })


def trace_summary_csv(trace: Trace, path: Optional[str] = None) -> Optional[str]:
    """Compact per-round CSV (round, channel, n_beeping)."""
    return trace_summary_frame(trace).to_csv(path, index=False)


__all__ = [
    "resolve_channel", "NodeStream", "NetworkSpec", "TraceEvent", "Trace",
    "run_execution", "replay_phases", "check_channel_soundness",
    "iter_trace_records", "trace_to_jsonl", "trace_summary_frame", "trace_summary_csv",
]
