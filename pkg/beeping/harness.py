# beeping/harness.py — beeplab
"""
Monte Carlo experiments over the election, loneliness and counter protocols.

Trial t of cell i runs with seed derive_seed(base, i, t), a splitmix64 chain,
so results do not depend on worker count or scheduling; cells are merged by
trial index. Reports render to a fixed-column CSV through pandas.
"""
from __future__ import annotations

import io
import logging
import math
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from beeping.config import DEFAULT_ROUND_CUTOFF, DEFAULT_SLOW_CUTOFF, Settings
from beeping.counterdist import (CounterProgram, audit_counter_trace,
                                 build_counter_network, interpret_counter_program,
                                 resolve_counter_init, run_counter_simulation)
from beeping.election import (DEFAULT_C, DEFAULT_COUNT_BOUND, SUBROUTINE_NAMES,
                              ElectionParams, build_election, check_election_outcome,
                              loneliness_from_leader_election)
from beeping.engine import NetworkSpec, run_execution
from beeping.errors import ArgumentError
from beeping.machine import NodeProgram
from beeping.units import format_rational, parse_int_list, parse_rational

logger = logging.getLogger(__name__)

WILSON_Z = 1.959963984540054
MASK64 = (1 << 64) - 1
TASKS = ("elect", "lonely")

REPORT_COLUMNS = [
    "protocol", "n", "epsilon", "q", "n_lower_bound", "trials", "violations",
    "liveness_failures", "rounds_p50", "rounds_p95", "rounds_p99", "rounds_max",
    "wilson_lo", "wilson_hi", "seed", "histogram",
]
COUNTER_COLUMNS = [
    "program", "n", "init", "epsilon", "trials", "matches", "mismatches", "timeouts",
    "failed_elections", "rounds_p50", "rounds_p95", "rounds_p99", "rounds_max", "seed",
]


# ──────────────────────────────────────────────────────────────────────────────
# Seeds and statistics
# ──────────────────────────────────────────────────────────────────────────────

def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(base: int, cell: int, trial: int) -> int:
    """splitmix64(splitmix64(splitmix64(base) ^ cell) ^ trial)."""
    return splitmix64(splitmix64(splitmix64(base & MASK64) ^ cell) ^ trial)


def wilson_interval(successes: int, trials: int, z: float = WILSON_Z) -> Tuple[float, float]:
    if trials <= 0:
        return 0.0, 1.0
    phat = successes / trials
    denom = 1 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def round_quantiles(rounds: Sequence[int]) -> Tuple[int, int, int, int]:
    """(p50, p95, p99, max), each an observed value."""
    if len(rounds) == 0:
        return 0, 0, 0, 0
    arr = np.asarray(rounds, dtype=np.int64)
    p50, p95, p99 = np.percentile(arr, [50, 95, 99], method="inverted_cdf")
    return int(p50), int(p95), int(p99), int(arr.max())


def fit_log_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Slope of log(y) against log(x); points with y <= 0 are skipped."""
    pts = [(x, y) for x, y in zip(xs, ys) if x > 0 and y > 0]
    if len(pts) < 2:
        raise ArgumentError("need at least two positive points to fit a slope")
    lx = np.log([p[0] for p in pts])
    ly = np.log([p[1] for p in pts])
    slope, _ = np.polyfit(lx, ly, 1)
    return float(slope)


# ──────────────────────────────────────────────────────────────────────────────
# Election / loneliness experiments
# ──────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class ExperimentConfig:
    task: str = "elect"
    protocol: str = "fixed-error"
    epsilon: Fraction = Fraction(1, 10)
    q: int = 2
    n_lower_bound: int = 1
    c: int = DEFAULT_C
    count_bound: int = DEFAULT_COUNT_BOUND
    n_values: Tuple[int, ...] = (1,)
    trials: int = 100
    seed: int = 0
    cutoff: Optional[int] = None
    workers: int = 1

    def __post_init__(self):
        if self.task not in TASKS:
            raise ArgumentError(f"unknown task {self.task!r}")
        if self.protocol not in SUBROUTINE_NAMES:
            raise ArgumentError(f"unknown protocol {self.protocol!r}")
        object.__setattr__(self, "epsilon", parse_rational(self.epsilon))
        object.__setattr__(self, "n_values", tuple(parse_int_list(list(self.n_values))))
        if self.trials < 1:
            raise ArgumentError(f"trials must be >= 1, got {self.trials}")
        if self.c < 1 or self.count_bound < 1 or self.workers < 1:
            raise ArgumentError("c, count_bound and workers must be >= 1")
        if self.cutoff is not None and self.cutoff < 1:
            raise ArgumentError(f"cutoff must be >= 1, got {self.cutoff}")
        if not 0 <= self.seed <= MASK64:
            raise ArgumentError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        self.params  # validates ε, q, Ñ

    @property
    def params(self) -> ElectionParams:
        return ElectionParams(self.epsilon, self.q, self.n_lower_bound)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        """Build from CLI / JSON keys (``n`` or ``n_values``, ``algo`` or ``protocol``)."""
        known = {"task", "protocol", "epsilon", "q", "n_lower_bound", "c", "count_bound",
                 "trials", "seed", "cutoff", "workers"}
        kwargs: Dict[str, Any] = {k: data[k] for k in known if data.get(k) is not None}
        if data.get("algo") is not None:
            kwargs["protocol"] = data["algo"]
        n = data.get("n_values", data.get("n"))
        if n is not None:
            kwargs["n_values"] = tuple(parse_int_list(n))
        for key in ("q", "n_lower_bound", "c", "count_bound", "trials", "seed", "cutoff", "workers"):
            if key in kwargs:
                try:
                    kwargs[key] = int(kwargs[key])
                except (TypeError, ValueError):
                    raise ArgumentError(f"{key} must be an integer, got {kwargs[key]!r}") from None
        return cls(**kwargs)

    def effective_cutoff(self, settings: Optional[Settings] = None) -> int:
        if self.cutoff is not None:
            return self.cutoff
        if self.protocol == "state-optimal":
            return settings.slow_cutoff if settings else DEFAULT_SLOW_CUTOFF
        return settings.round_cutoff if settings else DEFAULT_ROUND_CUTOFF

    def build_program(self) -> NodeProgram:
        program = build_election(self.protocol, self.params, self.c, self.count_bound)
        if self.task == "lonely":
            return loneliness_from_leader_election(program)
        return program


def format_histogram(histogram: Dict[int, int]) -> str:
    """Leader-count histogram as ``key:count`` pairs, e.g. ``1:38;2:2``."""
    return ";".join(f"{k}:{v}" for k, v in sorted(histogram.items()))


@dataclass
class CellResult:
    protocol: str
    n: int
    epsilon: Fraction
    q: int
    n_lower_bound: int
    trials: int
    histogram: Dict[int, int]
    violations: int
    liveness_failures: int
    rounds: List[int]
    seed: int
    wall_time: float = 0.0

    @property
    def violation_rate(self) -> float:
        return self.violations / self.trials

    @property
    def wilson(self) -> Tuple[float, float]:
        return wilson_interval(self.violations, self.trials)

    @property
    def quantiles(self) -> Tuple[int, int, int, int]:
        return round_quantiles(self.rounds)

    def row(self) -> Dict[str, Any]:
        p50, p95, p99, pmax = self.quantiles
        lo, hi = self.wilson
        return {
            "protocol": self.protocol, "n": self.n, "epsilon": format_rational(self.epsilon),
            "q": self.q, "n_lower_bound": self.n_lower_bound, "trials": self.trials,
            "violations": self.violations, "liveness_failures": self.liveness_failures,
            "rounds_p50": p50, "rounds_p95": p95, "rounds_p99": p99, "rounds_max": pmax,
            "wilson_lo": round(lo, 9), "wilson_hi": round(hi, 9), "seed": self.seed,
            "histogram": format_histogram(self.histogram),
        }


@dataclass
class Report:
    config: Optional[ExperimentConfig]
    cells: List[CellResult] = field(default_factory=list)


def _classify(task: str, trace) -> Tuple[int, bool, bool]:
    """(histogram key, violation, liveness failure) for one finished trial."""
    if task == "elect":
        outcome = check_election_outcome(trace)
        return outcome.leader_count, not outcome.safety_ok, not outcome.liveness_ok
    alone = trace.label_count("alone")
    if not trace.terminated:
        return alone, False, True
    if trace.n == 1:
        return alone, alone != 1, False
    return alone, trace.label_count("crowd") != trace.n, False


def _run_chunk(config: ExperimentConfig, cell: int, n: int, start: int, stop: int,
               cutoff: int) -> List[Tuple[int, int, bool, bool, int]]:
    program = config.build_program()
    spec = NetworkSpec(n, program)
    out = []
    for t in range(start, stop):
        trace = run_execution(spec, derive_seed(config.seed, cell, t), cutoff)
        key, violation, dead = _classify(config.task, trace)
        out.append((t, key, violation, dead, trace.rounds_elapsed))
    return out


def _chunks(trials: int, workers: int) -> List[Tuple[int, int]]:
    size = max(1, math.ceil(trials / (workers * 4)))
    return [(a, min(trials, a + size)) for a in range(0, trials, size)]


def run_trials(config: ExperimentConfig, settings: Optional[Settings] = None) -> Report:
    """Run every (n, trial) of ``config``; identical configs give identical reports."""
    cutoff = config.effective_cutoff(settings)
    report = Report(config)
    pool = ProcessPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
    try:
        for cell, n in enumerate(config.n_values):
            t0 = time.perf_counter()
            if pool is None:
                results = _run_chunk(config, cell, n, 0, config.trials, cutoff)
            else:
                futures = [pool.submit(_run_chunk, config, cell, n, a, b, cutoff)
                           for a, b in _chunks(config.trials, config.workers)]
                results = [r for f in as_completed(futures) for r in f.result()]
            results.sort()
            histogram = Counter(r[1] for r in results)
            result = CellResult(
                protocol=config.protocol, n=n, epsilon=config.epsilon, q=config.q,
                n_lower_bound=config.n_lower_bound, trials=config.trials,
                histogram=dict(sorted(histogram.items())),
                violations=sum(1 for r in results if r[2]),
                liveness_failures=sum(1 for r in results if r[3]),
                rounds=[r[4] for r in results], seed=config.seed,
                wall_time=time.perf_counter() - t0,
            )
            if result.liveness_failures:
                logger.warning("%s n=%d: %d trial(s) hit the cutoff of %d rounds",
                               config.protocol, n, result.liveness_failures, cutoff)
            logger.info("%s/%s n=%d: %d trials, %d violations, %.2fs",
                        config.task, config.protocol, n, config.trials,
                        result.violations, result.wall_time)
            report.cells.append(result)
    finally:
        if pool is not None:
            pool.shutdown()
    return report


def report_frame(report: Report) -> pd.DataFrame:
    return pd.DataFrame([cell.row() for cell in report.cells], columns=REPORT_COLUMNS)


def summarize(report: Report) -> Tuple[str, str]:
    """(human-readable table, CSV text) for a report."""
    frame = report_frame(report)
    csv_text = frame.to_csv(index=False, lineterminator="\n")
    lines = [f"{'protocol':<15}{'n':>6}{'trials':>8}{'viol':>7}{'rate':>9}  "
             f"{'wilson95':<19}{'p50':>7}{'p95':>7}{'p99':>7}{'max':>8}{'dead':>6}"
             f"{'secs':>9}  histogram"]
    for cell in report.cells:
        lo, hi = cell.wilson
        p50, p95, p99, pmax = cell.quantiles
        lines.append(f"{cell.protocol:<15}{cell.n:>6}{cell.trials:>8}{cell.violations:>7}"
                     f"{cell.violation_rate:>9.4f}  [{lo:.4f}, {hi:.4f}]  "
                     f"{p50:>7}{p95:>7}{p99:>7}{pmax:>8}{cell.liveness_failures:>6}"
                     f"{cell.wall_time:>9.3f}  {format_histogram(cell.histogram)}")
    return "\n".join(lines) + "\n", csv_text


# ──────────────────────────────────────────────────────────────────────────────
# Counter-machine experiments
# ──────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class CounterExperiment:
    program: CounterProgram
    cells: Tuple[Tuple[int, Tuple[str, ...]], ...]     # (n, ("c1=all", ...))
    epsilon: Fraction = Fraction(1, 20)
    q: int = 2
    count_bound: int = DEFAULT_COUNT_BOUND
    trials: int = 200
    seed: int = 0
    cutoff: Optional[int] = None
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "epsilon", parse_rational(self.epsilon))
        object.__setattr__(self, "cells", tuple((int(n), tuple(init)) for n, init in self.cells))
        if self.trials < 1 or self.workers < 1:
            raise ArgumentError("trials and workers must be >= 1")
        self.params
        for n, init in self.cells:
            resolve_counter_init(self.program, list(init), n)

    @property
    def params(self) -> ElectionParams:
        return ElectionParams(self.epsilon, self.q)


@dataclass
class CounterCell:
    program: str
    n: int
    init: Tuple[str, ...]
    epsilon: Fraction
    trials: int
    oracle: str
    matches: int
    mismatches: int
    timeouts: int
    failed_elections: int
    inconsistent: int           # clean-election traces whose audit still failed
    rounds: List[int]
    seed: int

    @property
    def match_rate(self) -> float:
        return self.matches / self.trials

    def row(self) -> Dict[str, Any]:
        p50, p95, p99, pmax = round_quantiles(self.rounds)
        return {
            "program": self.program, "n": self.n, "init": ";".join(self.init),
            "epsilon": format_rational(self.epsilon), "trials": self.trials,
            "matches": self.matches, "mismatches": self.mismatches, "timeouts": self.timeouts,
            "failed_elections": self.failed_elections, "rounds_p50": p50, "rounds_p95": p95,
            "rounds_p99": p99, "rounds_max": pmax, "seed": self.seed,
        }


def _run_counter_chunk(exp: CounterExperiment, cell: int, start: int, stop: int,
                       cutoff: int) -> List[Tuple[int, str, bool, bool, int]]:
    n, init = exp.cells[cell]
    values = resolve_counter_init(exp.program, list(init), n)
    spec = build_counter_network(exp.program, exp.params, list(init), n, exp.count_bound)
    out = []
    for t in range(start, stop):
        run = run_counter_simulation(spec, derive_seed(exp.seed, cell, t), cutoff)
        audit = audit_counter_trace(run.trace, exp.program, values)
        out.append((t, run.decision, audit.failed_elections > 0, audit.ok, run.rounds))
    return out


def run_counter_trials(exp: CounterExperiment, settings: Optional[Settings] = None) -> List[CounterCell]:
    cutoff = exp.cutoff or (settings.round_cutoff if settings else DEFAULT_ROUND_CUTOFF)
    cells: List[CounterCell] = []
    pool = ProcessPoolExecutor(max_workers=exp.workers) if exp.workers > 1 else None
    try:
        for index, (n, init) in enumerate(exp.cells):
            values = resolve_counter_init(exp.program, list(init), n)
            oracle = interpret_counter_program(exp.program, values, cap=n).decision
            if pool is None:
                results = _run_counter_chunk(exp, index, 0, exp.trials, cutoff)
            else:
                futures = [pool.submit(_run_counter_chunk, exp, index, a, b, cutoff)
                           for a, b in _chunks(exp.trials, exp.workers)]
                results = sorted(r for f in as_completed(futures) for r in f.result())
            matches = sum(1 for r in results if r[1] == oracle)
            timeouts = sum(1 for r in results if r[1] == "timeout")
            cells.append(CounterCell(
                program=exp.program.name, n=n, init=init, epsilon=exp.epsilon,
                trials=exp.trials, oracle=oracle, matches=matches,
                mismatches=exp.trials - matches - timeouts, timeouts=timeouts,
                failed_elections=sum(1 for r in results if r[2]),
                inconsistent=sum(1 for r in results if not r[2] and not r[3]),
                rounds=[r[4] for r in results], seed=exp.seed,
            ))
            logger.info("counter %s n=%d init=%s: %d/%d match oracle %s",
                        exp.program.name, n, ";".join(init), matches, exp.trials, oracle)
    finally:
        if pool is not None:
            pool.shutdown()
    return cells


def summarize_counter(cells: Sequence[CounterCell]) -> Tuple[str, str]:
    frame = pd.DataFrame([c.row() for c in cells], columns=COUNTER_COLUMNS)
    lines = [f"{'program':<12}{'n':>5}  {'init':<16}{'oracle':>8}{'match':>8}{'miss':>6}"
             f"{'t/o':>6}{'bad-el':>8}{'p50':>8}{'max':>8}"]
    for c in cells:
        p50, _, _, pmax = round_quantiles(c.rounds)
        lines.append(f"{c.program:<12}{c.n:>5}  {';'.join(c.init):<16}{c.oracle:>8}{c.matches:>8}"
                     f"{c.mismatches:>6}{c.timeouts:>6}{c.failed_elections:>8}{p50:>8}{pmax:>8}")
    return "\n".join(lines) + "\n", frame.to_csv(index=False, lineterminator="\n")


__all__ = [
    "WILSON_Z", "REPORT_COLUMNS", "COUNTER_COLUMNS", "splitmix64", "derive_seed",
    "format_histogram", "wilson_interval", "round_quantiles", "fit_log_slope", "ExperimentConfig", "CellResult",
    "Report", "run_trials", "report_frame", "summarize", "CounterExperiment", "CounterCell",
    "run_counter_trials", "summarize_counter",
]
