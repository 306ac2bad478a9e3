# beeping/analysis.py — beeplab
"""
Exact forward analysis of a BeepMachine on n anonymous nodes.

A configuration is the multiset of states the nodes occupy, stored as a sorted
tuple of (state id, count). The channel bit of a configuration is fixed (⊤ iff
some node is in a beep state), so one round maps each configuration to a
product of independent multinomial splits, one per occupied state.

absorb_exact pushes mass forward until the transient part drops below a tail
bound, moving mass out as soon as it is decided: configurations with two or
more leaders count as safety violations, configurations where every node is in
a labeled final state count towards their label profile.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

from beeping.config import DEFAULT_CONFIG_CAP
from beeping.errors import ArgumentError, ConfigurationOverflowError
from beeping.machine import BeepMachine, Dist
from beeping.units import format_rational

logger = logging.getLogger(__name__)

Configuration = Tuple[Tuple[int, int], ...]
Profile = Tuple[Tuple[str, int], ...]

DEFAULT_HORIZON = 100_000
DEFAULT_TAIL_BOUND = Fraction(1, 10 ** 9)


@dataclass
class ConfigurationDistribution:
    n: int
    mass: Dict[Configuration, Fraction] = field(default_factory=dict)
    residual: Fraction = Fraction(0)

    def total(self) -> Fraction:
        return sum(self.mass.values(), Fraction(0)) + self.residual


def configuration_space_size(n: int, s: int) -> int:
    """C(n+s-1, s-1): multisets of size n over s states."""
    return math.comb(n + s - 1, s - 1)


def initial_distribution(machine: BeepMachine, n: int) -> ConfigurationDistribution:
    if n < 1:
        raise ArgumentError(f"n must be >= 1, got {n}")
    return ConfigurationDistribution(n, {((machine.start, n),): Fraction(1)})


def _splits(count: int, dist: Dist) -> List[Tuple[Tuple[Tuple[int, int], ...], Fraction]]:
    """All ways ``count`` nodes can spread over ``dist``'s targets, with multinomial weights."""
    targets = list(dist)

    def rec(i: int, left: int):
        target, p = targets[i]
        if i == len(targets) - 1:
            last = ((target, left),) if left else ()
            yield last, p ** left
            return
        for k in range(left + 1):
            weight = math.comb(left, k) * p ** k
            head = ((target, k),) if k else ()
            for tail, w in rec(i + 1, left - k):
                yield head + tail, weight * w

    return [(part, w) for part, w in rec(0, count) if w]


def _merge(a: Configuration, b: Tuple[Tuple[int, int], ...]) -> Configuration:
    counts = dict(a)
    for state, c in b:
        counts[state] = counts.get(state, 0) + c
    return tuple(sorted(counts.items()))


def step_exact(machine: BeepMachine, dist: ConfigurationDistribution,
               cap: int = DEFAULT_CONFIG_CAP) -> ConfigurationDistribution:
    """Exact one-round pushforward; the residual is carried over unchanged."""
    attempted = configuration_space_size(dist.n, machine.size)
    if attempted > cap:
        raise ConfigurationOverflowError(cap, attempted)
    cache: Dict[Tuple[int, bool, int], list] = {}
    out: Dict[Configuration, Fraction] = {}
    for config, p in dist.mass.items():
        heard = any(state in machine.beep_states for state, _ in config)
        partial: Dict[Configuration, Fraction] = {(): p}
        for state, count in config:
            key = (state, heard, count)
            splits = cache.get(key)
            if splits is None:
                splits = cache[key] = _splits(count, machine.delta(state, heard))
            grown: Dict[Configuration, Fraction] = {}
            for part, q in partial.items():
                for split, r in splits:
                    merged = _merge(part, split)
                    grown[merged] = grown.get(merged, Fraction(0)) + q * r
            partial = grown
        for config_next, q in partial.items():
            out[config_next] = out.get(config_next, Fraction(0)) + q
    return ConfigurationDistribution(dist.n, out, dist.residual)


@dataclass
class AbsorptionReport:
    n: int
    steps: int
    profiles: Dict[Profile, Fraction]
    violation: Fraction
    residual: Fraction
    truncated: bool
    tail_bound: Fraction
    horizon: int
    residual_history: List[Fraction] = field(default_factory=list)

    def total(self) -> Fraction:
        return sum(self.profiles.values(), Fraction(0)) + self.violation + self.residual

    def probability(self, **labels: int) -> Fraction:
        """P(final profile == labels), e.g. probability(leader=1, follower=1)."""
        wanted = tuple(sorted((k, v) for k, v in labels.items() if v))
        return self.profiles.get(wanted, Fraction(0))


def _profile(config: Configuration, labels: Dict[int, str]) -> Optional[Profile]:
    counts: Dict[str, int] = {}
    for state, c in config:
        label = labels.get(state)
        if label is None:
            return None
        counts[label] = counts.get(label, 0) + c
    return tuple(sorted(counts.items()))


def absorb_exact(machine: BeepMachine, n: int, horizon: int = DEFAULT_HORIZON,
                 tail_bound: Fraction = DEFAULT_TAIL_BOUND,
                 cap: int = DEFAULT_CONFIG_CAP) -> AbsorptionReport:
    """
    Iterate step_exact until the undecided mass is <= ``tail_bound`` or
    ``horizon`` steps ran; a report whose residual is still above the bound is
    flagged truncated.
    """
    if horizon < 0:
        raise ArgumentError(f"horizon must be >= 0, got {horizon}")
    tail_bound = Fraction(tail_bound)
    machine.check_structure()
    labels = {sid: label for label, sid in machine.finals.items()}
    leader = machine.finals.get("leader")

    dist = initial_distribution(machine, n)
    profiles: Dict[Profile, Fraction] = {}
    violation = Fraction(0)
    history: List[Fraction] = []
    steps = 0
    while True:
        transient: Dict[Configuration, Fraction] = {}
        for config, p in dist.mass.items():
            if leader is not None and dict(config).get(leader, 0) >= 2:
                violation += p
                continue
            profile = _profile(config, labels)
            if profile is not None:
                profiles[profile] = profiles.get(profile, Fraction(0)) + p
                continue
            transient[config] = p
        residual = sum(transient.values(), Fraction(0))
        history.append(residual)
        if residual <= tail_bound or steps >= horizon:
            break
        dist = step_exact(machine, ConfigurationDistribution(n, transient), cap)
        steps += 1
        if steps % 1000 == 0:
            logger.debug("absorb_exact n=%d: step %d, residual %.3g, %d configurations",
                         n, steps, float(residual), len(transient))

    truncated = residual > tail_bound
    if truncated:
        logger.warning("absorb_exact n=%d truncated at horizon %d with residual %.3g",
                       n, horizon, float(residual))
    return AbsorptionReport(n, steps, profiles, violation, residual, truncated,
                            tail_bound, horizon, history)


def _exact(value: Fraction) -> Dict[str, Any]:
    return {"exact": format_rational(value), "float": float(value)}


def report_to_json(report: AbsorptionReport) -> Dict[str, Any]:
    return {
        "n": report.n,
        "steps": report.steps,
        "horizon": report.horizon,
        "tail_bound": format_rational(report.tail_bound),
        "truncated": report.truncated,
        "violation": _exact(report.violation),
        "residual": _exact(report.residual),
        "profiles": [
            {"labels": dict(profile), **_exact(p)}
            for profile, p in sorted(report.profiles.items())
        ],
    }


__all__ = [
    "Configuration", "ConfigurationDistribution", "configuration_space_size",
    "initial_distribution", "step_exact", "AbsorptionReport", "absorb_exact",
    "report_to_json", "DEFAULT_HORIZON", "DEFAULT_TAIL_BOUND",
]
