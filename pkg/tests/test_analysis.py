# tests/test_analysis.py — beeplab
# ══════════════════════════════════════════════════════════════
# Unit tests: beeping/analysis.py (exact configuration analysis)
# ══════════════════════════════════════════════════════════════
import math
from fractions import Fraction

import pytest

from beeping.analysis import (ConfigurationDistribution, absorb_exact, configuration_space_size,
                              initial_distribution, report_to_json, step_exact)
from beeping.election import ElectionParams, StateOptimal, SubroutineProgram, build_election
from beeping.errors import ArgumentError, ConfigurationOverflowError
from beeping.harness import ExperimentConfig, run_trials
from beeping.machine import extract_machine

TAIL = Fraction(1, 1024)


# ══════════════════════════════════════════════════════════════
# One-step pushforward
# ══════════════════════════════════════════════════════════════
@pytest.mark.unit
class TestStepExact:

    def test_space_size(self):
        assert configuration_space_size(3, 2) == 4
        assert configuration_space_size(2, 5) == 15

    def test_initial(self, coin_machine):
        dist = initial_distribution(coin_machine, 3)
        assert dist.mass == {((0, 3),): 1}

    def test_initial_needs_a_node(self, coin_machine):
        with pytest.raises(ArgumentError):
            initial_distribution(coin_machine, 0)

    def test_binomial_split(self, coin_machine):
        nxt = step_exact(coin_machine, initial_distribution(coin_machine, 2))
        assert nxt.mass == {
            ((1, 2),): Fraction(1, 4),
            ((1, 1), (2, 1)): Fraction(1, 2),
            ((2, 2),): Fraction(1, 4),
        }
        assert nxt.total() == 1

    def test_channel_is_shared(self, coin_machine):
        mixed = ConfigurationDistribution(2, {((1, 1), (2, 1)): Fraction(1)})
        assert step_exact(coin_machine, mixed).mass == {((3, 1), (4, 1)): Fraction(1)}

    def test_overflow(self, coin_machine):
        with pytest.raises(ConfigurationOverflowError) as info:
            step_exact(coin_machine, initial_distribution(coin_machine, 2), cap=1)
        assert info.value.attempted == 15


# ══════════════════════════════════════════════════════════════
# Absorption
# ══════════════════════════════════════════════════════════════
@pytest.mark.unit
class TestAbsorbExact:

    def test_single_node_coin(self, coin_machine):
        report = absorb_exact(coin_machine, 1, tail_bound=TAIL)
        assert report.steps == 20
        assert report.probability(leader=1) == Fraction(1023, 1024)
        assert report.violation == 0
        assert report.residual == TAIL
        assert report.total() == 1
        assert not report.truncated

    def test_two_node_coin(self, coin_machine):
        report = absorb_exact(coin_machine, 2, tail_bound=TAIL)
        assert report.steps == 10
        assert report.violation == Fraction(341, 1024)
        assert report.probability(leader=1, follower=1) == Fraction(341, 512)
        assert report.total() == 1

    def test_horizon_truncates(self, coin_machine):
        report = absorb_exact(coin_machine, 1, horizon=4, tail_bound=TAIL)
        assert report.truncated
        assert report.steps == 4
        assert report.residual == Fraction(1, 4)

    def test_residual_history_is_monotone(self, coin_machine):
        report = absorb_exact(coin_machine, 2, tail_bound=TAIL)
        history = report.residual_history
        assert all(a >= b for a, b in zip(history, history[1:]))

    def test_fixed_error_single_node(self, fe_program):
        machine = extract_machine(fe_program)
        report = absorb_exact(machine, 1)
        assert report.probability(leader=1) == 1
        assert report.steps == 7
        assert report.residual == 0

    @pytest.mark.parametrize("eps,q,expected", [
        (Fraction(1, 2), 2, Fraction(1, 8)),
        (Fraction(1, 4), 4, Fraction(1, 64)),
    ])
    def test_state_optimal_single_round(self, eps, q, expected):
        sub = StateOptimal(ElectionParams(eps, q), c=1)
        assert sub.delta == 1
        machine = extract_machine(SubroutineProgram(sub, True, False))
        report = absorb_exact(machine, 3)
        assert report.probability(accept=3) == expected
        assert report.probability(reject=3) == 1 - expected

    def test_json(self, coin_machine):
        doc = report_to_json(absorb_exact(coin_machine, 2, tail_bound=TAIL))
        assert doc["violation"]["exact"] == "341/1024"
        assert doc["tail_bound"] == "1/1024"
        assert {"labels": {"follower": 1, "leader": 1}, "exact": "341/512",
                "float": 341 / 512} in doc["profiles"]

    def test_negative_horizon(self, coin_machine):
        with pytest.raises(ArgumentError):
            absorb_exact(coin_machine, 1, horizon=-1)


# ══════════════════════════════════════════════════════════════
# Anonymity: multisets vs ordered node pairs
# ══════════════════════════════════════════════════════════════
def _ordered_pairs_step(machine, dist):
    out = {}
    for (a, b), p in dist.items():
        heard = machine.is_beep(a) or machine.is_beep(b)
        for ta, pa in machine.delta(a, heard):
            for tb, pb in machine.delta(b, heard):
                out[(ta, tb)] = out.get((ta, tb), Fraction(0)) + p * pa * pb
    return out


def _as_multisets(pairs):
    out = {}
    for (a, b), p in pairs.items():
        key = ((a, 2),) if a == b else tuple(sorted(((a, 1), (b, 1))))
        out[key] = out.get(key, Fraction(0)) + p
    return out


@pytest.mark.unit
class TestAnonymity:

    @pytest.mark.parametrize("steps", [1, 2, 5, 8])
    def test_pair_enumeration_agrees(self, coin_machine, steps):
        start = coin_machine.start
        pairs = {(start, start): Fraction(1)}
        dist = initial_distribution(coin_machine, 2)
        for _ in range(steps):
            pairs = _ordered_pairs_step(coin_machine, pairs)
            dist = step_exact(coin_machine, dist)
        assert dist.mass == _as_multisets(pairs)
        assert dist.total() == 1


# ══════════════════════════════════════════════════════════════
# Exact vs Monte Carlo
# ══════════════════════════════════════════════════════════════
@pytest.mark.integration
class TestExactAgreesWithSimulation:

    def test_fixed_error_pair(self):
        params = ElectionParams(Fraction(1, 4))
        exact = absorb_exact(extract_machine(build_election("fixed-error", params)), 2)
        assert exact.violation <= params.epsilon
        assert not exact.truncated

        trials = 2000
        config = ExperimentConfig(protocol="fixed-error", epsilon=Fraction(1, 4),
                                  n_values=(2,), trials=trials, seed=4)
        cell = run_trials(config).cells[0]
        p = float(exact.violation)
        spread = 4 * math.sqrt(p * (1 - p) / trials) + 0.01
        assert abs(cell.violation_rate - p) <= spread
