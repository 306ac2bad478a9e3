# tests/test_election.py — beeplab
# ══════════════════════════════════════════════════════════════
# Unit tests: beeping/election.py (subroutines, universal election,
# loneliness wrapper, trace checks)
# ══════════════════════════════════════════════════════════════
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beeping.analysis import absorb_exact
from beeping.election import (AGREEMENT, FAST, SAFETY, ConstantState, DoubleSafe,
                              ElectionParams, FixedError, LonelinessProgram, StateOptimal,
                              SubroutineProgram, UniversalElection, active_counts, active_series,
                              build_election, build_universal, call_boundaries,
                              check_agreement, check_election_outcome, invocation_bound,
                              invoke_subroutine, make_subroutine, state_lower_bound,
                              state_optimal_rounds)
from beeping.engine import NetworkSpec, run_execution
from beeping.errors import ArgumentError
from beeping.machine import MachineProgram, extract_machine

FAST_SUBROUTINES = ("fixed-error", "constant-state", "double-safe")


# ══════════════════════════════════════════════════════════════
# Parameters
# ══════════════════════════════════════════════════════════════
@pytest.mark.unit
class TestElectionParams:

    @pytest.mark.parametrize("eps", ["0", "3/4", "1", "-1/10"])
    def test_epsilon_range(self, eps):
        with pytest.raises(ArgumentError):
            ElectionParams.parse(eps)

    def test_q_and_lower_bound(self):
        with pytest.raises(ArgumentError):
            ElectionParams(Fraction(1, 10), q=1)
        with pytest.raises(ArgumentError):
            ElectionParams(Fraction(1, 10), n_lower_bound=0)

    def test_parse_strings(self):
        p = ElectionParams.parse("0.1", "3", "2")
        assert p.epsilon == Fraction(1, 10) and p.q == 3 and p.n_lower_bound == 2

    @pytest.mark.parametrize("eps,q,q_hat", [
        (Fraction(1, 10), 2, 2), (Fraction(1, 10), 64, 10), (Fraction(1, 3), 8, 3),
        (Fraction(2, 7), 8, 4),
    ])
    def test_q_hat(self, eps, q, q_hat):
        assert ElectionParams(eps, q).q_hat == q_hat

    @pytest.mark.parametrize("n_lower,delta", [(1, 40), (2, 20), (4, 10), (8, 5)])
    def test_state_optimal_rounds(self, n_lower, delta):
        params = ElectionParams(Fraction(1, 256), 2, n_lower)
        assert state_optimal_rounds(params, c=5) == delta

    def test_state_optimal_rounds_at_least_one(self):
        assert state_optimal_rounds(ElectionParams(Fraction(1, 2), 2, 50), c=1) == 1

    def test_bounds(self):
        assert state_lower_bound("1/8", 2) == pytest.approx(3.0)
        assert state_lower_bound("1/8", 2, 3) == pytest.approx(1.0)
        assert invocation_bound(ElectionParams(Fraction(1, 16)), 4) == pytest.approx(16.0)


# ══════════════════════════════════════════════════════════════
# Subroutines
# ══════════════════════════════════════════════════════════════
@pytest.mark.unit
class TestFixedError:

    @pytest.mark.parametrize("eps,middle", [
        (Fraction(1, 2), 2), (Fraction(1, 4), 3), (Fraction(1, 10), 5), (Fraction(1, 20), 6),
    ])
    def test_schedule_length(self, eps, middle):
        sub = FixedError(ElectionParams(eps))
        assert sub.middle_rounds == middle
        assert sub.length == middle + 2

    def test_no_ko_returns_false_after_one_round(self, params):
        inv = invoke_subroutine(FixedError(params), [(True, False), (True, False)], seed=1)
        assert inv.values == [False, False]
        assert inv.rounds == 1

    def test_lone_active_accepts_in_full_length(self, params):
        sub = FixedError(params)
        inv = invoke_subroutine(sub, [(True, True), (False, True), (False, False)], seed=2)
        assert inv.value is True
        assert inv.rounds == sub.length

    def test_properties(self, params):
        assert {AGREEMENT, SAFETY, FAST} <= FixedError(params).properties
        assert FAST not in StateOptimal(params).properties


@pytest.mark.unit
class TestConstantState:

    def test_count_bound_validated(self):
        with pytest.raises(ArgumentError):
            ConstantState(0)

    def test_no_ko_returns_false(self):
        inv = invoke_subroutine(ConstantState(), [(True, False)] * 3, seed=0)
        assert inv.values == [False] * 3
        assert inv.rounds == 1

    @pytest.mark.parametrize("seed", range(5))
    def test_lone_active_accepts(self, seed):
        args = [(True, False), (False, True), (False, True), (False, False)]
        inv = invoke_subroutine(ConstantState(4), args, seed=seed)
        assert inv.value is True

    @pytest.mark.parametrize("n,trials", [
        (64, 10), (256, 5), pytest.param(1024, 3, marks=pytest.mark.slow),
    ])
    def test_body_length_is_logarithmic(self, n, trials):
        # each count step waits for an even round in which every attacker listens
        sub = ConstantState(8)
        log_n = math.log2(n)
        for seed in range(trials):
            inv = invoke_subroutine(sub, [(True, True)] * n, seed=seed)
            body = inv.rounds - 2
            assert sub.count_bound * log_n <= body <= 4 * sub.count_bound * (log_n + 2)


@pytest.mark.unit
class TestDoubleSafe:

    @pytest.mark.parametrize("seed", range(5))
    def test_lone_active_accepts(self, params, seed):
        inv = invoke_subroutine(DoubleSafe(params, 4), [(False, True), (True, False)], seed=seed)
        assert inv.value is True

    def test_runs_both_parts(self, params):
        sub = DoubleSafe(params, 2)
        inv = invoke_subroutine(sub, [(True, True)], seed=0)
        assert inv.value is True
        assert inv.rounds > sub.fixed.length

    def test_describe(self, params):
        info = DoubleSafe(params).describe()
        assert info["fixed_error_rounds"] == 7
        assert info["count_bound"] == 8

    def test_error_is_product_of_parts(self):
        # two active nodes accepting together is the safety failure
        params = ElectionParams(Fraction(1, 4))
        tail = Fraction(1, 2 ** 20)

        def run(sub):
            machine = extract_machine(SubroutineProgram(sub, True, True))
            return absorb_exact(machine, 2, tail_bound=tail)

        fe, cs, ds = run(FixedError(params)), run(ConstantState(2)), run(DoubleSafe(params, 2))
        p_fe, p_cs, p_ds = (r.probability(accept=2) for r in (fe, cs, ds))
        assert fe.residual == 0 and 0 < p_fe <= params.epsilon
        assert p_fe * p_cs - ds.residual <= p_ds <= p_fe * (p_cs + cs.residual)
        assert p_ds <= min(p_fe, p_cs + cs.residual)


@pytest.mark.unit
class TestStateOptimal:

    def test_randomized_entry_uses_boot_round(self, params):
        program = SubroutineProgram(StateOptimal(params), True, True)
        assert program.boot_rounds == 1
        assert SubroutineProgram(FixedError(params), True, True).boot_rounds == 0

    def test_fixed_length(self):
        sub = StateOptimal(ElectionParams(Fraction(1, 2)), c=3)
        inv = invoke_subroutine(sub, [(True, False)] * 2, seed=5)
        assert inv.rounds == sub.delta == 3
        assert inv.agreed

    def test_two_round_schedule_exact(self):
        sub = StateOptimal(ElectionParams(Fraction(1, 4), 2), c=1)
        assert sub.delta == 2
        report = absorb_exact(extract_machine(SubroutineProgram(sub, True, False)), 3)
        assert report.probability(accept=3) == Fraction(1, 2) ** 6
        assert report.probability(reject=3) == 1 - Fraction(1, 64)


@pytest.mark.unit
class TestAgreement:

    @settings(max_examples=25, deadline=None)
    @given(
        name=st.sampled_from(FAST_SUBROUTINES),
        args=st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=5),
        seed=st.integers(min_value=0, max_value=2 ** 32),
    )
    def test_every_node_returns_the_same_bit(self, name, args, seed):
        sub = make_subroutine(name, ElectionParams(Fraction(1, 4)), count_bound=3)
        assert invoke_subroutine(sub, args, seed).agreed

    @settings(max_examples=25, deadline=None)
    @given(
        name=st.sampled_from(("fixed-error", "double-safe")),
        others=st.lists(st.booleans(), min_size=0, max_size=4),
        seed=st.integers(min_value=0, max_value=2 ** 32),
    )
    def test_one_active_with_ko_always_accepts(self, name, others, seed):
        sub = make_subroutine(name, ElectionParams(Fraction(1, 4)), count_bound=3)
        args = [(True, True)] + [(False, ko) for ko in others]
        assert invoke_subroutine(sub, args, seed).value is True

    def test_unknown_subroutine(self, params):
        with pytest.raises(ArgumentError):
            make_subroutine("psychic", params)

    def test_election_requires_agreement(self, params):
        class Sloppy(FixedError):
            properties = frozenset({SAFETY})
        with pytest.raises(ArgumentError):
            UniversalElection(Sloppy(params), params)


# ══════════════════════════════════════════════════════════════
# Universal election
# ══════════════════════════════════════════════════════════════
@pytest.mark.unit
class TestUniversalElection:

    @pytest.mark.parametrize("name", FAST_SUBROUTINES)
    def test_single_node_is_leader(self, params, name):
        trace = run_execution(NetworkSpec(1, build_election(name, params, count_bound=3)), seed=0)
        outcome = check_election_outcome(trace)
        assert outcome.leader_count == 1 and outcome.liveness_ok

    @pytest.mark.parametrize("seed", range(8))
    def test_small_network_agrees(self, params, seed):
        program = build_election("double-safe", params, count_bound=4)
        trace = run_execution(NetworkSpec(5, program), seed=seed)
        assert trace.terminated
        assert check_agreement(trace) == []
        assert trace.label_count("leader") + trace.label_count("follower") == 5

    def test_first_call_has_everyone_active(self, fe_program):
        trace = run_execution(NetworkSpec(4, fe_program), seed=3)
        time, active, any_ko = active_counts(trace)[0]
        assert (time, active, any_ko) == (0, 4, True)

    def test_active_series_never_grows(self, fe_program):
        trace = run_execution(NetworkSpec(6, fe_program), seed=9)
        series = active_series(trace)
        assert series[0] == 6
        assert all(a >= b for a, b in zip(series, series[1:]))
        assert series[-1] >= 1

    def test_knockouts_shrink_active_set_between_calls(self, fe_program):
        for seed in range(10):
            calls = active_counts(run_execution(NetworkSpec(8, fe_program), seed=seed))
            for (_, before, _), (_, after, any_ko) in zip(calls, calls[1:]):
                if any_ko:
                    assert after < before
                else:
                    assert after == before

    def test_leader_never_knocked_in_loop(self):
        program = build_election("fixed-error", ElectionParams(Fraction(1, 4)))
        for seed in range(200):
            trace = run_execution(NetworkSpec(2, program), seed=seed)
            assert trace.terminated
            if trace.label_count("leader") != 1:
                continue
            leader = trace.final_labels.index("leader")
            in_call = {t for begin, end in call_boundaries(trace)
                       for t in range(begin, trace.rounds_elapsed if end is None else end)}
            for t in range(trace.rounds_elapsed):
                if t not in in_call and trace.channel(t):
                    assert trace.actions[t][leader] == 1

    def test_program_names(self, params):
        assert build_election("fixed-error", params).name == "universal+fixed-error"

    @pytest.mark.parametrize("name,cls", [
        ("state-optimal", StateOptimal), ("fixed-error", FixedError),
        ("constant-state", ConstantState), ("double-safe", DoubleSafe),
    ])
    def test_factories(self, params, name, cls):
        sub = make_subroutine(name, params)
        assert isinstance(sub, cls)
        assert build_universal(sub, params).name == f"universal+{name}"

    def test_outcome_needs_election_trace(self, coin_machine):
        trace = run_execution(NetworkSpec(1, MachineProgram(coin_machine)), seed=0)
        check_election_outcome(trace)
        lonely = run_execution(NetworkSpec(1, LonelinessProgram(build_election(
            "fixed-error", ElectionParams(Fraction(1, 4))))), seed=0)
        with pytest.raises(ArgumentError):
            check_election_outcome(lonely)


# ══════════════════════════════════════════════════════════════
# Loneliness
# ══════════════════════════════════════════════════════════════
@pytest.mark.unit
class TestLoneliness:

    def test_single_node_is_alone(self, fe_program):
        trace = run_execution(NetworkSpec(1, LonelinessProgram(fe_program)), seed=0)
        assert trace.final_labels == ["alone"]
        # 7 election rounds each followed by an announce round, then the check
        assert trace.rounds_elapsed == 15

    @pytest.mark.parametrize("n", [2, 3, 6])
    def test_crowd_detected(self, params, n):
        program = LonelinessProgram(build_election("double-safe", params, count_bound=4))
        trace = run_execution(NetworkSpec(n, program), seed=n)
        assert trace.final_labels == ["crowd"] * n

    def test_base_needs_leader_label(self):
        invoke = SubroutineProgram(FixedError(ElectionParams(Fraction(1, 4))), True, True)
        with pytest.raises(ArgumentError):
            LonelinessProgram(invoke)
