# beeping/cli.py — beeplab
# ============================================================
# Command-line surface: elect | lonely | counter | analyze |
# audit | trace | validate.
# Value precedence: flags > --config JSON > --preset > defaults.
# Exit codes: 0 ok, 2 bad arguments, 3 overflow, 4 I/O failure.
# ============================================================
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from beeping import __version__
from beeping.analysis import DEFAULT_HORIZON, DEFAULT_TAIL_BOUND, absorb_exact, report_to_json
from beeping.config import Settings, configure_logging, load_settings
from beeping.counterdist import (SHIPPED_PROGRAMS, CounterProgram, load_counter_program,
                                 shipped_program)
from beeping.election import (SUBROUTINE_NAMES, ElectionParams, build_election,
                              loneliness_from_leader_election, state_lower_bound)
from beeping.engine import NetworkSpec, run_execution, trace_summary_csv, trace_to_jsonl
from beeping.errors import ArgumentError, BeepLabError
from beeping.harness import (CounterExperiment, ExperimentConfig, run_counter_trials,
                             run_trials, summarize, summarize_counter)
from beeping.machine import (audit_state_count, describe_machine, extract_machine,
                             machine_from_json, machine_to_json, validate_precision)
from beeping.units import format_rational, parse_int_list, parse_rational
from logic.presets import COUNTER_DEFAULTS, PROTOCOL_DEFAULTS, get_preset, get_preset_groups

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_ARGS, EXIT_OVERFLOW, EXIT_IO = 0, 2, 3, 4


# ──────────────────────────────────────────────────────────────────────────────
# Option merging
# ──────────────────────────────────────────────────────────────────────────────

def _read_config(path: Optional[str]) -> Dict[str, Any]:
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ArgumentError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ArgumentError(f"{path}: expected a JSON object")
    return {str(k).replace("-", "_"): v for k, v in data.items()}


def _merged(args: argparse.Namespace, defaults: Dict[str, Any] = PROTOCOL_DEFAULTS,
            skip=("command", "config", "preset", "func")) -> Dict[str, Any]:
    values: Dict[str, Any] = dict(defaults)
    preset = getattr(args, "preset", None)
    if preset:
        values.update(get_preset(preset))
    values.update(_read_config(getattr(args, "config", None)))
    for key, value in vars(args).items():
        if key not in skip and value is not None:
            values[key] = value
    for alias in ("algo", "base_algo"):
        if values.get(alias) is not None:
            values["protocol"] = values.pop(alias)
    return values


def _params(values: Dict[str, Any]) -> ElectionParams:
    return ElectionParams.parse(values.get("epsilon"), int(values.get("q", 2)),
                                int(values.get("n_lower_bound", 1)))


def _program(values: Dict[str, Any], lonely: bool = False):
    protocol = values.get("protocol") or "fixed-error"
    program = build_election(protocol, _params(values), int(values.get("c", 5)),
                             int(values.get("count_bound", 8)))
    return loneliness_from_leader_election(program) if lonely else program


def _single_n(values: Dict[str, Any]) -> int:
    ns = parse_int_list(values.get("n", 1))
    if len(ns) != 1:
        raise ArgumentError("this command takes a single --n")
    return ns[0]


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
        logger.info("wrote %s", out)
    else:
        sys.stdout.write(text)


# ──────────────────────────────────────────────────────────────────────────────
# Commands
# ──────────────────────────────────────────────────────────────────────────────

def _run_experiment(args, settings: Settings, task: str) -> int:
    values = _merged(args)
    values["task"] = task
    values.setdefault("workers", settings.workers)
    config = ExperimentConfig.from_mapping(values)
    report = run_trials(config, settings)
    text, csv_text = summarize(report)
    sys.stdout.write(text)
    if values.get("out"):
        _emit(csv_text, values["out"])
    return EXIT_OK


def cmd_elect(args, settings: Settings) -> int:
    return _run_experiment(args, settings, "elect")


def cmd_lonely(args, settings: Settings) -> int:
    return _run_experiment(args, settings, "lonely")


def _load_program(ref: str) -> CounterProgram:
    stem = ref[:-3] if ref.endswith(".cm") else ref
    if stem in SHIPPED_PROGRAMS and not Path(ref).exists():
        return shipped_program(stem)
    return load_counter_program(ref)


def cmd_counter(args, settings: Settings) -> int:
    values = _merged(args, COUNTER_DEFAULTS)
    if not values.get("program"):
        raise ArgumentError("--program is required")
    prog = _load_program(str(values["program"]))
    init = list(values.get("init") or [])
    ns = parse_int_list(values.get("n", 1))
    if values.get("grid"):
        grid = parse_int_list(values["grid"], lo=0)
        cells = tuple((n, (f"c1={a}", f"c2={b}")) for n in ns for a in grid for b in grid)
    else:
        cells = tuple((n, tuple(init)) for n in ns)
    exp = CounterExperiment(
        program=prog, cells=cells,
        epsilon=parse_rational(values["epsilon"]),
        q=int(values.get("q", 2)), count_bound=int(values.get("count_bound", 8)),
        trials=int(values.get("trials", 200)), seed=int(values.get("seed", 0)),
        cutoff=int(values["cutoff"]) if values.get("cutoff") else None,
        workers=int(values.get("workers", settings.workers)),
    )
    text, csv_text = summarize_counter(run_counter_trials(exp, settings))
    sys.stdout.write(text)
    if values.get("out"):
        _emit(csv_text, values["out"])
    return EXIT_OK


def cmd_analyze(args, settings: Settings) -> int:
    values = _merged(args)
    program = _program(values, lonely=values.get("task") == "lonely")
    machine = extract_machine(program, settings.state_cap)
    tail = parse_rational(values.get("tail_bound") or DEFAULT_TAIL_BOUND)
    report = absorb_exact(machine, _single_n(values), int(values.get("horizon") or DEFAULT_HORIZON),
                          tail, settings.config_cap)
    doc = {"protocol": program.name, "machine": describe_machine(machine), **report_to_json(report)}
    _emit(json.dumps(doc, indent=2) + "\n", values.get("out"))
    if values.get("out"):
        print(f"{program.name} n={report.n}: violation {float(report.violation):.6g}, "
              f"residual {float(report.residual):.3g} after {report.steps} steps")
    return EXIT_OK


def cmd_audit(args, settings: Settings) -> int:
    values = _merged(args)
    program = _program(values, lonely=values.get("task") == "lonely")
    if values.get("out"):
        machine = extract_machine(program, settings.state_cap)
        _emit(json.dumps(machine_to_json(machine), indent=2) + "\n", values["out"])
        count = machine.size
    else:
        count = audit_state_count(program, settings.state_cap)
    params = _params(values)
    bound = state_lower_bound(params.epsilon, params.q, params.n_lower_bound)
    print(f"{program.name}: s = {count} (lower bound log_q(1/eps)/N = {bound:.3f}, "
          f"eps={format_rational(params.epsilon)}, q={params.q}, N={params.n_lower_bound})")
    return EXIT_OK


def cmd_trace(args, settings: Settings) -> int:
    values = _merged(args)
    program = _program(values, lonely=values.get("task") == "lonely")
    n = _single_n(values)
    cutoff = values.get("cutoff") or (settings.slow_cutoff if values.get("protocol") == "state-optimal"
                                      else settings.round_cutoff)
    spec = NetworkSpec(n, program)
    seed = int(values.get("seed", 0))
    out = values.get("out")
    if out:
        with open(out, "w", encoding="utf-8") as fp:
            trace = run_execution(spec, seed, int(cutoff), settings.action_window, stream_to=fp)
    else:
        trace = run_execution(spec, seed, int(cutoff), settings.action_window)
        sys.stdout.write(trace_to_jsonl(trace))
    if values.get("csv"):
        trace_summary_csv(trace, values["csv"])
    logger.info("trace %s n=%d seed=%d: %d rounds, labels %s", program.name, n, seed,
                trace.rounds_elapsed, sorted({label for label in trace.final_labels if label}))
    return EXIT_OK


def cmd_validate(args, settings: Settings) -> int:
    try:
        doc = json.loads(Path(args.machine).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ArgumentError(f"{args.machine}: not valid JSON ({exc})") from None
    machine = machine_from_json(doc)
    violations = validate_precision(machine, int(args.q))
    for v in violations:
        print(f"state {v.state} ({v.channel}) -> {v.target}: probability "
              f"{format_rational(v.probability)} is outside [1/{args.q}, 1-1/{args.q}]")
    print(f"{machine.size} states, {len(violations)} precision violation(s)")
    return EXIT_OK


def cmd_presets(args, settings: Settings) -> int:
    for group, items in get_preset_groups().items():
        print(group)
        for key, label in items:
            print(f"  {key:<18}{label}")
    return EXIT_OK


# ──────────────────────────────────────────────────────────────────────────────
# Parser
# ──────────────────────────────────────────────────────────────────────────────

def _protocol_options(p: argparse.ArgumentParser, dest: str = "algo") -> None:
    flag = "--algo" if dest == "algo" else "--base-algo"
    p.add_argument(flag, dest=dest, choices=SUBROUTINE_NAMES, default=None)
    p.add_argument("--epsilon", default=None, help="rational, e.g. 1/10 or 2^-8")
    p.add_argument("--q", type=int, default=None)
    p.add_argument("--n-lower-bound", type=int, default=None)
    p.add_argument("--c", type=int, default=None, help="state-optimal repetition constant")
    p.add_argument("--count-bound", type=int, default=None, help="constant-state knockout count")
    p.add_argument("--config", default=None, help="JSON file with option values")


def _trial_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", default=None, help="node counts: 8 or 1,2,4 or 2..33")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--cutoff", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None, help="CSV output path (stdout when omitted)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="beeplab", description="Beeping-network leader election lab")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("elect", help="Monte Carlo leader election")
    _protocol_options(p)
    _trial_options(p)
    p.add_argument("--preset", default=None)
    p.set_defaults(func=cmd_elect)

    p = sub.add_parser("lonely", help="Monte Carlo loneliness detection")
    _protocol_options(p, dest="base_algo")
    _trial_options(p)
    p.add_argument("--preset", default=None)
    p.set_defaults(func=cmd_lonely)

    p = sub.add_parser("counter", help="distributed counter-machine runs")
    p.add_argument("--program", default=None, help=f"file.cm or one of {', '.join(SHIPPED_PROGRAMS)}")
    p.add_argument("--init", action="append", default=None, help="c<k>=<int|all>, repeatable")
    p.add_argument("--grid", default=None, help="c1 x c2 input grid, e.g. 1,2,3,5,8")
    p.add_argument("--epsilon", default=None)
    p.add_argument("--q", type=int, default=None)
    p.add_argument("--count-bound", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--preset", default=None)
    _trial_options(p)
    p.set_defaults(func=cmd_counter)

    p = sub.add_parser("analyze", help="exact absorption analysis")
    _protocol_options(p)
    p.add_argument("--task", choices=("elect", "lonely"), default=None)
    p.add_argument("--n", default=None)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--tail-bound", default=None)
    p.add_argument("--out", default=None, help="JSON output path")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("audit", help="count reachable local states")
    _protocol_options(p)
    p.add_argument("--task", choices=("elect", "lonely"), default=None)
    p.add_argument("--out", default=None, help="also write the extracted machine as JSON")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("trace", help="export one execution as JSON lines")
    _protocol_options(p)
    p.add_argument("--task", choices=("elect", "lonely"), default=None)
    p.add_argument("--n", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--cutoff", type=int, default=None)
    p.add_argument("--out", default=None, help="JSONL output path")
    p.add_argument("--csv", default=None, help="per-round summary CSV path")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("validate", help="check a machine JSON against precision q")
    p.add_argument("--machine", required=True)
    p.add_argument("--q", type=int, required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("presets", help="list named presets")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = load_settings()
    configure_logging(settings)
    try:
        return args.func(args, settings)
    except BeepLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        sys.exit(130)
