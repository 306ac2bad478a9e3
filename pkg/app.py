# app.py — beeplab JSON API
# ============================================================
# Thin HTTP surface over the beeping package: Monte Carlo
# election / loneliness / counter runs, state audits and exact
# analysis. JSON in, JSON out. Heavy work stays in beeping/*.
# ============================================================

# ── Load .env for local dev (when python-dotenv is installed) ─────────────
try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    pass

import logging
import os

from flask import Flask, abort, jsonify, request, send_from_directory
from werkzeug.exceptions import HTTPException
from werkzeug.middleware.proxy_fix import ProxyFix

from beeping import __version__
from beeping.analysis import DEFAULT_HORIZON, DEFAULT_TAIL_BOUND, absorb_exact, report_to_json
from beeping.config import configure_logging, load_settings
from beeping.counterdist import (PROGRAMS_DIR, SHIPPED_PROGRAMS, CounterProgram,
                                 parse_counter_program, shipped_program)
from beeping.election import state_lower_bound
from beeping.errors import ArgumentError, BeepLabError
from beeping.harness import (CounterExperiment, ExperimentConfig, run_counter_trials,
                             run_trials, summarize, summarize_counter)
from beeping.machine import audit_state_count, describe_machine, extract_machine
from beeping.units import format_rational, parse_int_list, parse_rational
from logic.presets import COUNTER_DEFAULTS, PROTOCOL_DEFAULTS, PROTOCOLS, get_preset_groups

SETTINGS = load_settings(dotenv=False)
configure_logging(SETTINGS)
logger = logging.getLogger("beeplab")

# ── Rate Limiting ─────────────────────────────────────────────────────────
try:
    from flask_limiter import Limiter
    from flask_limiter.util import get_remote_address
    LIMITER_AVAILABLE = True
except ImportError:
    LIMITER_AVAILABLE = False
    logger.warning("flask_limiter not installed; rate limiting disabled")

app = Flask(__name__)
if os.environ.get("TRUST_PROXY", "0") in ("1", "true", "True"):
    app.wsgi_app = ProxyFix(app.wsgi_app, x_for=1, x_proto=1)
app.config["DEBUG"] = os.environ.get("FLASK_DEBUG", "0") in ("1", "true", "True")
app.config["MAX_CONTENT_LENGTH"] = 256 * 1024
app.config["RATELIMIT_ENABLED"] = os.environ.get("BEEPLAB_RATELIMIT", "1") not in ("0", "false", "False")

if LIMITER_AVAILABLE:
    storage_uri = os.getenv("REDIS_URL", "memory://")
    limiter = Limiter(key_func=get_remote_address, app=app, default_limits=[],
                      storage_uri=storage_uri)

    def _rate(limit_str):
        return limiter.limit(limit_str)
else:
    def _rate(limit_str):
        def decorator(f): return f
        return decorator


# ─────────────────────────────────────────────────────────────────────────────
# Request helpers
# ─────────────────────────────────────────────────────────────────────────────

def _body() -> dict:
    if not request.is_json:
        abort(415, description="Content-Type must be application/json")
    data = request.get_json(silent=True)
    if not isinstance(data, dict):
        raise ArgumentError("request body must be a JSON object")
    return {str(k).replace("-", "_"): v for k, v in data.items()}


def _capped_trials(data: dict, default: int) -> tuple:
    try:
        trials = int(data.get("trials", default))
    except (TypeError, ValueError):
        raise ArgumentError(f"trials must be an integer, got {data.get('trials')!r}") from None
    if trials > SETTINGS.api_max_trials:
        return SETTINGS.api_max_trials, True
    return trials, False


def _experiment(data: dict, task: str, default_trials: int = 100) -> tuple:
    values = dict(PROTOCOL_DEFAULTS)
    values.update(data)
    values["task"] = task
    values["workers"] = 1
    trials, capped = _capped_trials(values, default_trials)
    values["trials"] = trials
    return ExperimentConfig.from_mapping(values), capped


# ─────────────────────────────────────────────────────────────────────────────
# Routes
# ─────────────────────────────────────────────────────────────────────────────

@app.route("/ping")
def ping():
    return "pong"


@app.route("/healthz")
def healthz():
    return jsonify({"status": "ok", "version": __version__})


@app.route("/api/protocols")
def api_protocols():
    protocols = {name: {**info, "params": list(info["params"])} for name, info in PROTOCOLS.items()}
    return jsonify({
        "protocols": protocols,
        "defaults": PROTOCOL_DEFAULTS,
        "presets": {g: [key for key, _ in items] for g, items in get_preset_groups().items()},
        "programs": list(SHIPPED_PROGRAMS),
    })


@app.route("/programs/<name>.cm")
def program_source(name):
    if name not in SHIPPED_PROGRAMS:
        abort(404)
    return send_from_directory(PROGRAMS_DIR, f"{name}.cm", mimetype="text/plain")


def _run_report(task: str):
    config, capped = _experiment(_body(), task)
    report = run_trials(config, SETTINGS)
    _, csv_text = summarize(report)
    return jsonify({
        "task": task,
        "trials_capped": capped,
        "rows": [cell.row() for cell in report.cells],
        "histograms": {str(c.n): {str(k): v for k, v in c.histogram.items()} for c in report.cells},
        "csv": csv_text,
    })


@app.route("/api/elect", methods=["POST"])
@_rate("20 per minute;200 per day")
def api_elect():
    return _run_report("elect")


@app.route("/api/lonely", methods=["POST"])
@_rate("20 per minute;200 per day")
def api_lonely():
    return _run_report("lonely")


@app.route("/api/audit", methods=["POST"])
@_rate("30 per minute")
def api_audit():
    data = _body()
    config, _ = _experiment(data, data.get("task", "elect"), default_trials=1)
    program = config.build_program()
    count = audit_state_count(program, SETTINGS.state_cap)
    return jsonify({
        "protocol": program.name,
        "states": count,
        "lower_bound": state_lower_bound(config.epsilon, config.q, config.n_lower_bound),
        "params": config.params.as_dict(),
    })


@app.route("/api/analyze", methods=["POST"])
@_rate("10 per minute;100 per day")
def api_analyze():
    data = _body()
    config, _ = _experiment(data, data.get("task", "elect"), default_trials=1)
    if len(config.n_values) != 1:
        raise ArgumentError("analyze takes a single n")
    machine = extract_machine(config.build_program(), SETTINGS.state_cap)
    report = absorb_exact(
        machine, config.n_values[0],
        horizon=int(data.get("horizon", DEFAULT_HORIZON)),
        tail_bound=parse_rational(data.get("tail_bound", DEFAULT_TAIL_BOUND)),
        cap=SETTINGS.config_cap,
    )
    return jsonify({"machine": describe_machine(machine), **report_to_json(report)})


def _counter_program(data: dict) -> CounterProgram:
    if data.get("source"):
        return parse_counter_program(str(data["source"]), name=str(data.get("name", "program")))
    return shipped_program(str(data.get("program", "")))


@app.route("/api/counter", methods=["POST"])
@_rate("10 per minute;100 per day")
def api_counter():
    data = _body()
    trials, capped = _capped_trials(data, 50)
    n_values = parse_int_list(data.get("n", 4))
    init = data.get("init") or []
    if isinstance(init, str):
        init = [init]
    exp = CounterExperiment(
        program=_counter_program(data),
        cells=tuple((n, tuple(init)) for n in n_values),
        epsilon=parse_rational(data.get("epsilon", COUNTER_DEFAULTS["epsilon"])),
        q=int(data.get("q", 2)),
        count_bound=int(data.get("count_bound", PROTOCOL_DEFAULTS["count_bound"])),
        trials=trials, seed=int(data.get("seed", 0)),
    )
    cells = run_counter_trials(exp, SETTINGS)
    _, csv_text = summarize_counter(cells)
    return jsonify({
        "program": exp.program.name,
        "epsilon": format_rational(exp.epsilon),
        "trials_capped": capped,
        "rows": [{**c.row(), "oracle": c.oracle} for c in cells],
        "csv": csv_text,
    })


# ─────────────────────────────────────────────────────────────────────────────
# Errors and headers
# ─────────────────────────────────────────────────────────────────────────────

@app.errorhandler(BeepLabError)
def beeplab_error(e):
    payload = {"error": str(e), "type": type(e).__name__}
    problems = getattr(e, "problems", None)
    if problems:
        payload["problems"] = [{"line": ln, "message": msg} for ln, msg in problems]
    return jsonify(payload), 400


@app.errorhandler(ValueError)
@app.errorhandler(TypeError)
def bad_value(e):
    return jsonify({"error": str(e), "type": "ArgumentError"}), 400


@app.errorhandler(HTTPException)
def http_error(e):
    return jsonify({"error": e.description or e.name}), e.code


@app.errorhandler(Exception)
def internal_server_error(e):
    logger.exception("Unhandled server error")
    return jsonify({"error": "internal server error"}), 500


@app.after_request
def set_security_headers(response):
    response.headers["X-Content-Type-Options"] = "nosniff"
    response.headers["X-Frame-Options"] = "DENY"
    response.headers["Referrer-Policy"] = "no-referrer"
    return response


logger.info("beeplab %s API ready (max %d trials per request)", __version__, SETTINGS.api_max_trials)

if __name__ == "__main__":
    app.run(host="0.0.0.0", port=int(os.environ.get("PORT", 5000)))
