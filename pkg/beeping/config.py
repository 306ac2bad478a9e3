# beeping/config.py — beeplab
# ============================================================
# Environment-driven settings. Entry points (cli.main, app.py)
# call load_settings(); a .env file is honoured when
# python-dotenv is installed. A malformed value never crashes
# start-up: it is logged and replaced by the default.
# ============================================================
from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Optional

try:
    from dotenv import load_dotenv
except ImportError:  # pragma: no cover - optional at runtime
    load_dotenv = None

logger = logging.getLogger(__name__)

DEFAULT_ROUND_CUTOFF = 100_000
DEFAULT_SLOW_CUTOFF = 10_000_000
DEFAULT_STATE_CAP = 1_000_000
DEFAULT_CONFIG_CAP = 2_000_000
DEFAULT_API_MAX_TRIALS = 2_000


@dataclass(frozen=True)
class Settings:
    round_cutoff: int = DEFAULT_ROUND_CUTOFF
    slow_cutoff: int = DEFAULT_SLOW_CUTOFF
    state_cap: int = DEFAULT_STATE_CAP
    config_cap: int = DEFAULT_CONFIG_CAP
    workers: int = 1
    action_window: Optional[int] = None
    log_level: str = "INFO"
    api_max_trials: int = DEFAULT_API_MAX_TRIALS


def _env_int(name: str, default: Optional[int], lo: int = 1) -> Optional[int]:
    raw = os.environ.get(name, "").strip()
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError:
        logger.warning("%s=%r is not an integer; using default %s", name, raw, default)
        return default
    if value < lo:
        logger.warning("%s=%d below minimum %d; using default %s", name, value, lo, default)
        return default
    return value


def load_settings(dotenv: bool = True) -> Settings:
    """Read BEEPLAB_* variables (after loading .env when available)."""
    if dotenv and load_dotenv is not None:
        load_dotenv()
    level = os.environ.get("BEEPLAB_LOG_LEVEL", "INFO").strip().upper() or "INFO"
    if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        logger.warning("BEEPLAB_LOG_LEVEL=%r unknown; using INFO", level)
        level = "INFO"
    return Settings(
        round_cutoff=_env_int("BEEPLAB_ROUND_CUTOFF", DEFAULT_ROUND_CUTOFF),
        slow_cutoff=_env_int("BEEPLAB_SLOW_CUTOFF", DEFAULT_SLOW_CUTOFF),
        state_cap=_env_int("BEEPLAB_STATE_CAP", DEFAULT_STATE_CAP),
        config_cap=_env_int("BEEPLAB_CONFIG_CAP", DEFAULT_CONFIG_CAP),
        workers=_env_int("BEEPLAB_WORKERS", 1),
        action_window=_env_int("BEEPLAB_ACTION_WINDOW", None, lo=0),
        log_level=level,
        api_max_trials=_env_int("BEEPLAB_API_MAX_TRIALS", DEFAULT_API_MAX_TRIALS),
    )


def configure_logging(settings: Settings) -> None:
    logging.basicConfig(
        level=getattr(logging, settings.log_level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


__all__ = ["Settings", "load_settings", "configure_logging",
           "DEFAULT_ROUND_CUTOFF", "DEFAULT_SLOW_CUTOFF", "DEFAULT_STATE_CAP", "DEFAULT_CONFIG_CAP"]
