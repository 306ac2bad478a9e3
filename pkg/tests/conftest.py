# tests/conftest.py — beeplab
# ══════════════════════════════════════════════════════════════
# Shared pytest fixtures for every test module
# ══════════════════════════════════════════════════════════════
import os
import sys
from fractions import Fraction

import pytest

# ── Path setup ────────────────────────────────────────────────
# project root on sys.path so `beeping`, `logic` and `app` import
sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from beeping.election import ElectionParams, build_election  # noqa: E402
from beeping.machine import ONE, BeepMachine  # noqa: E402


# ══════════════════════════════════════════════════════════════
# Flask App Fixture
# ══════════════════════════════════════════════════════════════
@pytest.fixture(scope="session")
def app():
    """Flask test app, created once per session."""
    os.environ.setdefault("BEEPLAB_RATELIMIT", "0")
    os.environ.setdefault("FLASK_DEBUG", "0")
    import app as app_module
    app_module.app.config.update(TESTING=True)
    return app_module.app


@pytest.fixture()
def client(app):
    return app.test_client()


# ══════════════════════════════════════════════════════════════
# Protocol Fixtures
# ══════════════════════════════════════════════════════════════
@pytest.fixture()
def params():
    """ε = 1/10, q = 2: Fixed Error runs 5 middle rounds, 7 in total."""
    return ElectionParams(Fraction(1, 10))


@pytest.fixture()
def fe_program(params):
    return build_election("fixed-error", params)


@pytest.fixture()
def coin_machine():
    """
    Five-state toy election.

    0 start: coin to 1 (beep) or 2 (listen). 1 always goes to leader 3.
    2 goes to follower 4 on a beep, back to 0 on silence.
    """
    h = Fraction(1, 2)
    table_silent = {0: ((1, h), (2, h)), 1: ((3, ONE),), 2: ((0, ONE),),
                    3: ((3, ONE),), 4: ((4, ONE),)}
    table_beep = {0: ((1, h), (2, h)), 1: ((3, ONE),), 2: ((4, ONE),),
                  3: ((3, ONE),), 4: ((4, ONE),)}
    return BeepMachine(
        receive_states={0, 2, 3, 4}, beep_states={1}, start=0,
        delta_silent=table_silent, delta_beep=table_beep,
        finals={"leader": 3, "follower": 4},
    )


# ══════════════════════════════════════════════════════════════
# Counter Program Fixtures
# ══════════════════════════════════════════════════════════════
@pytest.fixture()
def inc_then_test_source():
    """c1 += 1, then accept iff c1 is nonzero."""
    return (
        "# bump and test\n"
        "      INC 1\n"
        "      JZ 1 empty\n"
        "      ACCEPT\n"
        "empty: REJECT\n"
    )
