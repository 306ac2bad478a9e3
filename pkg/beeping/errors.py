# beeping/errors.py — beeplab
# ============================================================
# One exception hierarchy for the whole package. The CLI maps
# these to exit codes; the HTTP API maps them to 400 responses.
# Non-fatal outcomes (cutoff reached, truncated analysis) are
# returned as values and never raised.
# ============================================================
from __future__ import annotations

from typing import List, Optional, Tuple


class BeepLabError(Exception):
    """Base class for every error raised on purpose by beeplab."""

    exit_code = 2


class ArgumentError(BeepLabError, ValueError):
    """Invalid parameter, unknown id/name, or an input outside its domain."""


class MalformedMachineError(BeepLabError):
    """A BeepMachine violates a structural invariant (not a precision issue)."""


class CounterProgramError(BeepLabError):
    """Counter assembly could not be parsed; ``problems`` holds (line, message) pairs."""

    def __init__(self, problems: List[Tuple[int, str]]):
        self.problems = list(problems)
        lines = "; ".join(f"line {ln}: {msg}" for ln, msg in self.problems)
        super().__init__(lines or "invalid counter program")


class NonDeciderError(BeepLabError):
    """The reference interpreter ran out of its step budget."""

    def __init__(self, budget: int, pc: Optional[int] = None):
        self.budget = budget
        self.pc = pc
        super().__init__(f"program did not halt within {budget} steps (pc={pc})")


class EnumerationOverflowError(BeepLabError):
    """Reachable local states exceed the enumeration cap."""

    exit_code = 3

    def __init__(self, partial_count: int, cap: int):
        self.partial_count = partial_count
        self.cap = cap
        super().__init__(f"state enumeration exceeded cap {cap} (reached {partial_count})")


class ConfigurationOverflowError(BeepLabError):
    """The exact analyzer's configuration space is larger than allowed."""

    exit_code = 3

    def __init__(self, cap: int, attempted: int):
        self.cap = cap
        self.attempted = attempted
        super().__init__(f"configuration space {attempted} exceeds cap {cap}")


__all__ = [
    "BeepLabError", "ArgumentError", "MalformedMachineError", "CounterProgramError",
    "NonDeciderError", "EnumerationOverflowError", "ConfigurationOverflowError",
]
