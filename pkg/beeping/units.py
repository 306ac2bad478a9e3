# beeping/units.py — beeplab
# ============================================================
# Single source of truth for the small parsing / integer-math
# helpers shared by the CLI, the HTTP API, the presets and the
# protocol constructors.
#
# Every protocol length in this package is an exact ceiling of
# a logarithm of a rational (schedule lengths, StateOptimal's
# delta, the analysis quantity R). Computing those through
# floating point gives off-by-one schedules at exact powers, so
# they are computed here with integer arithmetic only.
# ============================================================
from __future__ import annotations

import re
from fractions import Fraction
from typing import List, Optional, Tuple, Union

from beeping.errors import ArgumentError

Number = Union[int, float, str, Fraction]

_POW_RE = re.compile(r"^\s*(\d+)\s*\^\s*(-?\d+)\s*$")
_INIT_RE = re.compile(r"^\s*c(\d+)\s*=\s*(all|\d+)\s*$", re.I)
_RANGE_RE = re.compile(r"^(\d+)\.\.(\d+)$")


def parse_rational(value: Optional[Number]) -> Fraction:
    """
    Parse an exact rational.

    Accepts: "1/8", "0.05", "1e-2", "2^-8", 3, 0.25, Fraction(1, 4).
    Decimal strings are read exactly ("0.1" -> 1/10, never the binary float).
    """
    if value is None:
        raise ArgumentError("missing rational value")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ArgumentError(f"not a rational: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        # floats coming from JSON are read through their shortest repr
        return Fraction(repr(value))
    s = str(value).strip()
    m = _POW_RE.match(s)
    if m:
        base, exp = int(m.group(1)), int(m.group(2))
        if base == 0 and exp < 0:
            raise ArgumentError(f"not a rational: {value!r}")
        return Fraction(base) ** exp
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError):
        raise ArgumentError(f"not a rational: {value!r}") from None


def is_valid_rational(value: Optional[Number]) -> bool:
    """True if ``parse_rational`` would accept ``value``."""
    try:
        parse_rational(value)
        return True
    except ArgumentError:
        return False


def format_rational(value: Fraction) -> str:
    """Render as "num/den" (integers keep a "/1" so the format is uniform)."""
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"


def parse_int_list(value: Union[str, int, List[int], None], lo: int = 1) -> List[int]:
    """Parse "1,2,4" / "1 2 4" / "2..5" / [1, 2] / 4 into a list of ints >= lo."""
    if value is None:
        raise ArgumentError("missing integer list")
    if isinstance(value, bool):
        raise ArgumentError(f"not an integer list: {value!r}")
    if isinstance(value, int):
        items = [value]
    elif isinstance(value, (list, tuple)):
        items = list(value)
    else:
        parts = [p for p in re.split(r"[,\s]+", str(value).strip()) if p]
        if not parts:
            raise ArgumentError(f"not an integer list: {value!r}")
        items = []
        for part in parts:
            m = _RANGE_RE.match(part)
            items.extend(range(int(m.group(1)), int(m.group(2)) + 1) if m else [part])
    out: List[int] = []
    for item in items:
        try:
            v = int(item)
        except (TypeError, ValueError):
            raise ArgumentError(f"not an integer: {item!r}") from None
        if v < lo:
            raise ArgumentError(f"value {v} below minimum {lo}")
        out.append(v)
    return out


def parse_counter_init(text: str) -> Tuple[int, Optional[int]]:
    """
    Parse a counter initialisation "c<k>=<int|all>".

    Returns (1-based counter index, value); value None means "all nodes".
    """
    m = _INIT_RE.match(str(text))
    if not m:
        raise ArgumentError(f"bad counter init {text!r}; expected c<k>=<int|all>")
    index = int(m.group(1))
    raw = m.group(2).lower()
    return index, (None if raw == "all" else int(raw))


def ceil_log(base: int, x: Fraction) -> int:
    """Smallest integer k >= 0 with base**k >= x (exact)."""
    if base < 2:
        raise ArgumentError(f"logarithm base must be >= 2, got {base}")
    x = Fraction(x)
    k, power = 0, Fraction(1)
    while power < x:
        power *= base
        k += 1
    return k


def ceil_log2(x: Fraction) -> int:
    """Smallest integer k >= 0 with 2**k >= x (exact)."""
    return ceil_log(2, x)


def ceil_fraction(x: Fraction) -> int:
    """Exact ceiling of a rational."""
    x = Fraction(x)
    return -((-x.numerator) // x.denominator)


__all__ = [
    "parse_rational", "is_valid_rational", "format_rational", "parse_int_list",
    "parse_counter_init", "ceil_log", "ceil_log2", "ceil_fraction",
]
