# beeping package — beeplab
"""Simulator, protocol library and exact analyzer for single-hop beeping networks."""

__version__ = "1.0.0"
