"""Simulator and analysis toolkit for BB84 without public announcement of
bases, with two-way classical post-processing."""

from . import belldiag, channel, distill, gf2codes, session, transcript
from .belldiag import find_threshold, iterate_schedule, schedule_search
from .channel import InterceptResend, PauliChannel
from .distill import Schedule
from .gf2codes import steane_pair
from .session import SessionParams, run_session

__all__ = [
    "belldiag",
    "channel",
    "distill",
    "gf2codes",
    "session",
    "transcript",
    "find_threshold",
    "iterate_schedule",
    "schedule_search",
    "InterceptResend",
    "PauliChannel",
    "Schedule",
    "steane_pair",
    "SessionParams",
    "run_session",
]
__version__ = "0.1.0"
