"""Value-centric stateless model checking for a small concurrent language."""

from .dsl import parse_program, load_program, replay, step, enabled_events, initial_state
from .events import Event, Trace, PartialOrder

__all__ = [
    "parse_program", "load_program", "replay", "step", "enabled_events",
    "initial_state", "Event", "Trace", "PartialOrder",
]
