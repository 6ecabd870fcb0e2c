"""
transitions.py
--------------
Channel-transition graph features of an aggregation unit.

Transitions are only counted inside a session's ordered channel sequence;
the last channel of one session never links to the first of the next.
"""

from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, Tuple

from src.ingest.sessions import SessionRecord


@dataclass(frozen=True)
class TransitionSummary:
    """Union transition graph of a set of sessions."""

    pair_counts: Dict[Tuple[str, str], int]
    outgoing: Dict[str, int]

    @property
    def n_transitions(self) -> int:
        return sum(self.pair_counts.values())

    @property
    def n_channels(self) -> int:
        return len(self.outgoing)

    @property
    def absorbing(self) -> Tuple[str, ...]:
        return tuple(sorted(ch for ch, out in self.outgoing.items() if out == 0))

    @property
    def n_absorbing(self) -> int:
        return len(self.absorbing)


def summarize_transitions(sessions: Iterable[SessionRecord]) -> TransitionSummary:
    """Count ordered channel pairs and per-channel outgoing transitions."""
    pairs: Counter = Counter()
    outgoing: Counter = Counter()
    for session in sessions:
        seq = session.channel_sequence
        for channel in seq:
            outgoing.setdefault(channel, 0)
        for src, dst in zip(seq[:-1], seq[1:]):
            pairs[(src, dst)] += 1
            outgoing[src] += 1
    return TransitionSummary(pair_counts=dict(pairs), outgoing=dict(outgoing))


def transition_features(sessions: Iterable[SessionRecord]) -> Tuple[int, int, int]:
    """
    Return (n_transitions, n_channels, n_absorbing) for a unit.

    Raises:
        ValueError: the unit has no sessions.
    """
    sessions = list(sessions)
    if not sessions:
        raise ValueError("empty unit")
    summary = summarize_transitions(sessions)
    return summary.n_transitions, summary.n_channels, summary.n_absorbing
