"""
units.py
--------
Splits a household-month's sessions into aggregation units, the rows that
the mixture models cluster.

Rules
-----
day        one unit per calendar day (unit index = day of month)
window:<k> consecutive windows of k sessions in start-time order
"""

import logging
from typing import Dict, List, Sequence, Tuple

from src.ingest.sessions import SessionRecord

logger = logging.getLogger(__name__)

DAY = "day"
WINDOW_PREFIX = "window:"


def parse_aggregation(rule: str) -> Tuple[str, int]:
    """
    Validate an aggregation rule string.

    Returns:
        ("day", 0) or ("window", k).

    Raises:
        ValueError: unknown rule or non-positive window size.
    """
    rule = (rule or "").strip()
    if rule == DAY:
        return DAY, 0
    if rule.startswith(WINDOW_PREFIX):
        try:
            size = int(rule[len(WINDOW_PREFIX):])
        except ValueError as e:
            raise ValueError(f"bad window size in aggregation rule '{rule}'") from e
        if size < 1:
            raise ValueError("window size must be at least 1.")
        return "window", size
    raise ValueError(f"unknown aggregation rule '{rule}' (use 'day' or 'window:<k>')")


def split_units(
    sessions: Sequence[SessionRecord],
    rule: str = DAY,
) -> List[Tuple[int, List[SessionRecord]]]:
    """
    Group sessions into aggregation units.

    Args:
        sessions: Sessions of one household-month, sorted by start_time.
        rule:     "day" or "window:<k>".

    Returns:
        List of (unit_index, sessions) pairs ordered by unit_index; only
        nonempty units are returned.
    """
    kind, size = parse_aggregation(rule)
    ordered = sorted(sessions, key=lambda s: s.start_time)

    if kind == DAY:
        by_day: Dict[int, List[SessionRecord]] = {}
        for session in ordered:
            by_day.setdefault(session.start_time.day, []).append(session)
        units = sorted(by_day.items())
    else:
        units = [
            (index, list(ordered[start:start + size]))
            for index, start in enumerate(range(0, len(ordered), size))
        ]

    logger.debug(f"Split {len(ordered)} session(s) into {len(units)} unit(s) (rule={rule}).")
    return units
