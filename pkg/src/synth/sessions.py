"""
sessions.py
-----------
Synthetic session logs with a planted number of viewing profiles per
household-month.

Each active day a household draws one profile; the profile then generates
that day's sessions (Poisson count, at least one), a Markov channel
sequence per session, a log-normal duration and Beta program ratios.
"""

import calendar
import logging
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.ingest.sessions import SessionRecord, serialize_sessions

logger = logging.getLogger(__name__)

TRUTH_COLUMNS = ("household_id", "month", "true_k")

# Well-separated profile templates: (mean duration s, ratio Beta(a, b),
# sessions per day, expected channel switches per session)
_TEMPLATES = (
    (600.0, (2.0, 8.0), 6.0, 6.0),
    (3600.0, (8.0, 2.0), 3.0, 1.0),
    (10800.0, (5.0, 5.0), 1.5, 3.0),
    (1800.0, (1.5, 1.5), 4.0, 10.0),
    (7200.0, (20.0, 2.0), 2.0, 0.5),
)


@dataclass
class ProfileSpec:
    """One viewing profile: how a household behaves on a day it is active."""

    channels: Tuple[str, ...]
    transitions: np.ndarray
    duration_logmean: float
    duration_logsd: float
    ratio_alpha: float
    ratio_beta: float
    sessions_per_day: float
    switches_per_session: float = 2.0
    programs_per_session: float = 1.0

    def __post_init__(self) -> None:
        self.transitions = np.asarray(self.transitions, dtype=float)
        k = len(self.channels)
        if k == 0:
            raise ValueError("profile needs at least one channel")
        if self.transitions.shape != (k, k):
            raise ValueError(f"transition matrix must be {k}x{k}")
        if np.any(self.transitions < 0) or not np.allclose(self.transitions.sum(axis=1), 1.0):
            raise ValueError("transition rows must be probability vectors")
        positive = (self.duration_logsd, self.ratio_alpha, self.ratio_beta, self.sessions_per_day)
        if any(v <= 0 for v in positive):
            raise ValueError("profile rates and shapes must be positive")
        if self.switches_per_session < 0 or self.programs_per_session < 0:
            raise ValueError("switch and program rates must be nonnegative")


@dataclass
class HouseholdSpec:
    household_id: str
    profiles: List[ProfileSpec]
    selection: np.ndarray
    months: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.selection = np.asarray(self.selection, dtype=float)
        if self.selection.shape != (len(self.profiles),):
            raise ValueError("one selection probability per profile is required")
        if np.any(self.selection < 0) or not np.isclose(self.selection.sum(), 1.0):
            raise ValueError("selection probabilities must form a simplex")


# ---------------------------------------------------------------------------
# Spec construction
# ---------------------------------------------------------------------------


def template_profile(index: int, n_channels: int = 4, rng: Optional[np.random.Generator] = None) -> ProfileSpec:
    """
    Profile ``index`` of the built-in well-separated library: disjoint channel
    set, distinct duration scale, ratio distribution and switching rate.
    """
    mean_duration, (a, b), per_day, switches = _TEMPLATES[index % len(_TEMPLATES)]
    channels = tuple(f"ch{index}_{j}" for j in range(n_channels))
    if rng is None:
        transitions = np.full((n_channels, n_channels), 1.0 / n_channels)
    else:
        transitions = rng.dirichlet(np.full(n_channels, 2.0), size=n_channels)
    logsd = 0.3
    return ProfileSpec(
        channels=channels,
        transitions=transitions,
        duration_logmean=float(np.log(mean_duration) - 0.5 * logsd ** 2),
        duration_logsd=logsd,
        ratio_alpha=a,
        ratio_beta=b,
        sessions_per_day=per_day,
        switches_per_session=switches,
    )


def default_household_specs(
    n_households: int,
    months: Sequence[str],
    seed: int = 0,
    profile_counts: Optional[Sequence[int]] = None,
) -> List[HouseholdSpec]:
    """
    Households built from the template library.

    Args:
        n_households:   Number of households.
        months:         Active months ("YYYY-MM").
        seed:           Seed for profile counts and transition matrices.
        profile_counts: Planted profiles per household; drawn from {1, 2, 3}
                        when omitted.
    """
    rng = np.random.default_rng(seed)
    if profile_counts is None:
        profile_counts = rng.integers(1, 4, size=n_households).tolist()
    if len(profile_counts) != n_households:
        raise ValueError("profile_counts must have one entry per household")

    specs = []
    width = max(3, len(str(n_households)))
    for h, k in enumerate(profile_counts):
        if not 1 <= k <= len(_TEMPLATES):
            raise ValueError(f"profile count must lie in [1, {len(_TEMPLATES)}]")
        picks = rng.choice(len(_TEMPLATES), size=k, replace=False)
        specs.append(
            HouseholdSpec(
                household_id=f"hh{h:0{width}d}",
                profiles=[template_profile(int(p), rng=rng) for p in sorted(picks)],
                selection=np.full(k, 1.0 / k),
                months=list(months),
            )
        )
    return specs


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------


def _month_days(month: str) -> List[datetime]:
    start = datetime.strptime(month, "%Y-%m").replace(tzinfo=timezone.utc)
    _, n_days = calendar.monthrange(start.year, start.month)
    return [start + timedelta(days=d) for d in range(n_days)]


def _day_sessions(
    household_id: str,
    day: datetime,
    profile: ProfileSpec,
    rng: np.random.Generator,
) -> List[SessionRecord]:
    count = max(1, int(rng.poisson(profile.sessions_per_day)))
    offsets = np.sort(rng.integers(0, 86_400, size=count))
    sessions = []
    for offset in offsets:
        length = 1 + int(rng.poisson(profile.switches_per_session))
        state = int(rng.integers(len(profile.channels)))
        sequence = [profile.channels[state]]
        for _ in range(length - 1):
            state = int(rng.choice(len(profile.channels), p=profile.transitions[state]))
            sequence.append(profile.channels[state])

        n_programs = 1 + int(rng.poisson(profile.programs_per_session))
        ratios = np.round(rng.beta(profile.ratio_alpha, profile.ratio_beta, size=n_programs), 4)
        programs = rng.integers(0, 10_000, size=n_programs)
        duration = max(1.0, float(np.round(rng.lognormal(profile.duration_logmean, profile.duration_logsd))))

        sessions.append(
            SessionRecord(
                household_id=household_id,
                start_time=day + timedelta(seconds=int(offset)),
                channel_sequence=tuple(sequence),
                program_watches=tuple((f"p{int(p)}", float(r)) for p, r in zip(programs, ratios)),
                duration_seconds=duration,
            )
        )
    return sessions


def _household_sessions(spec: HouseholdSpec, seed: np.random.SeedSequence):
    rng = np.random.default_rng(seed)
    records: List[SessionRecord] = []
    truth = []
    for month in spec.months:
        used = set()
        for day in _month_days(month):
            choice = int(rng.choice(len(spec.profiles), p=spec.selection))
            used.add(choice)
            records.extend(_day_sessions(spec.household_id, day, spec.profiles[choice], rng))
        truth.append((spec.household_id, month, len(used)))
    return records, truth


def gen_sessions(
    specs: Sequence[HouseholdSpec],
    seed: int = 0,
) -> Tuple[str, pd.DataFrame]:
    """
    Generate session logs for every household.

    Returns:
        (CSV text in the ingest schema, ground-truth table
        household_id, month, true_k). true_k counts the profiles actually
        drawn in that month.
    """
    children = np.random.SeedSequence(seed).spawn(len(specs))
    records: List[SessionRecord] = []
    truth = []
    for spec, child in zip(specs, children):
        recs, rows = _household_sessions(spec, child)
        records.extend(recs)
        truth.extend(rows)

    records.sort(key=lambda r: (r.household_id, r.start_time))
    logger.info(f"Generated {len(records)} session(s) for {len(specs)} household(s).")
    table = pd.DataFrame(truth, columns=list(TRUTH_COLUMNS))
    return serialize_sessions(records), table


def write_ground_truth(table: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Write the planted counts as CSV ``household_id,month,true_k``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.loc[:, list(TRUTH_COLUMNS)].to_csv(path, index=False, lineterminator="\n")
    return path
