"""
sessions.py
-----------
Parsing, validation and grouping of set-top-box session logs.

CSV schema (header required):

    household_id,start_time,channel_sequence,program_watches,duration_seconds

``channel_sequence`` is ``|``-separated, ``program_watches`` is a
``;``-separated list of ``id:ratio`` pairs. Timestamps are UTC ISO-8601.
"""

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from itertools import groupby
from pathlib import Path
from typing import BinaryIO, Iterable, List, Sequence, TextIO, Tuple, Union

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "household_id",
    "start_time",
    "channel_sequence",
    "program_watches",
    "duration_seconds",
)

CHANNEL_SEP = "|"
WATCH_SEP = ";"
RATIO_SEP = ":"

StreamLike = Union[bytes, str, BinaryIO, TextIO]


@dataclass(frozen=True)
class SessionRecord:
    """One viewing session between STB power-on and power-off."""

    household_id: str
    start_time: datetime
    channel_sequence: Tuple[str, ...]
    program_watches: Tuple[Tuple[str, float], ...]
    duration_seconds: float

    def __post_init__(self) -> None:
        if self.duration_seconds < 0:
            raise ValueError("negative duration")
        if not self.channel_sequence:
            raise ValueError("empty channel sequence")
        for _, ratio in self.program_watches:
            if not 0.0 <= ratio <= 1.0:
                raise ValueError(f"program ratio {ratio} outside [0, 1]")

    @property
    def month(self) -> str:
        return self.start_time.strftime("%Y-%m")

    @property
    def ratios(self) -> List[float]:
        return [ratio for _, ratio in self.program_watches]


@dataclass(frozen=True)
class HouseholdMonth:
    """All sessions of one household whose start falls in one calendar month."""

    household_id: str
    month: str
    sessions: Tuple[SessionRecord, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.sessions)


@dataclass(frozen=True)
class Rejection:
    line: int
    reason: str
    source: str = ""


@dataclass
class ParseResult:
    records: List[SessionRecord]
    rejections: List[Rejection]


# ---------------------------------------------------------------------------
# Field codecs
# ---------------------------------------------------------------------------


def _parse_timestamp(value: str) -> datetime:
    text = value.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    try:
        parsed = datetime.fromisoformat(text)
    except ValueError as e:
        raise ValueError(f"bad timestamp '{value}'") from e
    if parsed.tzinfo is None or parsed.utcoffset().total_seconds() != 0:
        raise ValueError(f"timestamp not UTC '{value}'")
    return parsed.astimezone(timezone.utc)


def _format_timestamp(value: datetime) -> str:
    return value.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _format_number(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def _parse_watches(value: str) -> Tuple[Tuple[str, float], ...]:
    if not value.strip():
        return ()
    watches = []
    for item in value.split(WATCH_SEP):
        program_id, sep, ratio_text = item.rpartition(RATIO_SEP)
        if not sep or not program_id:
            raise ValueError(f"bad program watch '{item}'")
        try:
            ratio = float(ratio_text)
        except ValueError as e:
            raise ValueError(f"bad program ratio '{ratio_text}'") from e
        if not 0.0 <= ratio <= 1.0:
            raise ValueError("ratio outside [0,1]")
        watches.append((program_id, ratio))
    return tuple(watches)


def _parse_row(row: dict) -> SessionRecord:
    household_id = (row.get("household_id") or "").strip()
    if not household_id:
        raise ValueError("missing household id")

    channels = tuple(row.get("channel_sequence", "").split(CHANNEL_SEP))
    if not channels or any(c == "" for c in channels):
        raise ValueError("empty channel sequence")

    try:
        duration = float(row.get("duration_seconds", ""))
    except ValueError as e:
        raise ValueError("bad duration") from e
    if not math.isfinite(duration):
        raise ValueError("bad duration")
    if duration < 0:
        raise ValueError("negative duration")

    return SessionRecord(
        household_id=household_id,
        start_time=_parse_timestamp(row.get("start_time", "")),
        channel_sequence=channels,
        program_watches=_parse_watches(row.get("program_watches", "")),
        duration_seconds=duration,
    )


def _as_text_stream(stream: StreamLike) -> TextIO:
    if isinstance(stream, bytes):
        return io.StringIO(stream.decode("utf-8"))
    if isinstance(stream, str):
        return io.StringIO(stream)
    if isinstance(stream, io.TextIOBase):
        return stream
    return io.TextIOWrapper(stream, encoding="utf-8", newline="")


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------


def parse_sessions(stream: StreamLike, source: str = "") -> ParseResult:
    """
    Parse a session-log CSV into validated SessionRecords.

    Args:
        stream: Raw bytes, CSV text, or an open binary/text file object.
        source: Optional label (usually the file path) stored on rejections.

    Returns:
        ParseResult with the accepted records (file order) and one Rejection
        per malformed row. Line numbers count the header as line 1.

    Raises:
        ValueError: the stream cannot be decoded or the header is wrong.
    """
    try:
        text_stream = _as_text_stream(stream)
        reader = csv.DictReader(text_stream)
        header = reader.fieldnames
    except (UnicodeDecodeError, csv.Error) as e:
        raise ValueError(f"unreadable session log: {e}") from e

    if header is None:
        raise ValueError("unreadable session log: missing header")
    if tuple(h.strip() for h in header) != CSV_COLUMNS:
        raise ValueError(f"unreadable session log: unexpected header {header}")

    records: List[SessionRecord] = []
    rejections: List[Rejection] = []

    try:
        for row in reader:
            line = reader.line_num
            if None in row or any(v is None for v in row.values()):
                rejections.append(Rejection(line, "wrong field count", source))
                continue
            try:
                records.append(_parse_row(row))
            except ValueError as e:
                rejections.append(Rejection(line, str(e), source))
    except (UnicodeDecodeError, csv.Error) as e:
        raise ValueError(f"unreadable session log: {e}") from e

    if rejections:
        logger.warning(f"Rejected {len(rejections)} row(s) from {source or 'stream'}.")
    logger.info(f"Parsed {len(records)} session(s) from {source or 'stream'}.")
    return ParseResult(records=records, rejections=rejections)


def serialize_sessions(records: Iterable[SessionRecord]) -> str:
    """Render records in the canonical CSV form accepted by parse_sessions."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        watches = WATCH_SEP.join(
            f"{pid}{RATIO_SEP}{_format_number(ratio)}" for pid, ratio in rec.program_watches
        )
        writer.writerow(
            [
                rec.household_id,
                _format_timestamp(rec.start_time),
                CHANNEL_SEP.join(rec.channel_sequence),
                watches,
                _format_number(rec.duration_seconds),
            ]
        )
    return buffer.getvalue()


def group_by_household_month(sessions: Iterable[SessionRecord]) -> List[HouseholdMonth]:
    """
    Partition sessions into household-months.

    A session belongs to the month of its start_time. Groups are ordered by
    (household_id, month); sessions inside a group by start_time.
    """

    def key(rec: SessionRecord) -> Tuple[str, str]:
        return rec.household_id, rec.month

    ordered = sorted(sessions, key=lambda r: (r.household_id, r.month, r.start_time))
    return [
        HouseholdMonth(household_id=hid, month=month, sessions=tuple(group))
        for (hid, month), group in groupby(ordered, key=key)
    ]


def read_session_files(
    paths: Sequence[Union[str, Path]],
    n_jobs: int = 1,
) -> ParseResult:
    """
    Parse several session-log files and merge them.

    Files are parsed concurrently when n_jobs > 1; the merged records are
    ordered by (household_id, start_time) regardless of scheduling.

    Raises:
        FileNotFoundError: a path does not exist.
    """
    resolved = [Path(p).resolve() for p in paths]
    for path in resolved:
        if not path.exists():
            raise FileNotFoundError(f"Session log not found: {path}")

    def _parse(path: Path) -> ParseResult:
        with path.open("rb") as handle:
            return parse_sessions(handle.read(), source=str(path))

    if n_jobs > 1 and len(resolved) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_parse, resolved))
    else:
        results = [_parse(p) for p in resolved]

    records = sorted(
        (rec for res in results for rec in res.records),
        key=lambda r: (r.household_id, r.start_time),
    )
    rejections = [rej for res in results for rej in res.rejections]
    return ParseResult(records=records, rejections=rejections)


def write_rejections(rejections: Iterable[Rejection], path: Union[str, Path]) -> Path:
    """Write the rejection report as CSV ``line,reason``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["line", "reason"])
        for rej in rejections:
            writer.writerow([rej.line, rej.reason])
    return path
