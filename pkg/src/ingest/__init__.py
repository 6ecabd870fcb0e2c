from .sessions import (
    HouseholdMonth,
    ParseResult,
    Rejection,
    SessionRecord,
    group_by_household_month,
    parse_sessions,
    read_session_files,
    serialize_sessions,
    write_rejections,
)

__all__ = [
    "HouseholdMonth",
    "ParseResult",
    "Rejection",
    "SessionRecord",
    "group_by_household_month",
    "parse_sessions",
    "read_session_files",
    "serialize_sessions",
    "write_rejections",
]
