"""Parsing and validation of empirical submission records.

Input is CSV with a header declaring the columns ``id``, ``submitted`` and
``accepted`` (any column order, extra columns ignored), dates in strict
ISO-8601 ``YYYY-MM-DD``. The waiting time of a record is the exact
calendar-day difference between acceptance and submission.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from pathlib import Path
from typing import IO, Iterable, Union

__all__ = [
    "SubmissionRecord",
    "ExclusionReason",
    "Exclusion",
    "IngestReport",
    "HeaderError",
    "parse_records",
    "compute_waiting_time",
    "validate",
    "ingest_csv",
]

REQUIRED_COLUMNS = ("id", "submitted", "accepted")

_ISO_DATE = re.compile(r"^\d{4}-\d{2}-\d{2}$")


class HeaderError(ValueError):
    """The CSV header is missing or lacks a required column."""


class ExclusionReason(Enum):
    NEGATIVE_INTERVAL = "negative_interval"
    ZERO_INTERVAL = "zero_interval"
    MALFORMED_DATE = "malformed_date"
    DUPLICATE_ID = "duplicate_id"


@dataclass(frozen=True)
class SubmissionRecord:
    id: str
    submitted: date
    accepted: date


@dataclass(frozen=True)
class Exclusion:
    """One input row dropped from analysis, with the reason why."""

    row: int  # 1-based data row number (header not counted)
    record_id: str
    reason: ExclusionReason
    detail: str = ""


@dataclass
class IngestReport:
    """Partition of the input rows: every row is admitted or excluded."""

    admitted: list[tuple[SubmissionRecord, int]] = field(default_factory=list)
    excluded: list[Exclusion] = field(default_factory=list)

    @property
    def total_rows(self) -> int:
        return len(self.admitted) + len(self.excluded)

    def waiting_times(self) -> list[int]:
        return [t_w for _, t_w in self.admitted]

    def exclusion_counts(self) -> dict[ExclusionReason, int]:
        counts = {reason: 0 for reason in ExclusionReason}
        for exc in self.excluded:
            counts[exc.reason] += 1
        return counts


def _parse_iso_date(text: str) -> date:
    text = text.strip()
    if not _ISO_DATE.match(text):
        raise ValueError(f"not a YYYY-MM-DD date: {text!r}")
    return date.fromisoformat(text)


def parse_records(
    stream: Union[IO[str], Iterable[str]],
) -> tuple[list[SubmissionRecord], list[Exclusion]]:
    """Read CSV rows into records, collecting malformed rows separately.

    A bad or missing header aborts with HeaderError; a bad row only lands
    in the exclusion list, so one typo cannot sink a whole file.
    """
    reader = csv.DictReader(stream)
    if reader.fieldnames is None:
        raise HeaderError("input is empty; expected a header row")
    fields = [name.strip().lower() for name in reader.fieldnames]
    missing = [col for col in REQUIRED_COLUMNS if col not in fields]
    if missing:
        raise HeaderError(f"header is missing required columns: {', '.join(missing)}")
    col = {name: reader.fieldnames[fields.index(name)] for name in REQUIRED_COLUMNS}

    records: list[SubmissionRecord] = []
    malformed: list[Exclusion] = []
    for row_no, row in enumerate(reader, start=1):
        raw_id = (row.get(col["id"]) or "").strip()
        try:
            if not raw_id:
                raise ValueError("empty id")
            submitted = _parse_iso_date(row.get(col["submitted"]) or "")
            accepted = _parse_iso_date(row.get(col["accepted"]) or "")
        except ValueError as exc:
            malformed.append(
                Exclusion(row_no, raw_id, ExclusionReason.MALFORMED_DATE, str(exc))
            )
            continue
        records.append(SubmissionRecord(raw_id, submitted, accepted))
    return records, malformed


def compute_waiting_time(record: SubmissionRecord) -> int:
    """Calendar days from submission to acceptance (leap years included)."""
    return (record.accepted - record.submitted).days


def validate(
    records: Iterable[SubmissionRecord],
    parse_exclusions: Iterable[Exclusion] = (),
) -> IngestReport:
    """Split records into admitted (t_w > 0) and excluded rows.

    Zero-day intervals are excluded because the fitted curve shapes blow up
    at t = 0; negatives indicate corrupt data. For duplicate ids the first
    occurrence wins, later ones are excluded whatever their dates say.
    """
    report = IngestReport(excluded=list(parse_exclusions))
    # Row numbers already claimed by parse-level exclusions are skipped so
    # the numbering keeps matching the source file.
    claimed = {exc.row for exc in report.excluded}
    seen: set[str] = set()
    row_no = 0
    for record in records:
        row_no += 1
        while row_no in claimed:
            row_no += 1
        if record.id in seen:
            report.excluded.append(
                Exclusion(row_no, record.id, ExclusionReason.DUPLICATE_ID)
            )
            continue
        seen.add(record.id)
        t_w = compute_waiting_time(record)
        if t_w < 0:
            report.excluded.append(
                Exclusion(
                    row_no,
                    record.id,
                    ExclusionReason.NEGATIVE_INTERVAL,
                    f"accepted {t_w} days before submission",
                )
            )
        elif t_w == 0:
            report.excluded.append(
                Exclusion(row_no, record.id, ExclusionReason.ZERO_INTERVAL)
            )
        else:
            report.admitted.append((record, t_w))
    return report


def ingest_csv(source: Union[str, Path, IO[str]]) -> IngestReport:
    """Parse and validate a CSV file (or open text stream) in one pass."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as handle:
            records, malformed = parse_records(handle)
    else:
        records, malformed = parse_records(source)
    return validate(records, malformed)
