import io
from datetime import date

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edqueue.ingest import (
    ExclusionReason,
    HeaderError,
    SubmissionRecord,
    compute_waiting_time,
    ingest_csv,
    parse_records,
    validate,
)
from edqueue.stats import summary

from oracles import days_between


def parse(text):
    return parse_records(io.StringIO(text))


# --- parse_records -----------------------------------------------------------


def test_parse_simple_row():
    records, malformed = parse("id,submitted,accepted\np1,2005-03-01,2005-07-14\n")
    assert malformed == []
    assert records == [SubmissionRecord("p1", date(2005, 3, 1), date(2005, 7, 14))]


def test_parse_bad_date_is_row_level_exclusion():
    records, malformed = parse("id,submitted,accepted\np1,2005-13-40,2005-07-14\n")
    assert records == []
    assert len(malformed) == 1
    assert malformed[0].reason is ExclusionReason.MALFORMED_DATE
    assert malformed[0].row == 1


def test_parse_empty_file_with_header():
    records, malformed = parse("id,submitted,accepted\n")
    assert records == [] and malformed == []


def test_parse_missing_header_is_global_error():
    with pytest.raises(HeaderError):
        parse("p1,2005-03-01,2005-07-14\n")


def test_parse_empty_stream_is_global_error():
    with pytest.raises(HeaderError):
        parse("")


def test_parse_accepts_reordered_and_extra_columns():
    text = "submitted,journal,id,accepted\n2001-01-01,X,p9,2001-02-01\n"
    records, malformed = parse(text)
    assert records == [SubmissionRecord("p9", date(2001, 1, 1), date(2001, 2, 1))]


def test_parse_short_row_excluded():
    records, malformed = parse("id,submitted,accepted\np1,2005-03-01\n")
    assert records == []
    assert malformed[0].reason is ExclusionReason.MALFORMED_DATE


def test_parse_rejects_sloppy_date_formats():
    # strict YYYY-MM-DD only: compact and slashed forms are malformed
    text = "id,submitted,accepted\np1,20050301,2005-07-14\np2,2005/03/01,2005-07-14\n"
    records, malformed = parse(text)
    assert records == []
    assert len(malformed) == 2


# --- compute_waiting_time ------------------------------------------------------


def test_waiting_time_spanning_months():
    # independent day-count oracle: 30 + 30 + 31 + 30 + 14
    record = SubmissionRecord("p1", date(2005, 3, 1), date(2005, 7, 14))
    assert compute_waiting_time(record) == 135
    assert compute_waiting_time(record) == days_between(record.submitted, record.accepted)


def test_waiting_time_same_day():
    record = SubmissionRecord("p1", date(2005, 3, 1), date(2005, 3, 1))
    assert compute_waiting_time(record) == 0


def test_waiting_time_across_leap_day():
    record = SubmissionRecord("p1", date(2004, 2, 28), date(2004, 3, 1))
    assert compute_waiting_time(record) == 2
    plain = SubmissionRecord("p2", date(2005, 2, 28), date(2005, 3, 1))
    assert compute_waiting_time(plain) == 1


@settings(max_examples=200, deadline=None)
@given(
    d1=st.dates(min_value=date(1990, 1, 1), max_value=date(2030, 12, 31)),
    d2=st.dates(min_value=date(1990, 1, 1), max_value=date(2030, 12, 31)),
)
def test_waiting_time_matches_julian_oracle(d1, d2):
    record = SubmissionRecord("x", d1, d2)
    assert compute_waiting_time(record) == days_between(d1, d2)


# --- validate -------------------------------------------------------------------


def test_negative_interval_excluded():
    report = validate([SubmissionRecord("p1", date(2005, 5, 1), date(2005, 4, 1))])
    assert report.admitted == []
    assert report.excluded[0].reason is ExclusionReason.NEGATIVE_INTERVAL


def test_zero_interval_excluded():
    report = validate([SubmissionRecord("p1", date(2005, 5, 1), date(2005, 5, 1))])
    assert report.excluded[0].reason is ExclusionReason.ZERO_INTERVAL


def test_duplicate_id_keeps_first():
    records = [
        SubmissionRecord("p1", date(2005, 1, 1), date(2005, 2, 1)),
        SubmissionRecord("p1", date(2005, 1, 1), date(2005, 3, 1)),
    ]
    report = validate(records)
    assert len(report.admitted) == 1
    assert report.admitted[0][1] == 31
    assert report.excluded[0].reason is ExclusionReason.DUPLICATE_ID


def test_totality_every_row_lands_somewhere():
    text = (
        "id,submitted,accepted\n"
        "a,2001-01-01,2001-02-01\n"
        "b,bad-date,2001-02-01\n"
        "c,2001-03-01,2001-02-01\n"
        "d,2001-04-01,2001-04-01\n"
        "a,2001-05-01,2001-06-01\n"
        "e,2001-06-01,2001-07-01\n"
    )
    report = ingest_csv(io.StringIO(text))
    assert report.total_rows == 6
    assert len(report.admitted) == 2
    reasons = {e.record_id: e.reason for e in report.excluded}
    assert reasons["b"] is ExclusionReason.MALFORMED_DATE
    assert reasons["c"] is ExclusionReason.NEGATIVE_INTERVAL
    assert reasons["d"] is ExclusionReason.ZERO_INTERVAL
    assert reasons["a"] is ExclusionReason.DUPLICATE_ID


def test_exclusion_rows_match_file_positions():
    text = (
        "id,submitted,accepted\n"
        "a,bad,2001-02-01\n"
        "b,2001-03-01,2001-02-01\n"
    )
    report = ingest_csv(io.StringIO(text))
    rows = {e.record_id: e.row for e in report.excluded}
    assert rows == {"a": 1, "b": 2}


def test_admitted_waiting_times_are_positive():
    report = ingest_csv(
        io.StringIO("id,submitted,accepted\na,2001-01-01,2001-01-02\n")
    )
    assert report.waiting_times() == [1]


# --- fixture (aggregate shape of a real journal database) ------------------------


def test_fixture_totals(fixture_csv):
    report = ingest_csv(fixture_csv)
    assert len(report.admitted) == 4775
    assert len(report.excluded) == 0
    assert max(report.waiting_times()) == 1629


def test_pipeline_summary_count_matches_admitted(fixture_csv):
    report = ingest_csv(fixture_csv)
    stats = summary(np.asarray(report.waiting_times(), dtype=float))
    assert stats.count == len(report.admitted)
    assert stats.max == 1629.0
