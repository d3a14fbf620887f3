"""Process-compliance analysis over per-student commit counts.

A student is expected to commit once per requirement section during the
exam plus once from home, so with r sections the recommended process shows
at least r + 1 commits. Counting student commits (the teacher's seed never
counts) yields the classification:

    0 commits            untouched (booked but never took the exam)
    1 commit             dropout (worked in the lab, never finished at home)
    2 .. r commits       intermediate
    r + 1 or more        compliant
"""
from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

from .model import StudentId


@dataclass(frozen=True)
class StudentActivity:
    student: StudentId
    student_commit_count: int

    def __post_init__(self) -> None:
        if self.student_commit_count < 0:
            raise ValueError("commit count must be non-negative")


class ComplianceClass(enum.Enum):
    UNTOUCHED = "Untouched"
    DROPOUT = "Dropout"
    INTERMEDIATE = "Intermediate"
    COMPLIANT = "Compliant"


@dataclass(frozen=True)
class ComplianceSummary:
    booked: int
    untouched: int
    touched: int
    dropout_pct: float
    compliant_pct: float
    histogram: dict[int, int]

    @property
    def untouched_pct(self) -> float:
        return _pct(self.untouched, self.booked)


def round1(value: float) -> float:
    """One-decimal display rounding, ties away from zero."""
    return float(Decimal(repr(value)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def _pct(part: int, whole: int) -> float:
    return round1(100.0 * part / whole) if whole else 0.0


def classify_student(activity: StudentActivity, r: int) -> ComplianceClass:
    if r < 1:
        raise ValueError("requirement section count must be >= 1")
    count = activity.student_commit_count
    if count == 0:
        return ComplianceClass.UNTOUCHED
    if count == 1:
        return ComplianceClass.DROPOUT
    if count <= r:
        return ComplianceClass.INTERMEDIATE
    return ComplianceClass.COMPLIANT


def compliance_stats(activities: list[StudentActivity], r: int) -> ComplianceSummary:
    """Counts, percentages (over touched students), and the commit histogram."""
    untouched = dropouts = compliant = 0
    histogram: dict[int, int] = {}
    for activity in activities:
        cls = classify_student(activity, r)
        if cls is ComplianceClass.UNTOUCHED:
            untouched += 1
            continue
        histogram[activity.student_commit_count] = (
            histogram.get(activity.student_commit_count, 0) + 1
        )
        if cls is ComplianceClass.DROPOUT:
            dropouts += 1
        elif cls is ComplianceClass.COMPLIANT:
            compliant += 1
    touched = len(activities) - untouched
    return ComplianceSummary(
        booked=len(activities),
        untouched=untouched,
        touched=touched,
        dropout_pct=_pct(dropouts, touched),
        compliant_pct=_pct(compliant, touched),
        histogram=dict(sorted(histogram.items())),
    )


def aggregate_activities(
    per_session: list[tuple[str, list[StudentActivity]]], r: int
) -> list[tuple[str, ComplianceSummary]]:
    """Per-session summaries plus an 'All' row built from raw counts.

    Aggregating raw counts, not averaging percentages: sessions differ in
    size, so averaged percentages would misstate the overall rates.
    """
    rows = [(name, compliance_stats(acts, r)) for name, acts in per_session]
    combined: list[StudentActivity] = [a for _, acts in per_session for a in acts]
    rows.append(("All", compliance_stats(combined, r)))
    return rows


def compliance_csv(rows: list[tuple[str, ComplianceSummary]]) -> str:
    """Summary table: one row per session, touched students and rates."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["session", "students", "dropout_pct", "compliant_pct"])
    for name, summary in rows:
        writer.writerow([name, summary.touched, summary.dropout_pct, summary.compliant_pct])
    return buf.getvalue()


def commit_histogram_csv(summary: ComplianceSummary) -> str:
    """Rows ``commit_count,students`` in ascending order (touched students only)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["commit_count", "students"])
    for count in sorted(summary.histogram):
        writer.writerow([count, summary.histogram[count]])
    return buf.getvalue()
