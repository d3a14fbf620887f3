"""Grade computation and per-student record assembly.

The raw grade combines the lab pass fraction with the churn needed to reach
a fully passing home version:

    grade = c0 + c1 * (S + (1 - S) * c2 / (c2 + M))

With S = 1 or M = 0 the span term is 1 and the grade is c0 + c1; as M grows
the second term fades and the grade approaches c0 + c1 * S from above.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Optional

from .churn import ChurnResult
from .errors import InconsistentInputs, NotGradable
from .model import ExamSession, GradeRecord, GradeScale, GradeStatus, GradingConstants, Rounding
from .testkit import Outcome, RunOutcome, compute_pass_fraction


@dataclass(frozen=True)
class GradeInputs:
    s: float
    m: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.s <= 1.0:
            raise ValueError(f"pass fraction out of range: {self.s}")
        if self.m < 0:
            raise ValueError(f"churn must be non-negative: {self.m}")


def compute_grade(inputs: GradeInputs, k: GradingConstants) -> float:
    """Evaluate the grade formula exactly; no rounding, no clamping."""
    return k.c0 + k.c1 * (inputs.s + (1.0 - inputs.s) * k.c2 / (k.c2 + inputs.m))


def round_and_clamp(raw: float, scale: GradeScale) -> float:
    if scale.rounding is Rounding.HALF_UP_INTEGER:
        value = float(Decimal(repr(raw)).quantize(Decimal("1"), rounding=ROUND_HALF_UP))
    else:
        value = raw
    return min(max(value, scale.min), scale.max)


def assemble_grade_record(
    student: str,
    lab_outcome: Optional[RunOutcome],
    home_outcome: Optional[RunOutcome],
    churn: Optional[ChurnResult],
    session: ExamSession,
) -> GradeRecord:
    """Derive the student's status and, where defined, the numeric grade.

    Inputs come from the collection step: ``lab_outcome`` is the test run of
    the deadline version (present whenever the student committed at all),
    ``home_outcome`` the run of the latest version when it differs from the
    lab one, and ``churn`` the lab-to-home churn (present iff both versions
    exist). The status partition:

    - no version at all          -> NoShow
    - lab only                   -> Dropout (never finished at home)
    - home passes < 100%         -> HomeIncomplete (grade withheld, S kept)
    - lab failed to compile      -> CompileError, graded with S = 0
    - otherwise                  -> Graded
    """
    if lab_outcome is None and home_outcome is None:
        if churn is not None:
            raise InconsistentInputs(f"{student}: churn without any version")
        return GradeRecord(student=student, status=GradeStatus.NO_SHOW)

    if lab_outcome is None:
        # Collection materializes the seeded tree as the lab version for
        # students whose first commit came after the deadline.
        raise InconsistentInputs(f"{student}: home version without a lab version")

    if home_outcome is None:
        if churn is not None:
            raise InconsistentInputs(f"{student}: churn without a home version")
        s = compute_pass_fraction(lab_outcome)  # NotGradable on InfraError
        return GradeRecord(student=student, status=GradeStatus.DROPOUT, s=s)

    if churn is None:
        raise InconsistentInputs(f"{student}: both versions present but churn missing")
    if home_outcome.kind is Outcome.INFRA_ERROR:
        raise NotGradable(student)

    s = compute_pass_fraction(lab_outcome)
    m = churn.total
    home_fraction = compute_pass_fraction(home_outcome)
    if home_fraction < 1.0 or home_outcome.report is None or home_outcome.report.total == 0:
        return GradeRecord(student=student, status=GradeStatus.HOME_INCOMPLETE, s=s, m=m)

    raw = compute_grade(GradeInputs(s=s, m=m), session.constants)
    final = round_and_clamp(raw, session.grade_scale)
    status = (
        GradeStatus.COMPILE_ERROR
        if lab_outcome.kind is Outcome.COMPILE_ERROR
        else GradeStatus.GRADED
    )
    return GradeRecord(
        student=student, status=status, s=s, m=m, raw_grade=raw, final_grade=final
    )


def _fmt(value: Optional[float]) -> str:
    if value is None:
        return ""
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


def grades_csv(records: list[GradeRecord]) -> str:
    """Deterministic grade table, one row per student, ordered by id."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["student_id", "status", "S", "M", "raw_grade", "final_grade"])
    for record in sorted(records, key=lambda r: r.student):
        writer.writerow(
            [
                record.student,
                record.status.value,
                _fmt(record.s),
                _fmt(record.m),
                _fmt(record.raw_grade),
                _fmt(record.final_grade),
            ]
        )
    return buf.getvalue()
