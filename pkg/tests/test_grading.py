from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from examforge.churn import ChurnResult
from examforge.errors import InconsistentInputs, NotGradable
from examforge.grading import (
    GradeInputs,
    assemble_grade_record,
    compute_grade,
    grades_csv,
    round_and_clamp,
)
from examforge.model import GradeRecord, GradeScale, GradeStatus, GradingConstants, Rounding
from examforge.testkit import Outcome, RunOutcome, TestReport

K = GradingConstants(c0=3.0, c1=27.0, c2=100.0)


def exact_grade(s: Fraction, m: int, k: GradingConstants) -> Fraction:
    """Independent evaluation in exact rational arithmetic."""
    c0, c1, c2 = Fraction(k.c0), Fraction(k.c1), Fraction(k.c2)
    return c0 + c1 * (s + (1 - s) * c2 / (c2 + m))


class TestComputeGrade:
    def test_full_pass_hits_top_exactly(self):
        for m in (0, 1, 17, 10**6):
            assert compute_grade(GradeInputs(1.0, m), K) == K.c0 + K.c1

    def test_zero_churn_hits_top_exactly(self):
        for s in (0.0, 0.3, 0.85, 1.0):
            assert compute_grade(GradeInputs(s, 0), K) == K.c0 + K.c1

    def test_reference_point(self):
        # S=0.5, M=100 -> 3 + 27 * (0.5 + 0.5 * 100/200) = 23.25
        assert compute_grade(GradeInputs(0.5, 100), K) == pytest.approx(23.25, abs=1e-12)

    def test_large_churn_limit(self):
        # M -> inf leaves 3 + 27 * 0.5 = 16.5, approached from above
        value = compute_grade(GradeInputs(0.5, 10**9), K)
        assert value == pytest.approx(16.5, abs=1e-3)
        assert value >= 16.5

    @given(
        s=st.fractions(min_value=0, max_value=1),
        m=st.integers(0, 10**6),
    )
    def test_matches_exact_arithmetic(self, s, m):
        computed = compute_grade(GradeInputs(float(s), m), K)
        oracle = exact_grade(Fraction(float(s)), m, K)
        assert computed == pytest.approx(float(oracle), abs=1e-9)

    @given(
        s1=st.floats(0, 1, allow_nan=False),
        s2=st.floats(0, 1, allow_nan=False),
        m1=st.integers(0, 10**6),
        m2=st.integers(0, 10**6),
    )
    def test_monotone_and_bounded(self, s1, s2, m1, m2):
        lo, hi = sorted((s1, s2))
        m_lo, m_hi = sorted((m1, m2))
        slack = 1e-9
        assert compute_grade(GradeInputs(lo, m1), K) <= compute_grade(
            GradeInputs(hi, m1), K
        ) + slack
        assert compute_grade(GradeInputs(s1, m_hi), K) <= compute_grade(
            GradeInputs(s1, m_lo), K
        ) + slack
        value = compute_grade(GradeInputs(s1, m1), K)
        assert K.c0 + K.c1 * s1 - slack <= value <= K.c0 + K.c1 + slack

    def test_input_validation(self):
        with pytest.raises(ValueError):
            GradeInputs(-0.1, 0)
        with pytest.raises(ValueError):
            GradeInputs(1.1, 0)
        with pytest.raises(ValueError):
            GradeInputs(0.5, -1)


class TestRoundAndClamp:
    SCALE = GradeScale(0.0, 30.0, Rounding.HALF_UP_INTEGER)

    def test_half_up_integer(self):
        assert round_and_clamp(23.25, self.SCALE) == 23
        assert round_and_clamp(23.5, self.SCALE) == 24
        assert round_and_clamp(28.961538461538463, self.SCALE) == 29

    def test_clamping(self):
        assert round_and_clamp(31.2, self.SCALE) == 30
        assert round_and_clamp(-2.4, self.SCALE) == 0

    def test_rounding_none_passes_through(self):
        scale = GradeScale(0.0, 30.0, Rounding.NONE)
        assert round_and_clamp(23.25, scale) == 23.25

    @given(st.floats(-100, 100, allow_nan=False))
    def test_result_always_inside_scale(self, raw):
        value = round_and_clamp(raw, self.SCALE)
        assert self.SCALE.min <= value <= self.SCALE.max


def report_outcome(passed: int, total: int = 20) -> RunOutcome:
    report = TestReport(
        total=total, passed=passed, failed=total - passed, errored=0, skipped=0, cases=()
    )
    return RunOutcome("s", Outcome.REPORT, 1.0, report=report)


def outcome_of(kind: Outcome) -> RunOutcome:
    return RunOutcome("s", kind, 1.0)


CHURN_40 = ChurnResult(per_file={"app.py": 40}, total=40)


class TestAssemble:
    def test_graded_pipeline_example(self, make_session):
        session = make_session()
        record = assemble_grade_record(
            "s5", report_outcome(17), report_outcome(20), CHURN_40, session
        )
        assert record.status is GradeStatus.GRADED
        assert record.s == pytest.approx(0.85)
        assert record.m == 40
        oracle = exact_grade(Fraction(record.s), 40, session.constants)
        assert record.raw_grade == pytest.approx(float(oracle), abs=1e-9)
        assert record.final_grade == 29

    def test_no_commits_is_no_show(self, make_session):
        record = assemble_grade_record("s1", None, None, None, make_session())
        assert record.status is GradeStatus.NO_SHOW
        assert record.s is None and record.m is None
        assert record.raw_grade is None and record.final_grade is None

    def test_lab_only_is_dropout(self, make_session):
        record = assemble_grade_record("s2", report_outcome(5), None, None, make_session())
        assert record.status is GradeStatus.DROPOUT
        assert record.s == pytest.approx(0.25)
        assert record.m is None and record.final_grade is None

    def test_incomplete_home_withholds_grade(self, make_session):
        record = assemble_grade_record(
            "s4", report_outcome(10), report_outcome(19), CHURN_40, make_session()
        )
        assert record.status is GradeStatus.HOME_INCOMPLETE
        assert record.s == pytest.approx(0.5)
        assert record.m == 40
        assert record.raw_grade is None and record.final_grade is None

    def test_lab_compile_error_graded_from_home(self, make_session):
        session = make_session()
        record = assemble_grade_record(
            "s3", outcome_of(Outcome.COMPILE_ERROR), report_outcome(20), CHURN_40, session
        )
        assert record.status is GradeStatus.COMPILE_ERROR
        assert record.s == 0.0
        assert record.raw_grade is not None and record.final_grade is not None

    def test_lab_timeout_scores_zero_but_grades(self, make_session):
        record = assemble_grade_record(
            "s6", outcome_of(Outcome.TIMEOUT), report_outcome(20), CHURN_40, make_session()
        )
        assert record.status is GradeStatus.GRADED
        assert record.s == 0.0

    def test_infra_errors_block_grading(self, make_session):
        session = make_session()
        with pytest.raises(NotGradable):
            assemble_grade_record(
                "s7", outcome_of(Outcome.INFRA_ERROR), report_outcome(20), CHURN_40, session
            )
        with pytest.raises(NotGradable):
            assemble_grade_record(
                "s7", report_outcome(20), outcome_of(Outcome.INFRA_ERROR), CHURN_40, session
            )
        with pytest.raises(NotGradable):
            assemble_grade_record("s7", outcome_of(Outcome.INFRA_ERROR), None, None, session)

    def test_inconsistent_combinations_rejected(self, make_session):
        session = make_session()
        with pytest.raises(InconsistentInputs):
            assemble_grade_record("s8", None, None, CHURN_40, session)
        with pytest.raises(InconsistentInputs):
            assemble_grade_record("s8", None, report_outcome(20), CHURN_40, session)
        with pytest.raises(InconsistentInputs):
            assemble_grade_record("s8", report_outcome(5), None, CHURN_40, session)
        with pytest.raises(InconsistentInputs):
            assemble_grade_record("s8", report_outcome(5), report_outcome(20), None, session)

    def test_status_partition_is_total(self, make_session):
        """Every (lab, home, churn) combination maps to exactly one outcome."""
        session = make_session()
        lab_options = {
            "absent": None,
            "partial": report_outcome(17),
            "full": report_outcome(20),
            "compile": outcome_of(Outcome.COMPILE_ERROR),
            "timeout": outcome_of(Outcome.TIMEOUT),
            "infra": outcome_of(Outcome.INFRA_ERROR),
        }
        home_options = dict(lab_options)
        statuses_seen = set()
        for lab in lab_options.values():
            for home in home_options.values():
                for churn in (None, CHURN_40):
                    try:
                        record = assemble_grade_record("sx", lab, home, churn, session)
                    except (NotGradable, InconsistentInputs):
                        continue
                    statuses_seen.add(record.status)
        assert statuses_seen == set(GradeStatus)


class TestGradesCsv:
    def test_layout_order_and_empty_cells(self):
        records = [
            GradeRecord("s2", GradeStatus.DROPOUT, s=0.25),
            GradeRecord("s1", GradeStatus.NO_SHOW),
            GradeRecord(
                "s3", GradeStatus.GRADED, s=0.85, m=40,
                raw_grade=28.84285714285714, final_grade=29.0,
            ),
        ]
        assert grades_csv(records) == (
            "student_id,status,S,M,raw_grade,final_grade\n"
            "s1,NoShow,,,,\n"
            "s2,Dropout,0.25,,,\n"
            "s3,Graded,0.85,40,28.84285714285714,29\n"
        )
