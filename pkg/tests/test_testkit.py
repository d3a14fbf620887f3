from __future__ import annotations

import pytest

from examforge.errors import NotGradable, SnapshotEmpty
from examforge.testkit import (
    ArtifactCache,
    Outcome,
    RunOutcome,
    TestReport,
    compute_pass_fraction,
    grade_batch,
    materialize_workspace,
    run_test_suite,
)
from examforge.vcs import ProjectSnapshot
from tests.conftest import marks


def snap(student: str, **plan) -> ProjectSnapshot:
    files = {
        "src/app.py": b"def run():\n    return 1\n",
        "marks.json": marks(**plan),
    }
    return ProjectSnapshot(student=student, revision="r1", files=files)


@pytest.fixture
def cache(artifact_file):
    return ArtifactCache(artifact_file)


class TestMaterialize:
    def test_same_named_files_land_in_disjoint_workspaces(self, cache, tmp_path):
        ws1 = materialize_workspace(snap("s1"), cache, tmp_path)
        ws2 = materialize_workspace(snap("s2"), cache, tmp_path)
        assert ws1.path != ws2.path
        (ws1.path / "src/app.py").write_bytes(b"mutated")
        assert (ws2.path / "src/app.py").read_bytes() == b"def run():\n    return 1\n"

    def test_bundle_bytes_identical_across_workspaces(
        self, cache, tmp_path, artifact_file
    ):
        workspaces = [
            materialize_workspace(snap(f"s{i}"), cache, tmp_path) for i in range(5)
        ]
        blobs = {ws.tests.read_bytes() for ws in workspaces}
        assert blobs == {artifact_file.read_bytes()}

    def test_origin_read_exactly_once(self, cache, tmp_path):
        for i in range(10):
            materialize_workspace(snap(f"s{i}"), cache, tmp_path)
        assert cache.origin_reads == 1

    def test_empty_snapshot_rejected(self, cache):
        with pytest.raises(SnapshotEmpty):
            materialize_workspace(
                ProjectSnapshot(student="s1", revision="r1", files={}), cache, None
            )


class TestRunTestSuite:
    def run(self, session, cache, tmp_path, **plan) -> RunOutcome:
        workspace = materialize_workspace(snap("s1", **plan), cache, tmp_path)
        return run_test_suite(workspace, session.test_command, session.test_timeout, "s1")

    def test_report_with_failures(self, make_session, cache, tmp_path):
        outcome = self.run(make_session(), cache, tmp_path, total=20, failed=3)
        assert outcome.kind is Outcome.REPORT
        assert outcome.report.total == 20
        assert outcome.report.passed == 17

    def test_compile_error_classification(self, make_session, cache, tmp_path):
        outcome = self.run(make_session(), cache, tmp_path, compile_error=True)
        assert outcome.kind is Outcome.COMPILE_ERROR
        assert "error:" in outcome.log_excerpt

    def test_timeout_classification(self, make_session, cache, tmp_path):
        session = make_session(test_timeout=1.0)
        outcome = self.run(session, cache, tmp_path, hang=True)
        assert outcome.kind is Outcome.TIMEOUT
        assert outcome.duration == pytest.approx(1.0, abs=0.6)

    def test_silent_nonzero_exit_is_infra_error(self, make_session, cache, tmp_path):
        outcome = self.run(make_session(), cache, tmp_path, no_report=True, exit_code=5)
        assert outcome.kind is Outcome.INFRA_ERROR

    def test_unlaunchable_command_is_infra_error(self, make_session, cache, tmp_path):
        workspace = materialize_workspace(snap("s1"), cache, tmp_path)
        outcome = run_test_suite(
            workspace, "/nonexistent/harness {workspace} {tests} {report}", 5.0, "s1"
        )
        assert outcome.kind is Outcome.INFRA_ERROR


class TestPassFraction:
    def report_outcome(self, passed, total) -> RunOutcome:
        report = TestReport(
            total=total, passed=passed, failed=total - passed, errored=0,
            skipped=0, cases=(),
        )
        return RunOutcome("s1", Outcome.REPORT, 1.0, report=report)

    def test_report_fraction(self):
        assert compute_pass_fraction(self.report_outcome(17, 20)) == pytest.approx(0.85)

    def test_empty_suite_scores_zero(self):
        assert compute_pass_fraction(self.report_outcome(0, 0)) == 0.0

    def test_compile_error_and_timeout_score_zero(self):
        assert compute_pass_fraction(RunOutcome("s1", Outcome.COMPILE_ERROR, 1.0)) == 0.0
        assert compute_pass_fraction(RunOutcome("s1", Outcome.TIMEOUT, 1.0)) == 0.0

    def test_infra_error_is_not_gradable(self):
        with pytest.raises(NotGradable):
            compute_pass_fraction(RunOutcome("s1", Outcome.INFRA_ERROR, 1.0))


class TestGradeBatch:
    def batch(self):
        plans = {
            "s01": dict(total=20, failed=0),
            "s02": dict(total=20, failed=7),
            "s03": dict(compile_error=True),
            "s04": dict(no_report=True),
            "s05": dict(total=10, failed=1, errored=2, skipped=3),
            "s06": dict(total=20, failed=20),
        }
        return [snap(student, **plan) for student, plan in sorted(plans.items())]

    def test_results_sorted_and_worker_count_invariant(self, make_session):
        session = make_session()
        one = grade_batch(self.batch(), session, workers=1)
        many = grade_batch(list(reversed(self.batch())), session, workers=8)
        assert [o.student for o in one] == [f"s{i:02d}" for i in range(1, 7)]
        assert [(o.student, o.kind) for o in one] == [(o.student, o.kind) for o in many]
        assert [o.report for o in one] == [o.report for o in many]

    def test_empty_snapshot_maps_to_infra_error(self, make_session):
        snapshots = [snap("s1"), ProjectSnapshot("s2", "r1", {})]
        outcomes = grade_batch(snapshots, make_session(), workers=2)
        kinds = {o.student: o.kind for o in outcomes}
        assert kinds == {"s1": Outcome.REPORT, "s2": Outcome.INFRA_ERROR}

    def test_one_timeout_does_not_poison_the_batch(self, make_session):
        session = make_session(test_timeout=1.0)
        snapshots = [snap("s1"), snap("s2", hang=True), snap("s3", failed=1)]
        outcomes = grade_batch(snapshots, session, workers=3)
        kinds = [o.kind for o in outcomes]
        assert kinds == [Outcome.REPORT, Outcome.TIMEOUT, Outcome.REPORT]

    def test_workers_must_be_positive(self, make_session):
        with pytest.raises(ValueError):
            grade_batch([], make_session(), workers=0)

    def test_batch_reads_artifact_origin_once(self, make_session, artifact_file):
        cache = ArtifactCache(artifact_file)
        grade_batch(self.batch(), make_session(), workers=4, cache=cache)
        assert cache.origin_reads == 1
