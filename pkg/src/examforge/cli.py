"""examforge command line: drives the exam pipeline end to end.

Subcommands mirror the exam procedure: provision student repositories and
seed the starter project, distribute the test bundle through the dedicated
test repository, collect lab/home submissions to disk, grade the batch,
report process compliance, diff arbitrary trees, and optionally watch
repositories to feed test results back on every commit.

All outputs live under one session directory:

    repos/                     repository storage (git adapter)
    credentials.csv            student_id,repo_uri,username,token
    submissions/{lab,home}/    exported trees + manifest.csv
    grades.csv                 final grade table
    compliance.csv             process-compliance summary
    histogram.csv              commit-count distribution
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
import time
from pathlib import Path
from typing import Optional

from filelock import FileLock, Timeout

from . import analytics, churn as churn_mod, grading, testkit, vcs
from .errors import (
    DuplicateStudent,
    ExamForgeError,
    InconsistentInputs,
    InvalidField,
    MalformedConfig,
    MalformedCsv,
    NotGradable,
    RepoExists,
    RepoMissing,
    StorageFailure,
)
from .model import DEFAULT_CHURN_IGNORE, ExamSession, load_session
from .trees import read_tree, write_tree

log = logging.getLogger("examforge")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_PARTIAL = 2
EXIT_INFRA = 3

FEEDBACK_FILE = "FEEDBACK.md"

# Manifest statuses written by collect and consumed by grade.
ST_EXPORTED = "exported"
ST_SEED = "seed"        # no lab commit; the pre-deadline (seeded) tree stands in
ST_NO_SHOW = "no_show"
ST_DROPOUT = "dropout"


def _session_lock(session_dir: Path) -> FileLock:
    session_dir.mkdir(parents=True, exist_ok=True)
    return FileLock(str(session_dir / ".lock"))


def _load_config(config_path: Path) -> ExamSession:
    return load_session(config_path.read_text(), base_dir=config_path.parent)


def cmd_provision(
    session: ExamSession,
    session_dir: Path,
    adapter: vcs.VcsAdapter,
    project_dir: Path,
) -> int:
    """Create per-student repositories, seed the starter project, write credentials."""
    session_dir.mkdir(parents=True, exist_ok=True)
    project_files = read_tree(project_dir)
    if not project_files:
        log.error("initial project directory %s is empty", project_dir)
        return EXIT_VALIDATION
    credentials_path = session_dir / "credentials.csv"
    if credentials_path.exists():
        log.error("%s already exists; refusing to overwrite", credentials_path)
        return EXIT_VALIDATION

    handles = vcs.provision_repos(session, adapter)
    report = vcs.seed_initial_project(
        handles, project_files, adapter, session.teacher_author
    )
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["student_id", "repo_uri", "username", "token"])
    for handle in handles:
        assert handle.credentials is not None
        writer.writerow(
            [handle.student, handle.uri, handle.credentials.username, handle.credentials.token]
        )
    credentials_path.write_text(buf.getvalue())
    log.info("provisioned %d repositories", len(handles))

    if report.failures:
        for failure in report.failures:
            log.error("seed failed: %s", failure)
        log.warning("seeded %d of %d repositories", len(report.revisions), len(handles))
        return EXIT_PARTIAL
    log.info("seeded %d repositories", len(report.revisions))
    return EXIT_OK


def cmd_distribute_tests(
    session: ExamSession, session_dir: Path, adapter: vcs.VcsAdapter, artifact: Path
) -> int:
    """Publish (or update) the test bundle on the dedicated test repository."""
    session_dir.mkdir(parents=True, exist_ok=True)
    handle = vcs.provision_test_repo(session, adapter)
    revision = vcs.publish_tests(handle, artifact, adapter, session.teacher_author)
    digest = hashlib.sha256(artifact.read_bytes()).hexdigest()
    (session_dir / "artifact.sha256").write_text(f"{digest}  {artifact.name}\n")
    log.info("published %s as revision %s (sha256 %s)", artifact.name, revision, digest)
    return EXIT_OK


def _collect_one(
    session: ExamSession, adapter: vcs.VcsAdapter, handle: vcs.RepoHandle, which: str
) -> tuple[str, Optional[vcs.ProjectSnapshot]]:
    commits = vcs.list_commits(handle, adapter)
    teacher = session.teacher_author
    lab = vcs.select_lab_revision(commits, session.deadline, teacher)
    home = vcs.select_home_revision(commits, teacher)

    if which == "lab":
        if lab is not None:
            return ST_EXPORTED, vcs.snapshot_at(handle, lab.revision, adapter)
        if home is None:
            return ST_NO_SHOW, None
        # Student only committed after the deadline: the version that counts
        # is whatever the repo held at the deadline, i.e. the seeded tree.
        pre_deadline = [c for c in commits if c.timestamp < session.deadline]
        if not pre_deadline:
            return ST_NO_SHOW, None
        return ST_SEED, vcs.snapshot_at(handle, pre_deadline[-1].revision, adapter)

    if home is None:
        return ST_NO_SHOW, None
    if lab is not None and home.revision == lab.revision:
        return ST_DROPOUT, None
    return ST_EXPORTED, vcs.snapshot_at(handle, home.revision, adapter)


def cmd_collect(
    session: ExamSession, session_dir: Path, adapter: vcs.VcsAdapter, which: str
) -> int:
    """Export the selected revision of every student to the submissions tree."""
    assert which in ("lab", "home")
    out_dir = session_dir / "submissions" / which
    if out_dir.exists():
        log.error("%s already exists; refusing to overwrite submissions", out_dir)
        return EXIT_VALIDATION
    handles = vcs.student_handles(session, adapter)
    rows = []
    for handle in handles:
        status, snapshot = _collect_one(session, adapter, handle, which)
        revision = snapshot.revision if snapshot is not None else ""
        if snapshot is not None:
            write_tree(out_dir / handle.student, snapshot.files)
        rows.append([handle.student, status, revision])
        log.info("collect %s %s: %s", which, handle.student, status)
    out_dir.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["student_id", "status", "revision"])
    writer.writerows(sorted(rows))
    (out_dir / "manifest.csv").write_text(buf.getvalue())
    return EXIT_OK


def _read_manifest(path: Path) -> dict[str, str]:
    with path.open(newline="") as fh:
        return {row["student_id"]: row["status"] for row in csv.DictReader(fh)}


def cmd_grade(session: ExamSession, session_dir: Path, workers: int) -> int:
    """Test both submission sets, compute churn, and write grades.csv.

    Works entirely from the exported submissions so grading can be re-run
    (and audited) without touching the repositories.
    """
    session_dir.mkdir(parents=True, exist_ok=True)
    lab_dir = session_dir / "submissions" / "lab"
    home_dir = session_dir / "submissions" / "home"
    for required in (lab_dir / "manifest.csv", home_dir / "manifest.csv"):
        if not required.exists():
            log.error("missing %s; run collect first", required)
            return EXIT_VALIDATION
    lab_manifest = _read_manifest(lab_dir / "manifest.csv")
    home_manifest = _read_manifest(home_dir / "manifest.csv")
    if not any(s in (ST_EXPORTED, ST_SEED) for s in lab_manifest.values()):
        log.error("no submissions were exported; nothing to grade")
        return EXIT_VALIDATION

    lab_trees = {
        student: read_tree(lab_dir / student)
        for student, status in lab_manifest.items()
        if status in (ST_EXPORTED, ST_SEED)
    }
    home_trees = {
        student: read_tree(home_dir / student)
        for student, status in home_manifest.items()
        if status == ST_EXPORTED
    }

    lab_snaps = [
        vcs.ProjectSnapshot(student, "lab", files) for student, files in lab_trees.items()
    ]
    home_snaps = [
        vcs.ProjectSnapshot(student, "home", files) for student, files in home_trees.items()
    ]
    log.info("running acceptance suite: %d lab, %d home projects, %d workers",
             len(lab_snaps), len(home_snaps), workers)
    artifact = Path(session.test_artifact)
    digest = hashlib.sha256(artifact.read_bytes()).hexdigest()
    (session_dir / "artifact.sha256").write_text(f"{digest}  {artifact.name}\n")
    lab_outcomes = {o.student: o for o in testkit.grade_batch(lab_snaps, session, workers)}
    home_outcomes = {o.student: o for o in testkit.grade_batch(home_snaps, session, workers)}

    records = []
    not_gradable = []
    for student in session.roster:
        lab_outcome = lab_outcomes.get(student)
        home_outcome = home_outcomes.get(student)
        churn_result = None
        if lab_outcome is not None and home_outcome is not None:
            churn_result = churn_mod.compute_project_churn(
                lab_trees[student], home_trees[student], session.churn_ignore
            )
        try:
            records.append(
                grading.assemble_grade_record(
                    student, lab_outcome, home_outcome, churn_result, session
                )
            )
        except (NotGradable, InconsistentInputs) as exc:
            log.error("not gradable: %s (%s)", student, exc)
            not_gradable.append(student)

    (session_dir / "grades.csv").write_text(grading.grades_csv(records))
    log.info("graded %d students, %d need retry", len(records), len(not_gradable))
    if not_gradable and not records:
        return EXIT_INFRA
    if not_gradable:
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_comply(session: ExamSession, session_dir: Path, adapter: vcs.VcsAdapter) -> int:
    """Count student commits per repository and write the compliance tables."""
    session_dir.mkdir(parents=True, exist_ok=True)
    activities = []
    for handle in vcs.student_handles(session, adapter):
        commits = vcs.list_commits(handle, adapter)
        count = sum(1 for c in commits if c.author != session.teacher_author)
        activities.append(analytics.StudentActivity(handle.student, count))
    summary = analytics.compliance_stats(activities, session.requirement_sections)
    (session_dir / "compliance.csv").write_text(
        analytics.compliance_csv([(session.session_id, summary)])
    )
    (session_dir / "histogram.csv").write_text(analytics.commit_histogram_csv(summary))
    log.info(
        "%d booked, %d untouched (%.1f%%), dropout %.1f%%, compliant %.1f%%",
        summary.booked, summary.untouched, summary.untouched_pct,
        summary.dropout_pct, summary.compliant_pct,
    )
    return EXIT_OK


def cmd_churn(before_dir: Path, after_dir: Path, ignore: tuple[str, ...]) -> int:
    """Diff two trees on disk and print the per-file churn CSV."""
    for directory in (before_dir, after_dir):
        if not directory.is_dir():
            log.error("not a directory: %s", directory)
            return EXIT_VALIDATION
    result = churn_mod.compute_project_churn(
        read_tree(before_dir), read_tree(after_dir), ignore
    )
    sys.stdout.write(churn_mod.churn_csv(result))
    return EXIT_OK


def _summarize_outcome(outcome: testkit.RunOutcome) -> str:
    if outcome.kind is testkit.Outcome.REPORT:
        assert outcome.report is not None
        return f"{outcome.report.passed}/{outcome.report.total} tests passed"
    if outcome.kind is testkit.Outcome.COMPILE_ERROR:
        return "compile error"
    if outcome.kind is testkit.Outcome.TIMEOUT:
        return "timeout"
    return "infrastructure error"


def watch_poll_once(
    session: ExamSession,
    adapter: vcs.VcsAdapter,
    state: dict[str, str],
) -> list[tuple[str, str, str]]:
    """Test every new student commit and append results to FEEDBACK.md in-repo.

    ``state`` maps student id to the last processed revision; it is updated
    in place. Returns (student, revision, summary) for every commit handled.
    """
    cache = testkit.ArtifactCache(Path(session.test_artifact))
    events = []
    for handle in vcs.student_handles(session, adapter):
        commits = vcs.list_commits(handle, adapter)
        student_commits = [c for c in commits if c.author != session.teacher_author]
        last_seen = state.get(handle.student)
        new = []
        for commit in reversed(student_commits):
            if commit.revision == last_seen:
                break
            new.append(commit)
        new.reverse()
        if not new:
            continue
        # earlier feedback lives in the last teacher commit, not necessarily
        # at the head and not in the student's own commits
        teacher_commits = [c for c in commits if c.author == session.teacher_author]
        accumulated = b""
        if teacher_commits:
            last_teacher = adapter.read_tree(handle.uri, teacher_commits[-1].revision)
            accumulated = last_teacher.get(FEEDBACK_FILE, b"")
        for commit in new:
            snapshot = vcs.snapshot_at(handle, commit.revision, adapter)
            workspace = testkit.materialize_workspace(snapshot, cache)
            try:
                outcome = testkit.run_test_suite(
                    workspace, session.test_command, session.test_timeout, handle.student
                )
            finally:
                testkit.cleanup_workspace(workspace)
            summary = _summarize_outcome(outcome)
            accumulated += f"- {commit.revision}: {summary}\n".encode()
            feedback = dict(snapshot.files)
            feedback[FEEDBACK_FILE] = accumulated
            adapter.commit_tree(
                handle.uri, feedback, session.teacher_author,
                f"test feedback for {commit.revision}",
            )
            state[handle.student] = commit.revision
            events.append((handle.student, commit.revision, summary))
            log.info("feedback %s %s: %s", handle.student, commit.revision, summary)
    return events


def cmd_watch(
    session: ExamSession,
    session_dir: Path,
    adapter: vcs.VcsAdapter,
    interval: float,
    max_polls: Optional[int] = None,
) -> int:
    """Poll repositories and grade every new commit until interrupted."""
    session_dir.mkdir(parents=True, exist_ok=True)
    state_path = session_dir / "watch_state.json"
    state = json.loads(state_path.read_text()) if state_path.exists() else {}
    polls = 0
    try:
        while max_polls is None or polls < max_polls:
            watch_poll_once(session, adapter, state)
            state_path.write_text(json.dumps(state, indent=2, sort_keys=True))
            polls += 1
            if max_polls is None or polls < max_polls:
                time.sleep(interval)
    except KeyboardInterrupt:
        log.info("watch interrupted")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="examforge", description="programming-exam assignment pipeline"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def _common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, type=Path, help="session config JSON")
        p.add_argument(
            "--session-dir", type=Path, default=None,
            help="output directory (default: sessions/<session_id>)",
        )

    p = sub.add_parser("provision", help="create and seed student repositories")
    _common(p)
    p.add_argument("--project", type=Path, default=None,
                   help="starter project directory (default: config initial_project)")

    p = sub.add_parser("distribute-tests", help="publish the test bundle")
    _common(p)

    p = sub.add_parser("collect", help="export submissions to disk")
    _common(p)
    p.add_argument("--which", choices=["lab", "home"], required=True)

    p = sub.add_parser("grade", help="run tests, compute churn, write grades.csv")
    _common(p)
    p.add_argument("--workers", type=int, default=4)

    p = sub.add_parser("comply", help="process-compliance statistics")
    _common(p)

    p = sub.add_parser("churn", help="line churn between two directories")
    p.add_argument("before", type=Path)
    p.add_argument("after", type=Path)
    p.add_argument("--ignore", action="append", default=None, metavar="GLOB")
    p.add_argument("--config", type=Path, default=None,
                   help="optional session config supplying ignore globs")

    p = sub.add_parser("watch", help="continuously test new commits")
    _common(p)
    p.add_argument("--interval", type=float, default=30.0)
    p.add_argument("--polls", type=int, default=None, help="stop after N polls")

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(
        level=logging.INFO, stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(message)s",
    )
    args = _build_parser().parse_args(argv)

    try:
        if args.command == "churn":
            ignore = None if args.ignore is None else tuple(args.ignore)
            if args.config is not None:
                session = _load_config(args.config)
                ignore = session.churn_ignore + (ignore or ())
            elif ignore is None:
                ignore = DEFAULT_CHURN_IGNORE
            return cmd_churn(args.before, args.after, ignore)

        session = _load_config(args.config)
        session_dir = args.session_dir or Path("sessions") / session.session_id
        session_dir.mkdir(parents=True, exist_ok=True)
        adapter = vcs.GitAdapter(session_dir / "repos")
        lock = _session_lock(session_dir)
        try:
            lock.acquire(timeout=0)
        except Timeout:
            log.error("another examforge command is running in %s", session_dir)
            return EXIT_VALIDATION
        try:
            if args.command == "provision":
                if args.project is not None:
                    project_dir = args.project
                elif session.initial_project is not None:
                    project_dir = Path(session.initial_project)
                else:
                    log.error("no starter project: pass --project or set initial_project")
                    return EXIT_VALIDATION
                return cmd_provision(session, session_dir, adapter, project_dir)
            if args.command == "distribute-tests":
                return cmd_distribute_tests(
                    session, session_dir, adapter, Path(session.test_artifact)
                )
            if args.command == "collect":
                return cmd_collect(session, session_dir, adapter, args.which)
            if args.command == "grade":
                return cmd_grade(session, session_dir, args.workers)
            if args.command == "comply":
                return cmd_comply(session, session_dir, adapter)
            if args.command == "watch":
                return cmd_watch(session, session_dir, adapter, args.interval, args.polls)
            raise AssertionError(f"unhandled command {args.command}")
        finally:
            lock.release()
    except (MalformedConfig, InvalidField, MalformedCsv, DuplicateStudent,
            RepoExists, RepoMissing, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    except (StorageFailure, ExamForgeError) as exc:
        log.error("%s", exc)
        return EXIT_INFRA
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_INFRA


if __name__ == "__main__":
    sys.exit(main())
