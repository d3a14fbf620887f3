"""Isolated, cached, parallel execution of the acceptance suite.

Each project runs in its own child process inside its own throwaway
workspace; the test bundle is read from its origin exactly once per batch
and copied read-only into every workspace. That preserves the two contracts
that make batch grading safe: load-once for the shared artifact and full
isolation between student projects (same-named files never interfere).
"""
from __future__ import annotations

import enum
import errno
import os
import shlex
import shutil
import subprocess
import tempfile
import time
import xml.etree.ElementTree as ET
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import DiskFull, MalformedReport, NotGradable, SnapshotEmpty, StorageFailure
from .model import ExamSession
from .trees import write_tree
from .vcs import ProjectSnapshot

LOG_EXCERPT_CHARS = 2000
COMPILE_MARKERS = ("error:", "SyntaxError")
TESTS_SUBDIR = ".tests"
REPORT_BASENAME = "report.xml"


class Outcome(enum.Enum):
    REPORT = "Report"
    COMPILE_ERROR = "CompileError"
    TIMEOUT = "Timeout"
    INFRA_ERROR = "InfraError"


@dataclass(frozen=True)
class TestCaseResult:
    suite_name: str
    case_name: str
    outcome: str  # Passed | Failed | Errored | Skipped
    message: Optional[str] = None


@dataclass(frozen=True)
class TestReport:
    total: int
    passed: int
    failed: int
    errored: int
    skipped: int
    cases: tuple[TestCaseResult, ...]


@dataclass(frozen=True)
class RunOutcome:
    student: str
    kind: Outcome
    duration: float
    log_excerpt: str = ""
    report: Optional[TestReport] = None


class ArtifactCache:
    """Reads the test bundle from its origin once and serves it from memory."""

    def __init__(self, origin: Path):
        self.origin = Path(origin)
        self.origin_reads = 0
        self._data: Optional[bytes] = None

    @property
    def filename(self) -> str:
        return self.origin.name

    def data(self) -> bytes:
        if self._data is None:
            try:
                self._data = self.origin.read_bytes()
            except OSError as exc:
                raise StorageFailure(f"cannot read test artifact: {exc}") from None
            self.origin_reads += 1
        return self._data


@dataclass(frozen=True)
class Workspace:
    path: Path
    tests: Path
    report: Path


def materialize_workspace(
    snapshot: ProjectSnapshot, cache: ArtifactCache, root: Optional[Path] = None
) -> Workspace:
    """Write a snapshot plus a read-only copy of the test bundle to a fresh dir.

    Layout: <random parent>/ws/ holds the project, with the bundle under
    ws/.tests/ and the report target outside the project dir so a project
    cannot pre-plant a fake report. The random parent means sibling
    workspaces are not addressable by guessable relative paths.
    """
    if not snapshot.files:
        raise SnapshotEmpty(snapshot.student)
    try:
        parent = Path(tempfile.mkdtemp(prefix=f"exam-{snapshot.student}-", dir=root))
        ws = parent / "ws"
        write_tree(ws, snapshot.files)
        tests_dir = ws / TESTS_SUBDIR
        if tests_dir.exists() and not tests_dir.is_dir():
            tests_dir.unlink()
        tests_dir.mkdir(exist_ok=True)
        bundle = tests_dir / cache.filename
        bundle.write_bytes(cache.data())
        bundle.chmod(0o444)
    except OSError as exc:
        if exc.errno == errno.ENOSPC:
            raise DiskFull(str(exc)) from None
        raise
    return Workspace(path=ws, tests=bundle, report=parent / REPORT_BASENAME)


def cleanup_workspace(workspace: Workspace) -> None:
    shutil.rmtree(workspace.path.parent, ignore_errors=True)


def _substitute(template: str, workspace: Workspace) -> list[str]:
    mapping = {
        "{workspace}": str(workspace.path),
        "{tests}": str(workspace.tests),
        "{report}": str(workspace.report),
    }
    argv = []
    for token in shlex.split(template):
        for placeholder, value in mapping.items():
            token = token.replace(placeholder, value)
        argv.append(token)
    return argv


def run_test_suite(
    workspace: Workspace, command_template: str, timeout: float, student: str = ""
) -> RunOutcome:
    """Run the harness command in a child process and classify the result.

    Report file produced and parseable wins regardless of exit code (test
    harnesses exit nonzero on failing tests); a nonzero exit with compiler
    diagnostics and no report is a CompileError; exceeding the wall clock is
    a Timeout; anything else is an InfraError that must be retried.
    """
    argv = _substitute(command_template, workspace)
    if workspace.report.exists():
        workspace.report.unlink()
    start = time.monotonic()
    timed_out = False
    try:
        proc = subprocess.Popen(
            argv,
            cwd=workspace.path,
            stdout=subprocess.PIPE,
            stderr=subprocess.STDOUT,
            start_new_session=True,
        )
    except OSError as exc:
        return RunOutcome(student, Outcome.INFRA_ERROR, 0.0, f"spawn failed: {exc}")
    try:
        output, _ = proc.communicate(timeout=timeout)
    except subprocess.TimeoutExpired:
        timed_out = True
        _kill_process_group(proc)
        output, _ = proc.communicate()
    duration = time.monotonic() - start
    text = (output or b"").decode("utf-8", errors="replace")
    excerpt = text[-LOG_EXCERPT_CHARS:]

    if workspace.report.exists():
        try:
            report = parse_test_report(workspace.report.read_text())
        except (MalformedReport, OSError) as exc:
            return RunOutcome(
                student, Outcome.INFRA_ERROR, duration, f"bad report: {exc}\n{excerpt}"
            )
        return RunOutcome(student, Outcome.REPORT, duration, excerpt, report)
    if timed_out:
        return RunOutcome(student, Outcome.TIMEOUT, duration, excerpt)
    if proc.returncode != 0 and any(marker in text for marker in COMPILE_MARKERS):
        return RunOutcome(student, Outcome.COMPILE_ERROR, duration, excerpt)
    return RunOutcome(student, Outcome.INFRA_ERROR, duration, excerpt)


def _kill_process_group(proc: subprocess.Popen) -> None:
    try:
        os.killpg(proc.pid, 9)
    except (ProcessLookupError, PermissionError):
        proc.kill()


def parse_test_report(xml_text: str) -> TestReport:
    """Parse the XML test-report subset: one <testsuite> of <testcase> elements.

    Each case may contain exactly one of <failure>, <error>, <skipped>.
    Suite-level counts must agree with the per-case elements; disagreement
    means the harness is broken and the report is rejected.
    """
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise MalformedReport("document", str(exc)) from None
    if root.tag != "testsuite":
        raise MalformedReport(root.tag, "root element must be 'testsuite'")

    def _count_attr(name: str, default: Optional[int] = None) -> int:
        raw = root.get(name)
        if raw is None:
            if default is None:
                raise MalformedReport("testsuite", f"missing attribute {name!r}")
            return default
        try:
            value = int(raw)
        except ValueError:
            raise MalformedReport("testsuite", f"attribute {name!r} is not an integer") from None
        if value < 0:
            raise MalformedReport("testsuite", f"attribute {name!r} is negative")
        return value

    declared_total = _count_attr("tests")
    declared_failed = _count_attr("failures", 0)
    declared_errored = _count_attr("errors", 0)
    declared_skipped = _count_attr("skipped", 0)

    cases: list[TestCaseResult] = []
    failed = errored = skipped = 0
    for element in root:
        if element.tag != "testcase":
            raise MalformedReport(element.tag, "unexpected element in testsuite")
        suite = element.get("classname")
        name = element.get("name")
        if suite is None or name is None:
            raise MalformedReport("testcase", "missing classname or name attribute")
        verdicts = list(element)
        if len(verdicts) > 1:
            raise MalformedReport(
                "testcase", f"{name!r} has multiple verdict children"
            )
        if not verdicts:
            cases.append(TestCaseResult(suite, name, "Passed"))
            continue
        child = verdicts[0]
        message = child.get("message")
        if child.tag == "failure":
            failed += 1
            cases.append(TestCaseResult(suite, name, "Failed", message))
        elif child.tag == "error":
            errored += 1
            cases.append(TestCaseResult(suite, name, "Errored", message))
        elif child.tag == "skipped":
            skipped += 1
            cases.append(TestCaseResult(suite, name, "Skipped", message))
        else:
            raise MalformedReport(child.tag, f"unknown verdict in case {name!r}")

    if declared_total != len(cases):
        raise MalformedReport(
            "testsuite", f"tests={declared_total} but {len(cases)} testcase elements"
        )
    if (declared_failed, declared_errored, declared_skipped) != (failed, errored, skipped):
        raise MalformedReport("testsuite", "attribute counts disagree with case elements")
    return TestReport(
        total=len(cases),
        passed=len(cases) - failed - errored - skipped,
        failed=failed,
        errored=errored,
        skipped=skipped,
        cases=tuple(cases),
    )


def compute_pass_fraction(outcome: RunOutcome) -> float:
    """Fraction of tests passed; compile errors and timeouts score 0.

    Infrastructure errors are never scored: silently giving such a student
    a 0 would grade the grader, so they raise and the run must be retried.
    Skipped tests are not passed tests.
    """
    if outcome.kind is Outcome.INFRA_ERROR:
        raise NotGradable(outcome.student)
    if outcome.kind in (Outcome.COMPILE_ERROR, Outcome.TIMEOUT):
        return 0.0
    assert outcome.report is not None
    if outcome.report.total == 0:
        return 0.0
    return outcome.report.passed / outcome.report.total


def grade_batch(
    snapshots: list[ProjectSnapshot],
    session: ExamSession,
    workers: int,
    batch_root: Optional[Path] = None,
    cache: Optional[ArtifactCache] = None,
) -> list[RunOutcome]:
    """Run the suite against every snapshot with a pool of worker threads.

    Output is sorted by student id and, durations aside, independent of the
    worker count. Workers spend their time in child processes, so threads
    saturate the machine without the cost of process-pool plumbing.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if cache is None:
        cache = ArtifactCache(Path(session.test_artifact))
    cache.data()  # cache-once: fetch before workers fan out
    own_root = batch_root is None
    root = Path(tempfile.mkdtemp(prefix="exam-batch-")) if own_root else batch_root

    def _one(snapshot: ProjectSnapshot) -> RunOutcome:
        try:
            workspace = materialize_workspace(snapshot, cache, root)
        except SnapshotEmpty:
            return RunOutcome(snapshot.student, Outcome.INFRA_ERROR, 0.0, "empty snapshot")
        try:
            return run_test_suite(
                workspace, session.test_command, session.test_timeout, snapshot.student
            )
        finally:
            cleanup_workspace(workspace)

    try:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_one, snapshots))
    finally:
        if own_root:
            shutil.rmtree(root, ignore_errors=True)
    return sorted(outcomes, key=lambda o: o.student)
