"""Per-student repository lifecycle behind a pluggable version-control adapter.

Isolation rule: one repository per student per session, so nothing a student
does can touch anybody else's history. Deadline rule: the lab version is the
latest student commit strictly before the session deadline, at second
precision; a commit stamped exactly at the deadline does not count.

Two adapters are provided: ``GitAdapter`` drives the ``git`` CLI over local
bare repositories, ``MemoryAdapter`` is a deterministic in-memory fake for
tests (it also logs every call so tests can prove isolation).
"""
from __future__ import annotations

import os
import secrets
import subprocess
import tempfile
from abc import ABC, abstractmethod
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Mapping, Optional

from .errors import (
    ExamForgeError,
    InvariantViolation,
    RepoExists,
    RepoMissing,
    RevisionMissing,
    SeedFailure,
    StorageFailure,
)
from .model import ExamSession, StudentId
from .trees import check_relpath, write_tree

TEST_REPO_BASENAME = "_tests"
MIN_TOKEN_LENGTH = 16


@dataclass(frozen=True)
class Credential:
    username: str
    token: str


@dataclass(frozen=True)
class RepoHandle:
    student: StudentId
    uri: str
    credentials: Optional[Credential] = None


@dataclass(frozen=True)
class CommitRecord:
    revision: str
    author: str
    timestamp: datetime
    message: str


@dataclass(frozen=True)
class ProjectSnapshot:
    student: StudentId
    revision: str
    files: Mapping[str, bytes]


@dataclass
class SeedReport:
    revisions: dict[StudentId, str]
    failures: list[SeedFailure]


class VcsAdapter(ABC):
    """Primitive repository operations the gateway builds on."""

    @abstractmethod
    def create_repo(self, name: str) -> str:
        """Create an empty repository; returns its uri. Fails if it exists."""

    @abstractmethod
    def repo_exists(self, name: str) -> bool: ...

    @abstractmethod
    def repo_uri(self, name: str) -> str:
        """Uri of an existing repository."""

    @abstractmethod
    def commit_tree(
        self,
        uri: str,
        files: Mapping[str, bytes],
        author: str,
        message: str,
        timestamp: Optional[datetime] = None,
    ) -> str:
        """Commit so the repository content becomes exactly ``files``."""

    @abstractmethod
    def list_commits(self, uri: str) -> list[CommitRecord]:
        """Full history, oldest first."""

    @abstractmethod
    def read_tree(self, uri: str, revision: str) -> dict[str, bytes]: ...


@dataclass
class _MemCommit:
    revision: str
    author: str
    timestamp: datetime
    message: str
    files: dict[str, bytes]


class MemoryAdapter(VcsAdapter):
    """Deterministic in-memory adapter for tests.

    Commit timestamps may be pinned explicitly; otherwise an internal clock
    advances one second per commit. ``op_log`` records (operation, repo name)
    for isolation assertions.
    """

    def __init__(self, start: Optional[datetime] = None):
        self._repos: dict[str, list[_MemCommit]] = {}
        self._clock = start or datetime(2020, 1, 1, tzinfo=timezone.utc)
        self._seq = 0
        self.op_log: list[tuple[str, str]] = []

    @staticmethod
    def _name(uri: str) -> str:
        if not uri.startswith("mem://"):
            raise RepoMissing(uri)
        return uri[len("mem://"):]

    def _tick(self) -> datetime:
        self._clock += timedelta(seconds=1)
        return self._clock

    def _history(self, uri: str) -> list[_MemCommit]:
        name = self._name(uri)
        if name not in self._repos:
            raise RepoMissing(uri)
        return self._repos[name]

    def create_repo(self, name: str) -> str:
        self.op_log.append(("create", name))
        if name in self._repos:
            raise StorageFailure(f"repository {name} already exists")
        self._repos[name] = []
        return f"mem://{name}"

    def repo_exists(self, name: str) -> bool:
        return name in self._repos

    def repo_uri(self, name: str) -> str:
        if name not in self._repos:
            raise RepoMissing(name)
        return f"mem://{name}"

    def commit_tree(self, uri, files, author, message, timestamp=None):
        history = self._history(uri)
        self.op_log.append(("commit", self._name(uri)))
        for path in files:
            check_relpath(path)
        self._seq += 1
        commit = _MemCommit(
            revision=f"mem-{self._seq:06d}",
            author=author,
            timestamp=timestamp or self._tick(),
            message=message,
            files={p: bytes(d) for p, d in files.items()},
        )
        # keep the internal clock ahead of pinned timestamps so later
        # auto-stamped commits never travel back in time
        if commit.timestamp > self._clock:
            self._clock = commit.timestamp
        history.append(commit)
        return commit.revision

    def list_commits(self, uri: str) -> list[CommitRecord]:
        history = self._history(uri)
        self.op_log.append(("log", self._name(uri)))
        return [CommitRecord(c.revision, c.author, c.timestamp, c.message) for c in history]

    def read_tree(self, uri: str, revision: str) -> dict[str, bytes]:
        history = self._history(uri)
        self.op_log.append(("read", self._name(uri)))
        for commit in history:
            if commit.revision == revision:
                return dict(commit.files)
        raise RevisionMissing(revision)


class GitAdapter(VcsAdapter):
    """Adapter over local bare git repositories driven through the CLI."""

    def __init__(self, root: Path):
        self.root = Path(root)

    def _path(self, name: str) -> Path:
        return self.root / f"{name}.git"

    @staticmethod
    def _run(args: list[str], env: Optional[dict] = None, cwd: Optional[Path] = None) -> str:
        full_env = dict(os.environ)
        if env:
            full_env.update(env)
        proc = subprocess.run(
            args, env=full_env, cwd=cwd, capture_output=True, text=True
        )
        if proc.returncode != 0:
            raise StorageFailure(f"{' '.join(args[:2])} failed: {proc.stderr.strip()}")
        return proc.stdout

    def create_repo(self, name: str) -> str:
        path = self._path(name)
        if path.exists():
            raise StorageFailure(f"repository {name} already exists")
        path.parent.mkdir(parents=True, exist_ok=True)
        self._run(["git", "init", "--bare", "-q", str(path)])
        return str(path)

    def repo_exists(self, name: str) -> bool:
        return self._path(name).exists()

    def repo_uri(self, name: str) -> str:
        path = self._path(name)
        if not path.exists():
            raise RepoMissing(name)
        return str(path)

    def commit_tree(self, uri, files, author, message, timestamp=None):
        if not Path(uri).exists():
            raise RepoMissing(uri)
        with tempfile.TemporaryDirectory(prefix="examforge-commit-") as td:
            worktree = Path(td) / "tree"
            write_tree(worktree, files)
            stamp = timestamp or datetime.now(timezone.utc)
            date = f"{int(stamp.timestamp())} +0000"
            env = {
                "GIT_DIR": uri,
                "GIT_WORK_TREE": str(worktree),
                "GIT_INDEX_FILE": str(Path(td) / "index"),
                "GIT_AUTHOR_NAME": author,
                "GIT_AUTHOR_EMAIL": f"{author.replace(' ', '.')}@exam.local",
                "GIT_COMMITTER_NAME": author,
                "GIT_COMMITTER_EMAIL": f"{author.replace(' ', '.')}@exam.local",
                "GIT_AUTHOR_DATE": date,
                "GIT_COMMITTER_DATE": date,
            }
            self._run(["git", "add", "-A"], env=env, cwd=worktree)
            self._run(["git", "commit", "-q", "--allow-empty", "-m", message],
                      env=env, cwd=worktree)
            return self._run(["git", "rev-parse", "HEAD"], env={"GIT_DIR": uri}).strip()

    def list_commits(self, uri: str) -> list[CommitRecord]:
        if not Path(uri).exists():
            raise RepoMissing(uri)
        try:
            out = self._run(
                ["git", "log", "--reverse", "--format=%H|%an|%ct|%s"],
                env={"GIT_DIR": uri},
            )
        except StorageFailure as exc:
            if "does not have any commits" in str(exc):
                return []
            raise
        records = []
        for line in out.splitlines():
            if not line:
                continue
            revision, author, unix_ts, message = line.split("|", 3)
            records.append(
                CommitRecord(
                    revision=revision,
                    author=author,
                    timestamp=datetime.fromtimestamp(int(unix_ts), tz=timezone.utc),
                    message=message,
                )
            )
        return records

    def read_tree(self, uri: str, revision: str) -> dict[str, bytes]:
        if not Path(uri).exists():
            raise RepoMissing(uri)
        with tempfile.TemporaryDirectory(prefix="examforge-checkout-") as td:
            dest = Path(td) / "co"
            self._run(["git", "clone", "-q", uri, str(dest)])
            try:
                self._run(["git", "checkout", "-q", revision], cwd=dest)
            except StorageFailure as exc:
                raise RevisionMissing(f"{revision}: {exc}") from None
            files: dict[str, bytes] = {}
            for entry in sorted(dest.rglob("*")):
                rel = entry.relative_to(dest)
                if rel.parts and rel.parts[0] == ".git":
                    continue
                if entry.is_file() and not entry.is_symlink():
                    files[rel.as_posix()] = entry.read_bytes()
            return files


def repo_name(session_id: str, student: StudentId) -> str:
    return f"{session_id}/{student}"


def test_repo_name(session_id: str) -> str:
    return f"{session_id}/{TEST_REPO_BASENAME}"


def _new_token(used: set[str]) -> str:
    while True:
        token = secrets.token_urlsafe(24)
        if token not in used and len(token) >= MIN_TOKEN_LENGTH:
            used.add(token)
            return token


def provision_repos(session: ExamSession, adapter: VcsAdapter) -> list[RepoHandle]:
    """Create one fresh repository per roster entry with fresh credentials.

    Refuses to run against a session whose repositories already exist:
    overwriting a provisioned exam would destroy student work.
    """
    if not session.roster:
        raise ValueError("roster is empty; nothing to provision")
    for student in session.roster:
        if adapter.repo_exists(repo_name(session.session_id, student)):
            raise RepoExists(student)
    handles = []
    used_tokens: set[str] = set()
    for student in session.roster:
        try:
            uri = adapter.create_repo(repo_name(session.session_id, student))
        except ExamForgeError:
            raise
        except OSError as exc:
            raise StorageFailure(str(exc)) from None
        handles.append(
            RepoHandle(
                student=student,
                uri=uri,
                credentials=Credential(username=student, token=_new_token(used_tokens)),
            )
        )
    return handles


def seed_initial_project(
    handles: list[RepoHandle],
    project_files: Mapping[str, bytes],
    adapter: VcsAdapter,
    teacher_author: str,
    timestamp: Optional[datetime] = None,
) -> SeedReport:
    """Commit the starter project to every repository as the teacher.

    Keeps going past individual failures and reports them all, so one broken
    repository does not leave the rest of the class without an assignment.
    """
    if not project_files:
        raise ValueError("initial project is empty")
    report = SeedReport(revisions={}, failures=[])
    for handle in handles:
        try:
            report.revisions[handle.student] = adapter.commit_tree(
                handle.uri, project_files, teacher_author, "initial project", timestamp
            )
        except ExamForgeError as exc:
            report.failures.append(SeedFailure(handle.student, str(exc)))
    return report


def list_commits(handle: RepoHandle, adapter: VcsAdapter) -> list[CommitRecord]:
    """Full history, oldest first, with the timestamp-order invariant checked."""
    records = adapter.list_commits(handle.uri)
    for prev, cur in zip(records, records[1:]):
        if cur.timestamp < prev.timestamp:
            raise InvariantViolation(
                f"{handle.student}: commit {cur.revision} predates {prev.revision}"
            )
    return records


def select_lab_revision(
    commits: list[CommitRecord], deadline: datetime, teacher_author: str
) -> Optional[CommitRecord]:
    """Latest student commit strictly before the deadline, if any."""
    chosen = None
    for commit in commits:
        if commit.author != teacher_author and commit.timestamp < deadline:
            chosen = commit
    return chosen


def select_home_revision(
    commits: list[CommitRecord], teacher_author: str
) -> Optional[CommitRecord]:
    """Latest student commit overall, if any."""
    chosen = None
    for commit in commits:
        if commit.author != teacher_author:
            chosen = commit
    return chosen


def snapshot_at(handle: RepoHandle, revision: str, adapter: VcsAdapter) -> ProjectSnapshot:
    return ProjectSnapshot(
        student=handle.student,
        revision=revision,
        files=adapter.read_tree(handle.uri, revision),
    )


def provision_test_repo(session: ExamSession, adapter: VcsAdapter) -> RepoHandle:
    """Get or create the dedicated repository that distributes the test bundle."""
    name = test_repo_name(session.session_id)
    if adapter.repo_exists(name):
        uri = adapter.repo_uri(name)
    else:
        uri = adapter.create_repo(name)
    return RepoHandle(student=TEST_REPO_BASENAME, uri=uri)


def publish_tests(test_repo: RepoHandle, artifact: Path, adapter: VcsAdapter,
                  teacher_author: str) -> str:
    """Commit the acceptance-suite bundle; repeated calls append new revisions."""
    try:
        data = Path(artifact).read_bytes()
    except OSError as exc:
        raise StorageFailure(f"cannot read test artifact: {exc}") from None
    return adapter.commit_tree(
        test_repo.uri, {Path(artifact).name: data}, teacher_author,
        f"update tests: {Path(artifact).name}",
    )


def student_handles(session: ExamSession, adapter: VcsAdapter) -> list[RepoHandle]:
    """Reconstruct handles for an already-provisioned session (no credentials)."""
    handles = []
    for student in session.roster:
        name = repo_name(session.session_id, student)
        if not adapter.repo_exists(name):
            raise RepoMissing(f"repository for {student} not provisioned")
        handles.append(RepoHandle(student=student, uri=adapter.repo_uri(name)))
    return handles
