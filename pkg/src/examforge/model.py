"""Shared domain types, session configuration, and roster ingestion.

The session config is a single JSON document (see ``load_session``); the
roster is a one-column CSV with header ``student_id``. All values are
immutable after construction and safe to share across workers.
"""
from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from .errors import DuplicateStudent, InvalidField, MalformedConfig, MalformedCsv

# Students are identified by opaque institutional id strings; they end up in
# repository and directory names, hence the character restrictions.
StudentId = str

RESERVED_REPO_NAMES = frozenset({"_tests"})

DEFAULT_TEACHER_AUTHOR = "teacher"
DEFAULT_TEST_TIMEOUT = 300.0
DEFAULT_CHURN_IGNORE = (
    ".git",
    ".svn",
    ".hg",
    "__pycache__",
    "build",
    "bin",
    "target",
    "dist",
    "out",
    ".gradle",
    ".idea",
    ".settings",
    "node_modules",
)


def validate_student_id(raw: str) -> StudentId:
    if not raw:
        raise InvalidField("student_id", "must be non-empty")
    if any(c.isspace() for c in raw) or "/" in raw or "\\" in raw:
        raise InvalidField("student_id", f"{raw!r} contains whitespace or path separators")
    if raw in RESERVED_REPO_NAMES or raw.startswith("_"):
        raise InvalidField("student_id", f"{raw!r} collides with reserved repository names")
    return raw


class Rounding(enum.Enum):
    HALF_UP_INTEGER = "half-up-integer"
    NONE = "none"


@dataclass(frozen=True)
class GradeScale:
    min: float = 0.0
    max: float = 30.0
    rounding: Rounding = Rounding.HALF_UP_INTEGER


@dataclass(frozen=True)
class GradingConstants:
    """Constants of the grade formula: offset, span, and churn half-weight."""

    c0: float
    c1: float
    c2: float

    def __post_init__(self) -> None:
        if not self.c1 > 0:
            raise InvalidField("constants.c1", "must be > 0")
        if not self.c2 > 0:
            raise InvalidField("constants.c2", "must be > 0")


@dataclass(frozen=True)
class ExamSession:
    """Configuration of one exam session.

    ``deadline`` is a UTC timestamp at second precision; commits at or after
    it do not count as lab work. ``requirement_sections`` is the number of
    sections in the assignment text, which drives the process-compliance
    threshold (at least sections + 1 commits).
    """

    session_id: str
    deadline: datetime
    constants: GradingConstants
    requirement_sections: int
    test_command: str
    test_artifact: str
    roster: tuple[StudentId, ...]
    grade_scale: GradeScale = GradeScale()
    teacher_author: str = DEFAULT_TEACHER_AUTHOR
    test_timeout: float = DEFAULT_TEST_TIMEOUT
    churn_ignore: tuple[str, ...] = DEFAULT_CHURN_IGNORE
    initial_project: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.session_id:
            raise InvalidField("session_id", "must be non-empty")
        if self.deadline.tzinfo is None:
            raise InvalidField("deadline", "must be timezone-aware")
        if self.requirement_sections < 1:
            raise InvalidField("requirement_sections", "must be >= 1")
        if not self.grade_scale.min < self.grade_scale.max:
            raise InvalidField("grade_scale", "min must be < max")
        if len(set(self.roster)) != len(self.roster):
            raise InvalidField("roster", "entries must be unique")
        for placeholder in ("{workspace}", "{tests}", "{report}"):
            if placeholder not in self.test_command:
                raise InvalidField("test_command", f"missing {placeholder} placeholder")


class GradeStatus(enum.Enum):
    NO_SHOW = "NoShow"
    DROPOUT = "Dropout"
    COMPILE_ERROR = "CompileError"
    HOME_INCOMPLETE = "HomeIncomplete"
    GRADED = "Graded"


@dataclass(frozen=True)
class GradeRecord:
    """Per-student final outcome of one exam session."""

    student: StudentId
    status: GradeStatus
    s: Optional[float] = None
    m: Optional[int] = None
    raw_grade: Optional[float] = None
    final_grade: Optional[float] = None

    def __post_init__(self) -> None:
        if self.status is GradeStatus.NO_SHOW:
            assert self.s is None and self.m is None
            assert self.raw_grade is None and self.final_grade is None
        if self.status is GradeStatus.GRADED:
            assert None not in (self.s, self.m, self.raw_grade, self.final_grade)


def _parse_deadline(raw: object) -> datetime:
    if not isinstance(raw, str):
        raise InvalidField("deadline", "must be an ISO-8601 UTC string")
    text = raw.replace("Z", "+00:00") if raw.endswith("Z") else raw
    try:
        stamp = datetime.fromisoformat(text)
    except ValueError as exc:
        raise InvalidField("deadline", str(exc)) from None
    if stamp.tzinfo is None:
        raise InvalidField("deadline", "must carry a UTC offset")
    stamp = stamp.astimezone(timezone.utc)
    if stamp.microsecond:
        raise InvalidField("deadline", "second precision only")
    return stamp


def _require(doc: dict, key: str) -> object:
    if key not in doc:
        raise InvalidField(key, "missing required key")
    return doc[key]


def _anchor(path: Path, base_dir: Optional[Path]) -> Path:
    if path.is_absolute() or base_dir is None:
        return path
    return base_dir / path


def _parse_number(value: object, field_name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidField(field_name, "must be a number")
    return float(value)


def ingest_roster(csv_text: str) -> list[StudentId]:
    """Parse the roster CSV (header ``student_id``) into an ordered id list.

    Duplicate ids are rejected, not silently collapsed: a duplicate booking
    means the roster export is broken and provisioning must not proceed.
    """
    reader = csv.reader(io.StringIO(csv_text))
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedCsv("empty roster file") from None
    if header != ["student_id"]:
        raise MalformedCsv(f"expected header 'student_id', got {header!r}")
    roster: list[StudentId] = []
    seen: set[str] = set()
    for row in reader:
        if not row:
            continue
        if len(row) != 1:
            raise MalformedCsv(f"expected one column, got {row!r}")
        student = validate_student_id(row[0])
        if student in seen:
            raise DuplicateStudent(student)
        seen.add(student)
        roster.append(student)
    return roster


def load_session(config_text: str, base_dir: Optional[Path] = None) -> ExamSession:
    """Parse and validate a session config document.

    ``roster_file`` paths are resolved against ``base_dir`` (defaults to the
    working directory). A serialized session carries its roster inline under
    ``roster`` instead; exactly one of the two keys must be present.
    """
    try:
        doc = json.loads(config_text)
    except json.JSONDecodeError as exc:
        raise MalformedConfig(str(exc)) from None
    if not isinstance(doc, dict):
        raise MalformedConfig("top-level value must be an object")

    constants_doc = _require(doc, "constants")
    if not isinstance(constants_doc, dict):
        raise InvalidField("constants", "must be an object")
    constants = GradingConstants(
        c0=_parse_number(_require(constants_doc, "c0"), "constants.c0"),
        c1=_parse_number(_require(constants_doc, "c1"), "constants.c1"),
        c2=_parse_number(_require(constants_doc, "c2"), "constants.c2"),
    )

    sections = _require(doc, "requirement_sections")
    if isinstance(sections, bool) or not isinstance(sections, int):
        raise InvalidField("requirement_sections", "must be an integer")

    scale_doc = doc.get("grade_scale")
    if scale_doc is None:
        scale = GradeScale()
    else:
        if not isinstance(scale_doc, dict):
            raise InvalidField("grade_scale", "must be an object")
        try:
            rounding = Rounding(scale_doc.get("rounding", "half-up-integer"))
        except ValueError:
            raise InvalidField("grade_scale.rounding", f"unknown mode {scale_doc.get('rounding')!r}") from None
        scale = GradeScale(
            min=_parse_number(_require(scale_doc, "min"), "grade_scale.min"),
            max=_parse_number(_require(scale_doc, "max"), "grade_scale.max"),
            rounding=rounding,
        )

    if ("roster" in doc) == ("roster_file" in doc):
        raise InvalidField("roster", "exactly one of 'roster' or 'roster_file' required")
    if "roster" in doc:
        entries = doc["roster"]
        if not isinstance(entries, list) or not all(isinstance(e, str) for e in entries):
            raise InvalidField("roster", "must be a list of strings")
        seen: set[str] = set()
        roster = []
        for entry in entries:
            student = validate_student_id(entry)
            if student in seen:
                raise InvalidField("roster", f"duplicate entry {student!r}")
            seen.add(student)
            roster.append(student)
    else:
        roster_path = (base_dir or Path.cwd()) / str(doc["roster_file"])
        try:
            roster_text = roster_path.read_text()
        except OSError as exc:
            raise InvalidField("roster_file", str(exc)) from None
        try:
            roster = ingest_roster(roster_text)
        except DuplicateStudent as exc:
            raise InvalidField("roster", str(exc)) from None

    session_id = _require(doc, "session_id")
    if not isinstance(session_id, str):
        raise InvalidField("session_id", "must be a string")
    test_command = _require(doc, "test_command")
    if not isinstance(test_command, str):
        raise InvalidField("test_command", "must be a string")
    test_artifact = _require(doc, "test_artifact")
    if not isinstance(test_artifact, str):
        raise InvalidField("test_artifact", "must be a string")
    test_artifact = str(_anchor(Path(test_artifact), base_dir))

    initial_project = doc.get("initial_project")
    if initial_project is not None:
        if not isinstance(initial_project, str):
            raise InvalidField("initial_project", "must be a string")
        initial_project = str(_anchor(Path(initial_project), base_dir))

    ignore = doc.get("churn_ignore")
    if ignore is not None and (
        not isinstance(ignore, list) or not all(isinstance(g, str) for g in ignore)
    ):
        raise InvalidField("churn_ignore", "must be a list of glob strings")

    timeout = doc.get("test_timeout", DEFAULT_TEST_TIMEOUT)
    timeout = _parse_number(timeout, "test_timeout")
    if timeout <= 0:
        raise InvalidField("test_timeout", "must be > 0")

    return ExamSession(
        session_id=session_id,
        deadline=_parse_deadline(_require(doc, "deadline")),
        constants=constants,
        requirement_sections=sections,
        test_command=test_command,
        test_artifact=test_artifact,
        roster=tuple(roster),
        grade_scale=scale,
        teacher_author=str(doc.get("teacher_author", DEFAULT_TEACHER_AUTHOR)),
        test_timeout=timeout,
        churn_ignore=tuple(ignore) if ignore is not None else DEFAULT_CHURN_IGNORE,
        initial_project=initial_project,
    )


def serialize_session(session: ExamSession) -> str:
    """Emit a config document that ``load_session`` parses back identically.

    The roster is embedded inline so the result is self-contained.
    """
    doc = {
        "session_id": session.session_id,
        "deadline": session.deadline.strftime("%Y-%m-%dT%H:%M:%SZ"),
        "constants": {
            "c0": session.constants.c0,
            "c1": session.constants.c1,
            "c2": session.constants.c2,
        },
        "requirement_sections": session.requirement_sections,
        "test_command": session.test_command,
        "test_artifact": session.test_artifact,
        "grade_scale": {
            "min": session.grade_scale.min,
            "max": session.grade_scale.max,
            "rounding": session.grade_scale.rounding.value,
        },
        "roster": list(session.roster),
        "teacher_author": session.teacher_author,
        "test_timeout": session.test_timeout,
        "churn_ignore": list(session.churn_ignore),
    }
    if session.initial_project is not None:
        doc["initial_project"] = session.initial_project
    return json.dumps(doc, indent=2)
