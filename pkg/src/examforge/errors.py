"""Exception hierarchy shared by all examforge modules."""


class ExamForgeError(Exception):
    """Base class for all errors raised by this package."""


class MalformedConfig(ExamForgeError):
    """Session config document is not syntactically valid."""


class InvalidField(ExamForgeError):
    """A config field violates an invariant; carries the field path."""

    def __init__(self, field: str, reason: str = ""):
        self.field = field
        msg = field if not reason else f"{field}: {reason}"
        super().__init__(msg)


class MalformedCsv(ExamForgeError):
    """Roster CSV is missing the expected header or structure."""


class DuplicateStudent(ExamForgeError):
    def __init__(self, student: str):
        self.student = student
        super().__init__(f"duplicate roster entry: {student}")


class RepoExists(ExamForgeError):
    def __init__(self, student: str):
        self.student = student
        super().__init__(f"repository already exists for {student}")


class RepoMissing(ExamForgeError):
    pass


class RevisionMissing(ExamForgeError):
    pass


class StorageFailure(ExamForgeError):
    pass


class SeedFailure(ExamForgeError):
    def __init__(self, student: str, reason: str):
        self.student = student
        self.reason = reason
        super().__init__(f"seeding failed for {student}: {reason}")


class InvariantViolation(ExamForgeError):
    """Repository history breaks a structural invariant (e.g. timestamp order)."""


class SnapshotEmpty(ExamForgeError):
    pass


class DiskFull(ExamForgeError):
    pass


class MalformedReport(ExamForgeError):
    """Test report violates the schema; carries the offending element."""

    def __init__(self, element: str, reason: str = ""):
        self.element = element
        msg = element if not reason else f"{element}: {reason}"
        super().__init__(msg)


class NotGradable(ExamForgeError):
    """Run outcome was an infrastructure error; must be retried, never scored."""


class InconsistentInputs(ExamForgeError):
    """Grade assembly received a combination of inputs that cannot occur."""
