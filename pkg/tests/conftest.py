from __future__ import annotations

import json
import sys
from datetime import datetime, timezone

import pytest
from hypothesis import settings

from examforge.model import ExamSession, GradingConstants
from examforge.vcs import MemoryAdapter

settings.register_profile("examforge", deadline=None)
settings.load_profile("examforge")

DEADLINE = datetime(2024, 6, 1, 12, 0, 0, tzinfo=timezone.utc)

# Stand-in for the acceptance-test harness: reads marks.json from the
# project under test and behaves accordingly (pass counts, compile errors,
# hangs, adversarial relative-path writes).
STUB_GRADER = '''\
import json
import os
import sys
import time

workspace, tests, report = sys.argv[1], sys.argv[2], sys.argv[3]
plan = {}
plan_path = os.path.join(workspace, "marks.json")
if os.path.exists(plan_path):
    with open(plan_path) as fh:
        plan = json.load(fh)
time.sleep(plan.get("sleep", 0.0))
for rel in plan.get("write", []):
    directory = os.path.dirname(rel)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(rel, "w") as fh:
        fh.write("intrusion from " + workspace)
with open(tests, "rb") as fh:
    fh.read()
if plan.get("compile_error"):
    sys.stderr.write("Main.java:7: error: ';' expected\\n")
    sys.exit(2)
if plan.get("hang"):
    time.sleep(600)
if plan.get("no_report"):
    sys.exit(plan.get("exit_code", 3))
total = plan.get("total", 20)
failed = plan.get("failed", 0)
errored = plan.get("errored", 0)
skipped = plan.get("skipped", 0)
lines = [
    '<testsuite tests="%d" failures="%d" errors="%d" skipped="%d">'
    % (total, failed, errored, skipped)
]
for i in range(total):
    if i < failed:
        lines.append(
            '<testcase classname="suite" name="t%02d">'
            '<failure message="assertion failed"/></testcase>' % i
        )
    elif i < failed + errored:
        lines.append(
            '<testcase classname="suite" name="t%02d">'
            '<error message="unexpected exception"/></testcase>' % i
        )
    elif i < failed + errored + skipped:
        lines.append('<testcase classname="suite" name="t%02d"><skipped/></testcase>' % i)
    else:
        lines.append('<testcase classname="suite" name="t%02d"/>' % i)
lines.append("</testsuite>")
with open(report, "w") as fh:
    fh.write("\\n".join(lines))
sys.exit(1 if failed or errored else 0)
'''


def marks(**plan) -> bytes:
    """One-line marks.json content for the stub grader."""
    return json.dumps(plan).encode()


@pytest.fixture(scope="session")
def stub_grader(tmp_path_factory):
    path = tmp_path_factory.mktemp("harness") / "stub_grader.py"
    path.write_text(STUB_GRADER)
    return path


@pytest.fixture(scope="session")
def artifact_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("artifact") / "suite.bundle"
    path.write_bytes(b"ACCEPTANCE-SUITE-v1\n" + bytes(range(256)))
    return path


@pytest.fixture
def make_session(stub_grader, artifact_file):
    def _make(**overrides) -> ExamSession:
        fields = dict(
            session_id="june-2024",
            deadline=DEADLINE,
            constants=GradingConstants(c0=3.0, c1=27.0, c2=100.0),
            requirement_sections=4,
            test_command=f"{sys.executable} {stub_grader} {{workspace}} {{tests}} {{report}}",
            test_artifact=str(artifact_file),
            roster=("s1", "s2", "s3"),
            test_timeout=20.0,
        )
        fields.update(overrides)
        return ExamSession(**fields)

    return _make


@pytest.fixture
def adapter():
    return MemoryAdapter()
