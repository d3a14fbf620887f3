"""Code churn between two project snapshots.

Churn is the number of added plus modified lines, measured as the inserted
lines of a minimal line diff: a modified line shows up as one deletion plus
one insertion, so counting insertions counts each modified line once and
each new line once while excluding pure deletions. Churn is therefore
directional: churn(A, B) != churn(B, A) in general.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fnmatch import fnmatch
from typing import Iterable, Mapping

from .linediff import LineDiff, compute_line_diff
from .model import DEFAULT_CHURN_IGNORE

BINARY_SNIFF_BYTES = 8000


def is_binary(data: bytes) -> bool:
    """A file is binary if its first 8000 bytes contain a NUL."""
    return b"\x00" in data[:BINARY_SNIFF_BYTES]


def split_lines(data: bytes) -> list[bytes]:
    """Split into lines with CRLF normalized to LF.

    Lab machines and the test server disagree on line endings; newline
    noise must not count as modification. A trailing newline terminates
    the last line rather than opening an empty one.
    """
    lines = data.replace(b"\r\n", b"\n").split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    return lines


def is_ignored(path: str, ignore: Iterable[str]) -> bool:
    """True if any path component matches any ignore glob."""
    parts = path.split("/")
    return any(fnmatch(part, glob) for part in parts for glob in ignore)


@dataclass(frozen=True)
class ChurnResult:
    per_file: dict[str, int]
    total: int


def compute_file_churn(diff: LineDiff) -> int:
    return diff.inserted_total


def compute_project_churn(
    before: Mapping[str, bytes],
    after: Mapping[str, bytes],
    ignore: Iterable[str] = DEFAULT_CHURN_IGNORE,
) -> ChurnResult:
    """Per-file and total churn between two file trees (path -> bytes).

    A file added in ``after`` counts all its lines; a deleted file counts 0;
    binary and ignored files contribute 0.
    """
    ignore = tuple(ignore)
    per_file: dict[str, int] = {}
    for path in sorted(set(before) | set(after)):
        old = before.get(path)
        new = after.get(path)
        if is_ignored(path, ignore):
            per_file[path] = 0
        elif new is None:
            per_file[path] = 0
        elif is_binary(new) or (old is not None and is_binary(old)):
            per_file[path] = 0
        else:
            old_lines = split_lines(old) if old is not None else []
            per_file[path] = compute_file_churn(compute_line_diff(old_lines, split_lines(new)))
    return ChurnResult(per_file=per_file, total=sum(per_file.values()))


def churn_csv(result: ChurnResult) -> str:
    """CSV rows ``path,churn`` plus a final ``TOTAL`` row."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["path", "churn"])
    for path in sorted(result.per_file):
        writer.writerow([path, result.per_file[path]])
    writer.writerow(["TOTAL", result.total])
    return buf.getvalue()
