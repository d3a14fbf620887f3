"""Minimal line diff with a compiled kernel and pure-Python fallback.

The backend is picked once at import time: the Cython extension
``examforge._diff_c`` when it built, else ``examforge._diff_py``. Set
``EXAMFORGE_PURE_DIFF=1`` to force the fallback (used by the benchmark
and for debugging). Both backends produce provably minimal scripts;
consumers may only rely on cost and hunk semantics, not on a particular
hunk layout.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import NamedTuple, Sequence

if os.environ.get("EXAMFORGE_PURE_DIFF") == "1":
    from . import _diff_py as _kernel

    BACKEND = "python"
else:
    try:
        from . import _diff_c as _kernel  # type: ignore[no-redef]

        BACKEND = "c"
    except ImportError:
        from . import _diff_py as _kernel  # type: ignore[no-redef]

        BACKEND = "python"


class Hunk(NamedTuple):
    """One edit run: ``deleted`` source lines at ``a_start`` replaced by
    ``inserted`` target lines at ``b_start`` (either count may be 0)."""

    a_start: int
    deleted: int
    b_start: int
    inserted: int


@dataclass(frozen=True)
class LineDiff:
    """A minimal edit script between two line sequences."""

    hunks: tuple[Hunk, ...]

    @property
    def cost(self) -> int:
        return sum(h.deleted + h.inserted for h in self.hunks)

    @property
    def inserted_total(self) -> int:
        return sum(h.inserted for h in self.hunks)


def _intern(source: Sequence, target: Sequence) -> tuple[list[int], list[int]]:
    ids: dict = {}
    a = [ids.setdefault(line, len(ids)) for line in source]
    b = [ids.setdefault(line, len(ids)) for line in target]
    return a, b


def compute_line_diff(source: Sequence, target: Sequence) -> LineDiff:
    """Diff two line sequences (str or bytes lines; equality is exact)."""
    a, b = _intern(source, target)
    return LineDiff(hunks=tuple(Hunk(*h) for h in _kernel.edit_hunks(a, b)))


def edit_cost(source: Sequence, target: Sequence) -> int:
    """Minimal script cost without materializing hunks."""
    a, b = _intern(source, target)
    return _kernel.edit_cost(a, b)


def apply_diff(source: Sequence, target: Sequence, diff: LineDiff) -> list:
    """Replay ``diff``: equal spans come from source, insertions from target.

    Returns the reconstructed target; equality with the real target is the
    correctness invariant of the script.
    """
    out: list = []
    pos = 0
    for h in diff.hunks:
        out.extend(source[pos:h.a_start])
        out.extend(target[h.b_start:h.b_start + h.inserted])
        pos = h.a_start + h.deleted
    out.extend(source[pos:])
    return out
