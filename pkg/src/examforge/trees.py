"""File-tree helpers: in-memory trees are mappings of posix relpath -> bytes."""
from __future__ import annotations

from pathlib import Path
from typing import Mapping

from .errors import StorageFailure


def check_relpath(path: str) -> str:
    """Reject absolute paths and parent-directory escapes."""
    if not path or path.startswith("/") or path.startswith("\\"):
        raise StorageFailure(f"unsafe tree path: {path!r}")
    if any(part in ("", "..") for part in path.split("/")):
        raise StorageFailure(f"unsafe tree path: {path!r}")
    return path


def read_tree(root: Path) -> dict[str, bytes]:
    files: dict[str, bytes] = {}
    for entry in sorted(root.rglob("*")):
        if entry.is_file() and not entry.is_symlink():
            files[entry.relative_to(root).as_posix()] = entry.read_bytes()
    return files


def write_tree(root: Path, files: Mapping[str, bytes]) -> None:
    root.mkdir(parents=True, exist_ok=True)
    for path, data in files.items():
        check_relpath(path)
        target = root / path
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(data)
