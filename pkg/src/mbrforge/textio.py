"""Plain-text segment files and atomic output writing.

Segment files are UTF-8, one segment per line, LF line endings; a trailing
LF on the final line is optional and ignored on read.  All writers go
through a temp-file-plus-rename so a failed run never leaves a truncated
output behind.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

from .errors import AlignmentError


def read_segments(path: str | Path) -> list[str]:
    """Read one segment per line.  An empty file has zero segments."""
    raw = Path(path).read_text(encoding="utf-8")
    if raw == "":
        return []
    if raw.endswith("\n"):
        raw = raw[:-1]
    return raw.split("\n")


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_segments(path: str | Path, segments: list[str]) -> None:
    """Write one segment per line, each terminated by LF."""
    for seg in segments:
        if "\n" in seg:
            raise ValueError("segments must not contain embedded newlines")
    atomic_write_text(path, "".join(s + "\n" for s in segments))


def require_aligned(counts: dict[str, int]) -> None:
    """Raise AlignmentError naming every input and its line count if they differ."""
    if len(set(counts.values())) > 1:
        detail = ", ".join(f"{name}: {n} lines" for name, n in counts.items())
        raise AlignmentError(f"inputs are not aligned ({detail})")
