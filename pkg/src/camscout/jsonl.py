"""Line-delimited JSON logs with line-atomic appends.

Each record is written with a single ``write`` on an ``O_APPEND`` descriptor,
so a crash leaves at worst one torn final line. Readers skip lines that do
not parse, and writers start a fresh line if the file does not end in one.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Iterator

log = logging.getLogger(__name__)


def encode(record: dict[str, Any]) -> bytes:
    return (json.dumps(record, separators=(",", ":"), ensure_ascii=False) + "\n").encode("utf-8")


def _ends_with_newline(fd: int) -> bool:
    size = os.fstat(fd).st_size
    if size == 0:
        return True
    return os.pread(fd, 1, size - 1) == b"\n"


def append(path: str | os.PathLike, records: Iterable[dict[str, Any]], fsync: bool = False) -> None:
    """Append records, one per line."""
    data = b"".join(encode(r) for r in records)
    if not data:
        return
    fd = os.open(path, os.O_RDWR | os.O_APPEND | os.O_CREAT, 0o644)
    try:
        if not _ends_with_newline(fd):
            data = b"\n" + data
        view = memoryview(data)
        while view:
            n = os.write(fd, view)
            view = view[n:]
        if fsync:
            os.fsync(fd)
    finally:
        os.close(fd)


def read(path: str | os.PathLike) -> Iterator[dict[str, Any]]:
    """Yield every well-formed object line; missing file yields nothing."""
    try:
        handle = open(path, "rb")
    except FileNotFoundError:
        return
    with handle:
        for lineno, raw in enumerate(handle, 1):
            text = raw.strip()
            if not text:
                continue
            try:
                obj = json.loads(text)
            except (json.JSONDecodeError, UnicodeDecodeError):
                log.warning("skipping unparseable line %s:%d", path, lineno)
                continue
            if isinstance(obj, dict):
                yield obj
            else:
                log.warning("skipping non-object line %s:%d", path, lineno)


def rewrite(path: str | os.PathLike, records: Iterable[dict[str, Any]]) -> None:
    """Atomically replace the file with ``records``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as out:
            for r in records:
                out.write(encode(r))
            out.flush()
            os.fsync(out.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
