"""Shared helpers: float formatting for text artifacts and atomic multi-file writes.

Every float that lands in a text artifact goes through :func:`fmt` so that
independently produced outputs can be compared byte-for-byte.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

FLOAT_FMT = "%.10g"


def fmt(value) -> str:
    """Render a float with 10 significant digits (empty string for None)."""
    if value is None:
        return ""
    return FLOAT_FMT % float(value)


def roundtrip(value):
    """Quantize a float to the precision used in text artifacts."""
    if value is None:
        return None
    return float(fmt(value))


def canonical_json(obj) -> str:
    """Stable JSON rendering: sorted keys, 2-space indent, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class StagedWrites:
    """Two-phase file writer: stage everything, then publish with renames.

    Payloads are written to temporary siblings first; only after every payload
    has been flushed to disk are the final names created.  A failure while
    staging leaves previous outputs untouched.
    """

    def __init__(self):
        self._staged: list[tuple[Path, Path]] = []

    def add_text(self, path, text: str):
        self.add_bytes(path, text.encode("utf-8"))

    def add_bytes(self, path, data: bytes):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.parent / (path.name + ".tmp")
        with open(tmp, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        self._staged.append((tmp, path))

    def commit(self) -> list[Path]:
        published = []
        for tmp, path in self._staged:
            os.replace(tmp, path)
            published.append(path)
        self._staged.clear()
        return published

    def abort(self):
        for tmp, _ in self._staged:
            try:
                os.unlink(tmp)
            except OSError:
                pass
        self._staged.clear()
