"""Small shared helpers: deterministic float formatting, CSV writing, hashing."""

from __future__ import annotations

import hashlib
import json
from typing import Iterable, Sequence


def fmt(x) -> str:
    """Shortest round-trip decimal form of a float (byte-stable across runs)."""
    return repr(float(x))


def config_hash(config: dict) -> str:
    """First 16 hex digits of the SHA-256 of the canonical JSON encoding."""
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence],
              comments: Sequence[str] = ()) -> None:
    """Write a CSV file with optional leading '#' comment lines.

    All cells are formatted with ``fmt`` when numeric, written verbatim when
    already strings, so identical inputs give byte-identical files.
    """
    with open(path, "w", newline="\n") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            cells = [c if isinstance(c, str) else fmt(c) for c in row]
            fh.write(",".join(cells) + "\n")
