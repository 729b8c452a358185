"""Canonical JSON serialization and digests.

Cache keys and config digests must be stable across runs and platforms,
so every digest in the harness goes through this one serializer: sorted
keys, no insignificant whitespace, UTF-8 bytes.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def sha256_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def digest_obj(obj) -> str:
    """SHA-256 of the canonical serialization of a JSON-able object."""
    return sha256_hex(canonical_json(obj))


def digest_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()
