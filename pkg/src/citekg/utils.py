"""Small shared helpers: RNG coercion, hashing, canonical JSON, dates."""

from __future__ import annotations

import datetime
import hashlib
import json

import numpy as np

EPOCH = datetime.date(1970, 1, 1).toordinal()

#: Sentinel for "no publication date" in day-resolution date arrays.
NO_DATE = np.iinfo(np.int64).min


def as_rng(seed) -> np.random.Generator:
    """Coerce ``seed`` (None, int, or Generator) into a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def parse_date(text: str) -> int:
    """ISO-8601 calendar date -> integer days since 1970-01-01."""
    return datetime.date.fromisoformat(text).toordinal() - EPOCH


def format_date(days: int) -> str:
    return datetime.date.fromordinal(int(days) + EPOCH).isoformat()


def canonical_json(obj) -> str:
    """Deterministic JSON encoding (sorted keys, fixed separators)."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
