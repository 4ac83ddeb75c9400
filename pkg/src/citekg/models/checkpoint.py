"""Binary checkpoint container shared by shallow models and encoders.

Layout (little-endian)::

    magic (4 bytes)  u32 version  u32 header_len
    header JSON (utf-8, canonical key order)
    one float32 blob per entry of header["tables"], in listed order

The header carries model kind, dimensions, entity/relation counts, the
training config, the step counter, and the RNG state, so a reloaded
checkpoint can resume deterministically. Saving a loaded checkpoint
reproduces the file byte for byte.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from ..errors import ParseError
from ..utils import canonical_json, sha256_bytes

MAGIC_SHALLOW = b"KGE1"
MAGIC_ENCODER = b"KGI1"
_VERSION = 1


@dataclass
class Checkpoint:
    """Named float tables plus a free-form JSON metadata dict."""

    kind: str                       # "shallow" | "encoder"
    meta: dict
    tables: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def magic(self) -> bytes:
        return MAGIC_SHALLOW if self.kind == "shallow" else MAGIC_ENCODER

    def to_bytes(self) -> bytes:
        names = sorted(self.tables)
        header = dict(self.meta)
        header["tables"] = [{"name": n, "shape": list(self.tables[n].shape)}
                            for n in names]
        raw = canonical_json(header).encode("utf-8")
        parts = [self.magic, struct.pack("<II", _VERSION, len(raw)), raw]
        for n in names:
            parts.append(np.ascontiguousarray(
                self.tables[n], dtype="<f4").tobytes())
        return b"".join(parts)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    def content_hash(self) -> str:
        return sha256_bytes(self.to_bytes())

    @classmethod
    def from_bytes(cls, data: bytes, path=None) -> "Checkpoint":
        magic = data[:4]
        if magic == MAGIC_SHALLOW:
            kind = "shallow"
        elif magic == MAGIC_ENCODER:
            kind = "encoder"
        else:
            raise ParseError(f"bad checkpoint magic {magic!r}", path)
        version, header_len = struct.unpack("<II", data[4:12])
        if version != _VERSION:
            raise ParseError(f"unsupported checkpoint version {version}", path)
        header = json.loads(data[12:12 + header_len].decode("utf-8"))
        offset = 12 + header_len
        tables = {}
        for entry in header.pop("tables"):
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            blob = data[offset:offset + 4 * count]
            if len(blob) != 4 * count:
                raise ParseError("truncated checkpoint", path)
            tables[entry["name"]] = np.frombuffer(
                blob, dtype="<f4").reshape(shape).astype(np.float64)
            offset += 4 * count
        return cls(kind=kind, meta=header, tables=tables)

    @classmethod
    def load(cls, path) -> "Checkpoint":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read(), path=path)
