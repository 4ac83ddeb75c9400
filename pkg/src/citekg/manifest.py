"""Run manifests: every CLI command writes one next to its outputs.

A manifest echoes the fully-resolved configuration (defaults included)
and a content hash per input file, so any reported number traces back
to config + inputs. Wall-clock fields live only here and in progress
logs; all other artifacts are deterministic for a fixed seed in
single-worker mode.
"""

from __future__ import annotations

import datetime
import json
import os

from . import __version__
from .utils import sha256_file


def write_manifest(out_path, command: str, config: dict, inputs: dict,
                   outputs=None, warnings=None, started=None):
    record = {
        "command": command,
        "version": __version__,
        "config": _jsonable(config),
        "input_hashes": {name: sha256_file(path)
                         for name, path in inputs.items()
                         if path is not None and os.path.exists(path)},
        "outputs": sorted(str(p) for p in (outputs or [])),
        "warnings": warnings or {},
        "started": started,
        "finished": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return record


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "item"):
        return value.item()
    return value
