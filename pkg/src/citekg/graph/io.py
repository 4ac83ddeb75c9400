"""Reading and writing graph stores.

Three input formats:

* Quad TSV (KGTK-compatible column naming): four tab-separated columns
  ``node1  label  node2  time``, time as ISO-8601 date, UTF-8,
  ``#``-prefixed comment lines allowed. Relation labels are the four
  modeled ones (or their Wikidata property aliases); ``main_subject`` /
  ``P921`` rows feed the work->concept side table and ``ancestor`` /
  ``P1038`` rows the concept hierarchy.
* Entity-class sidecar TSV: ``node  class`` with an optional third
  column holding the work's publication date (overrides inference).
* JSON-lines: one entity record per line; a mapping config selects
  field paths (defaults follow the ``id`` / ``type`` /
  ``publication_date`` / ``referenced_works`` / ``authorships`` /
  ``host_venue`` naming).

Binary store format, magic ``KGF1``, all integers little-endian::

    "KGF1"  u32 version  u32 header_len  header JSON (utf-8)
    classes      n_entities * u8
    pub_dates    n_entities * i64
    parent_ids   n_entities * i64
    quads        4 columns (s, r, o, t), each n_quads * i64
    concept_links    2 columns (work, concept), each n_links * i64
    concept_parents  2 columns (child, parent), each n_edges * i64
    labels       n_entities * (u32 byte-length + utf-8 bytes)

The header JSON records counts and the relation vocabulary so loaders
can validate before touching array data.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from ..errors import ParseError, SchemaError
from ..utils import NO_DATE, canonical_json, format_date, parse_date
from .store import (CLASS_IDS, CONCEPT, GraphStore, N_RELATIONS,
                    RELATION_ALIASES, RELATION_DOMAIN, RELATION_IDS,
                    RELATION_LABELS, RELATION_RANGE, WORK, class_name)

_MAGIC = b"KGF1"
_VERSION = 1

# Side-table relation labels (not modeled quads).
_CONCEPT_LINK_LABELS = {"main_subject", "P921"}
_CONCEPT_PARENT_LABELS = {"ancestor", "P1038"}


class _Assembler:
    """Accumulates string-keyed rows, assigns dense ids, infers classes."""

    def __init__(self):
        self.ids: dict[str, int] = {}
        self.labels: list[str] = []
        self.classes: list[int] = []
        self.dates: list[int] = []
        self.quads: list[tuple[int, int, int, int]] = []
        self.concept_links: list[tuple[int, int]] = []
        self.concept_parents: list[tuple[int, int]] = []
        self.warnings: dict[str, int] = {}

    def warn(self, code: str):
        self.warnings[code] = self.warnings.get(code, 0) + 1

    def entity(self, label: str, cls: int, where=None) -> int:
        eid = self.ids.get(label)
        if eid is None:
            eid = len(self.labels)
            self.ids[label] = eid
            self.labels.append(label)
            self.classes.append(cls)
            self.dates.append(NO_DATE)
            return eid
        if self.classes[eid] != cls:
            raise SchemaError(
                f"entity {label!r} used both as {class_name(self.classes[eid])} "
                f"and as {class_name(cls)}" + (f" ({where})" if where else ""))
        return eid

    def set_date(self, eid: int, days: int, override: bool):
        # Inference keeps the earliest governing date; explicit dates win.
        if override:
            self.dates[eid] = days
        elif self.dates[eid] == NO_DATE or days < self.dates[eid]:
            self.dates[eid] = days

    def add_quad(self, s_label, rel, o_label, days, where=None):
        s = self.entity(s_label, RELATION_DOMAIN[rel], where)
        o = self.entity(o_label, RELATION_RANGE[rel], where)
        self.quads.append((s, rel, o, days))
        # Every modeled quad is governed by a work whose publication date
        # is the quad timestamp; use it to infer missing work dates.
        if RELATION_DOMAIN[rel] == WORK:
            self.set_date(s, days, override=False)

    def finish(self) -> GraphStore:
        return GraphStore.from_arrays(
            labels=self.labels, classes=np.asarray(self.classes, dtype=np.uint8),
            pub_dates=np.asarray(self.dates, dtype=np.int64),
            quads=np.asarray(self.quads, dtype=np.int64).reshape(-1, 4),
            concept_links=self.concept_links or None,
            concept_parents=self.concept_parents or None,
        )


def _split_tsv_line(line: str, path, lineno, n_min, n_max):
    cols = line.rstrip("\n").split("\t")
    if not (n_min <= len(cols) <= n_max):
        raise ParseError(f"expected {n_min}..{n_max} tab-separated columns, "
                         f"got {len(cols)}", path, lineno)
    return cols


def _iter_rows(path):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line.startswith("#"):
                continue
            yield lineno, line


def ingest_quads(path, format="tsv", mapping=None, sidecar=None,
                 on_unknown="error"):
    """Parse an edge file into a GraphStore.

    ``on_unknown`` controls rows with unrecognized relation labels:
    ``"error"`` rejects them, ``"skip"`` counts and drops them.
    Returns ``(store, warnings)`` where warnings is a code -> count dict.
    """
    if on_unknown not in ("error", "skip"):
        raise ParseError(f"on_unknown must be 'error' or 'skip', got {on_unknown!r}")
    asm = _Assembler()
    if format == "tsv":
        _ingest_tsv(asm, path, on_unknown)
    elif format == "jsonl":
        _ingest_jsonl(asm, path, mapping or {}, on_unknown)
    else:
        raise ParseError(f"unknown format {format!r}")
    if sidecar is not None:
        _apply_sidecar(asm, sidecar)
    return asm.finish(), dict(asm.warnings)


def _ingest_tsv(asm: _Assembler, path, on_unknown):
    for lineno, line in _iter_rows(path):
        s_label, rel_label, o_label, time_text = _split_tsv_line(
            line, path, lineno, 4, 4)
        try:
            days = parse_date(time_text)
        except ValueError:
            raise ParseError(f"bad ISO date {time_text!r}", path, lineno) from None
        if rel_label in RELATION_IDS or rel_label in RELATION_ALIASES:
            rel = RELATION_IDS.get(rel_label, RELATION_ALIASES.get(rel_label))
            asm.add_quad(s_label, rel, o_label, days, where=f"{path}:{lineno}")
        elif rel_label in _CONCEPT_LINK_LABELS:
            w = asm.entity(s_label, WORK, f"{path}:{lineno}")
            c = asm.entity(o_label, CONCEPT, f"{path}:{lineno}")
            asm.concept_links.append((w, c))
        elif rel_label in _CONCEPT_PARENT_LABELS:
            ch = asm.entity(s_label, CONCEPT, f"{path}:{lineno}")
            pa = asm.entity(o_label, CONCEPT, f"{path}:{lineno}")
            asm.concept_parents.append((ch, pa))
        elif on_unknown == "skip":
            asm.warn(f"skipped_relation:{rel_label}")
        else:
            raise ParseError(f"unknown relation label {rel_label!r}", path, lineno)


def _apply_sidecar(asm: _Assembler, path):
    for lineno, line in _iter_rows(path):
        cols = _split_tsv_line(line, path, lineno, 2, 3)
        label, cls_name = cols[0], cols[1].lower()
        if cls_name not in CLASS_IDS:
            raise ParseError(f"unknown entity class {cls_name!r}", path, lineno)
        eid = asm.entity(label, CLASS_IDS[cls_name], where=f"{path}:{lineno}")
        if len(cols) == 3 and cols[2]:
            try:
                asm.set_date(eid, parse_date(cols[2]), override=True)
            except ValueError:
                raise ParseError(f"bad ISO date {cols[2]!r}", path, lineno) from None


# Default JSON-lines field paths; a mapping config overrides any subset.
DEFAULT_JSONL_MAPPING = {
    "id": "id",
    "type": "type",
    "publication_date": "publication_date",
    "referenced_works": "referenced_works",
    "authorships": "authorships",
    "authorship_author": "author.id",
    "authorship_institutions": "institutions",
    "institution_id": "id",
    "host_venue": "host_venue",
    "venue_id": "id",
    "concepts": "concepts",
    "concept_id": "id",
    "ancestors": "ancestors",
    "ancestor_id": "id",
}

_JSONL_TYPES = {"work": WORK, "author": CLASS_IDS["author"],
                "venue": CLASS_IDS["venue"],
                "institution": CLASS_IDS["institution"],
                "concept": CONCEPT}


def _path_get(record, path):
    node = record
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            return None
        node = node[part]
    return node


def _element_id(element, sub_path):
    if isinstance(element, str):
        return element
    if isinstance(element, dict):
        value = _path_get(element, sub_path)
        return value if isinstance(value, str) else None
    return None


def _ingest_jsonl(asm: _Assembler, path, mapping, on_unknown):
    m = dict(DEFAULT_JSONL_MAPPING)
    m.update(mapping)
    mapped_top = {m["id"].split(".")[0], m["type"].split(".")[0],
                  m["publication_date"].split(".")[0],
                  m["referenced_works"].split(".")[0],
                  m["authorships"].split(".")[0], m["host_venue"].split(".")[0],
                  m["concepts"].split(".")[0], m["ancestors"].split(".")[0]}
    for lineno, line in _iter_rows(path):
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad JSON: {exc.msg}", path, lineno) from None
        if not isinstance(record, dict):
            raise ParseError("record is not a JSON object", path, lineno)
        rid = _path_get(record, m["id"])
        rtype = _path_get(record, m["type"])
        if not isinstance(rid, str) or not isinstance(rtype, str):
            raise ParseError("record missing id/type", path, lineno)
        cls = _JSONL_TYPES.get(rtype.lower())
        if cls is None:
            if on_unknown == "skip":
                asm.warn(f"skipped_record_type:{rtype}")
                continue
            raise ParseError(f"unknown record type {rtype!r}", path, lineno)
        # Ignored (literal-valued) properties are counted, not mapped.
        for key in record:
            if key not in mapped_top:
                asm.warn(f"ignored_property:{key}")
        eid = asm.entity(rid, cls, where=f"{path}:{lineno}")
        if cls == WORK:
            _ingest_jsonl_work(asm, record, m, rid, eid, path, lineno)
        elif cls == CONCEPT:
            for element in _path_get(record, m["ancestors"]) or []:
                pid = _element_id(element, m["ancestor_id"])
                if pid is not None:
                    asm.concept_parents.append(
                        (eid, asm.entity(pid, CONCEPT, f"{path}:{lineno}")))


def _ingest_jsonl_work(asm, record, m, rid, eid, path, lineno):
    where = f"{path}:{lineno}"
    date_text = _path_get(record, m["publication_date"])
    if not isinstance(date_text, str):
        raise ParseError(f"work {rid!r} missing publication_date", path, lineno)
    try:
        days = parse_date(date_text)
    except ValueError:
        raise ParseError(f"bad ISO date {date_text!r}", path, lineno) from None
    asm.set_date(eid, days, override=True)
    for element in _path_get(record, m["referenced_works"]) or []:
        cited = _element_id(element, "id")
        if cited is not None:
            asm.add_quad(rid, RELATION_IDS["cites"], cited, days, where)
    for authorship in _path_get(record, m["authorships"]) or []:
        author = _element_id(authorship, m["authorship_author"])
        if author is None:
            continue
        asm.add_quad(rid, RELATION_IDS["author"], author, days, where)
        if isinstance(authorship, dict):
            for inst in _path_get(authorship, m["authorship_institutions"]) or []:
                inst_id = _element_id(inst, m["institution_id"])
                if inst_id is not None:
                    # Affiliation timestamped by the attesting article.
                    asm.add_quad(author, RELATION_IDS["affiliation"],
                                 inst_id, days, where)
    venue = _path_get(record, m["host_venue"])
    venue_id = _element_id(venue, m["venue_id"]) if venue is not None else None
    if venue_id is not None:
        asm.add_quad(rid, RELATION_IDS["published_in"], venue_id, days, where)
    for element in _path_get(record, m["concepts"]) or []:
        cid = _element_id(element, m["concept_id"])
        if cid is not None:
            asm.concept_links.append(
                (eid, asm.entity(cid, CONCEPT, where)))


# -- TSV export ------------------------------------------------------

def export_tsv(store: GraphStore, quads_path, sidecar_path=None):
    """Write quads (and optionally the class/date sidecar) back to TSV."""
    with open(quads_path, "w", encoding="utf-8") as fh:
        fh.write("# node1\tlabel\tnode2\ttime\n")
        for s, r, o, t in zip(store.s, store.r, store.o, store.t):
            fh.write(f"{store.labels[s]}\t{RELATION_LABELS[r]}\t"
                     f"{store.labels[o]}\t{format_date(t)}\n")
        for w, c in store.concept_links:
            fh.write(f"{store.labels[w]}\tmain_subject\t{store.labels[c]}\t"
                     f"{format_date(0)}\n")
        for ch, pa in store.concept_parents:
            fh.write(f"{store.labels[ch]}\tancestor\t{store.labels[pa]}\t"
                     f"{format_date(0)}\n")
    if sidecar_path is not None:
        with open(sidecar_path, "w", encoding="utf-8") as fh:
            fh.write("# node\tclass\tdate\n")
            for i, label in enumerate(store.labels):
                date = ("" if store.pub_dates[i] == NO_DATE
                        else format_date(store.pub_dates[i]))
                fh.write(f"{label}\t{class_name(store.classes[i])}\t{date}\n")


# -- binary store format ----------------------------------------------

def save_store(store: GraphStore, path):
    header = canonical_json({
        "version": _VERSION,
        "n_entities": store.n_entities,
        "n_quads": store.n_quads,
        "n_concept_links": int(len(store.concept_links)),
        "n_concept_parents": int(len(store.concept_parents)),
        "relations": list(RELATION_LABELS),
    }).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(header)))
        fh.write(header)
        fh.write(store.classes.astype("<u1").tobytes())
        fh.write(store.pub_dates.astype("<i8").tobytes())
        fh.write(store.parent_ids.astype("<i8").tobytes())
        for col in (store.s, store.r, store.o, store.t):
            fh.write(col.astype("<i8").tobytes())
        for pairs in (store.concept_links, store.concept_parents):
            for col in range(2):
                fh.write(np.ascontiguousarray(
                    pairs[:, col]).astype("<i8").tobytes())
        for label in store.labels:
            raw = label.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)


def load_store(path) -> GraphStore:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ParseError(f"bad magic {magic!r}, expected KGF1", path)
        version, header_len = struct.unpack("<II", fh.read(8))
        if version != _VERSION:
            raise ParseError(f"unsupported store version {version}", path)
        header = json.loads(fh.read(header_len).decode("utf-8"))
        if header.get("relations") != list(RELATION_LABELS):
            raise ParseError("relation vocabulary mismatch", path)
        n, q = header["n_entities"], header["n_quads"]
        nl, np_ = header["n_concept_links"], header["n_concept_parents"]

        def col(count, dtype):
            itemsize = np.dtype(dtype).itemsize
            raw = fh.read(count * itemsize)
            if len(raw) != count * itemsize:
                raise ParseError("truncated store file", path)
            return np.frombuffer(raw, dtype=dtype).astype(np.int64)

        classes = col(n, "<u1").astype(np.uint8)
        pub_dates = col(n, "<i8")
        parent_ids = col(n, "<i8")
        s, r, o, t = (col(q, "<i8") for _ in range(4))
        links = np.stack([col(nl, "<i8"), col(nl, "<i8")], axis=1) if nl \
            else None
        parents = np.stack([col(np_, "<i8"), col(np_, "<i8")], axis=1) if np_ \
            else None
        labels = []
        for _ in range(n):
            (length,) = struct.unpack("<I", fh.read(4))
            labels.append(fh.read(length).decode("utf-8"))
    quads = np.stack([s, r, o, t], axis=1)
    return GraphStore.from_arrays(labels, classes, pub_dates, quads,
                                  parent_ids=parent_ids, concept_links=links,
                                  concept_parents=parents)
