"""Immutable typed temporal multigraph over scholarly entities.

Entities carry one of five classes (work, author, venue, institution,
concept) and a dense integer id. Edges are timestamped quads
``(subject, relation, object, days-since-epoch)`` over four modeled
relations with fixed direction conventions:

    cites         work   -> work        (citing -> cited)
    author        work   -> author
    published_in  work   -> venue
    affiliation   author -> institution

Work->concept links and the concept hierarchy are kept in side tables;
they are not modeled quads and only feed community-quality analysis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import SchemaError
from ..utils import NO_DATE

WORK, AUTHOR, VENUE, INSTITUTION, CONCEPT = range(5)
CLASS_NAMES = ("work", "author", "venue", "institution", "concept")
CLASS_IDS = {name: i for i, name in enumerate(CLASS_NAMES)}

REL_CITES, REL_AUTHOR, REL_PUBLISHED_IN, REL_AFFILIATION = range(4)
RELATION_LABELS = ("cites", "author", "published_in", "affiliation")
RELATION_IDS = {label: i for i, label in enumerate(RELATION_LABELS)}
#: Wikidata property ids accepted as aliases for the modeled relations.
RELATION_ALIASES = {"P2860": REL_CITES, "P50": REL_AUTHOR,
                    "P1433": REL_PUBLISHED_IN, "P1416": REL_AFFILIATION}
#: Subject/object class required by each relation.
RELATION_DOMAIN = (WORK, WORK, WORK, AUTHOR)
RELATION_RANGE = (WORK, AUTHOR, VENUE, INSTITUTION)
N_RELATIONS = len(RELATION_LABELS)


def class_name(cls: int) -> str:
    return CLASS_NAMES[cls]


@dataclass
class _Csr:
    """One-direction adjacency for one relation: node -> (neighbor, quad)."""

    indptr: np.ndarray
    neighbors: np.ndarray
    quad_idx: np.ndarray

    def row(self, node: int) -> np.ndarray:
        return self.neighbors[self.indptr[node]:self.indptr[node + 1]]

    def row_quads(self, node: int) -> np.ndarray:
        return self.quad_idx[self.indptr[node]:self.indptr[node + 1]]


def _build_csr(n_nodes, keys, neighbors, quad_idx):
    order = np.lexsort((neighbors, keys))
    keys, neighbors, quad_idx = keys[order], neighbors[order], quad_idx[order]
    counts = np.bincount(keys, minlength=n_nodes)
    indptr = np.concatenate([[0], np.cumsum(counts)])
    return _Csr(indptr.astype(np.int64), neighbors, quad_idx)


@dataclass
class GraphStore:
    """Immutable after construction; shareable across readers.

    ``quads`` columns are sorted lexicographically by (r, s, o, t) and
    deduplicated. ``pub_dates`` holds days since 1970-01-01 for works
    (``NO_DATE`` when unknown; non-works always ``NO_DATE``).
    ``parent_ids`` maps each entity to its id in the store this one was
    derived from (-1 for stores built directly from raw input), keeping
    ids dense across filtering steps.
    """

    labels: list[str]
    classes: np.ndarray                  # (N,) uint8
    pub_dates: np.ndarray                # (N,) int64, NO_DATE sentinel
    s: np.ndarray                        # (Q,) int64
    r: np.ndarray                        # (Q,) int64
    o: np.ndarray                        # (Q,) int64
    t: np.ndarray                        # (Q,) int64
    parent_ids: np.ndarray               # (N,) int64, -1 when root store
    concept_links: np.ndarray            # (L, 2) int64 (work, concept)
    concept_parents: np.ndarray          # (P, 2) int64 (child, parent)
    _label_ids: dict[str, int] = field(default_factory=dict, repr=False)
    _out: list[_Csr] = field(default_factory=list, repr=False)
    _in: list[_Csr] = field(default_factory=list, repr=False)

    # -- construction -------------------------------------------------

    @classmethod
    def from_arrays(cls, labels, classes, pub_dates, quads, parent_ids=None,
                    concept_links=None, concept_parents=None) -> "GraphStore":
        """Build a store from raw columns; sorts, dedupes, validates."""
        n = len(labels)
        classes = np.asarray(classes, dtype=np.uint8)
        pub_dates = np.asarray(pub_dates, dtype=np.int64)
        if parent_ids is None:
            parent_ids = np.full(n, -1, dtype=np.int64)
        quads = np.asarray(quads, dtype=np.int64).reshape(-1, 4)
        if quads.size:
            quads = np.unique(quads, axis=0)  # dedup; sorts by (s, r, o, t)
            quads = quads[np.lexsort(
                (quads[:, 3], quads[:, 2], quads[:, 0], quads[:, 1]))]
        concept_links = _as_pairs(concept_links)
        concept_parents = _as_pairs(concept_parents)
        store = cls(
            labels=list(labels), classes=classes, pub_dates=pub_dates,
            s=np.ascontiguousarray(quads[:, 0]),
            r=np.ascontiguousarray(quads[:, 1]),
            o=np.ascontiguousarray(quads[:, 2]),
            t=np.ascontiguousarray(quads[:, 3]),
            parent_ids=np.asarray(parent_ids, dtype=np.int64),
            concept_links=concept_links, concept_parents=concept_parents,
        )
        store._label_ids = {lab: i for i, lab in enumerate(store.labels)}
        store._validate()
        store._build_adjacency()
        return store

    def _validate(self):
        n = self.n_entities
        for arr, name in ((self.classes, "classes"), (self.pub_dates, "pub_dates"),
                          (self.parent_ids, "parent_ids")):
            if len(arr) != n:
                raise SchemaError(f"{name} length {len(arr)} != {n} entities")
        if self.s.size:
            for arr in (self.s, self.o):
                if arr.min() < 0 or arr.max() >= n:
                    raise SchemaError("quad endpoint out of entity range")
            if self.r.min() < 0 or self.r.max() >= N_RELATIONS:
                raise SchemaError("relation id out of range")
            dom = np.asarray(RELATION_DOMAIN)[self.r]
            rng_ = np.asarray(RELATION_RANGE)[self.r]
            bad = np.nonzero((self.classes[self.s] != dom) |
                             (self.classes[self.o] != rng_))[0]
            if bad.size:
                q = bad[0]
                raise SchemaError(
                    f"quad ({self.labels[self.s[q]]}, {RELATION_LABELS[self.r[q]]}, "
                    f"{self.labels[self.o[q]]}) violates relation direction classes")

    def _build_adjacency(self):
        self._out, self._in = [], []
        idx = np.arange(self.n_quads, dtype=np.int64)
        for rel in range(N_RELATIONS):
            mask = self.r == rel
            self._out.append(_build_csr(self.n_entities, self.s[mask],
                                        self.o[mask], idx[mask]))
            self._in.append(_build_csr(self.n_entities, self.o[mask],
                                       self.s[mask], idx[mask]))

    # -- basic accessors ----------------------------------------------

    @property
    def n_entities(self) -> int:
        return len(self.labels)

    @property
    def n_quads(self) -> int:
        return len(self.s)

    def quad_array(self) -> np.ndarray:
        return np.stack([self.s, self.r, self.o, self.t], axis=1)

    def entity_id(self, label: str) -> int:
        try:
            return self._label_ids[label]
        except KeyError:
            raise SchemaError(f"unknown entity label {label!r}") from None

    def ids_of_class(self, cls: int) -> np.ndarray:
        return np.nonzero(self.classes == cls)[0].astype(np.int64)

    @property
    def work_ids(self) -> np.ndarray:
        return self.ids_of_class(WORK)

    def neighbors(self, node: int, relation: int, direction: str) -> np.ndarray:
        """Neighbor ids of ``node`` under one relation; direction 'out'|'in'."""
        csr = (self._out if direction == "out" else self._in)[relation]
        return csr.row(node)

    def quads_of(self, node: int, relation: int, direction: str) -> np.ndarray:
        csr = (self._out if direction == "out" else self._in)[relation]
        return csr.row_quads(node)

    def adjacency_consistent(self) -> bool:
        """Adjacency indexes round-trip to the quad list exactly."""
        seen = []
        for rel in range(N_RELATIONS):
            csr = self._out[rel]
            for node in range(self.n_entities):
                for nb, q in zip(csr.row(node), csr.row_quads(node)):
                    seen.append((node, rel, nb, self.t[q]))
            csr_in = self._in[rel]
            n_in = sum(len(csr_in.row(u)) for u in range(self.n_entities))
            if n_in != len(csr.quad_idx):
                return False
        got = sorted(seen)
        want = sorted(zip(self.s.tolist(), self.r.tolist(),
                          self.o.tolist(), self.t.tolist()))
        return got == want

    # -- derived stores -----------------------------------------------

    def restrict(self, keep_entities: np.ndarray,
                 keep_quads: np.ndarray) -> "GraphStore":
        """New store with a subset of entities/quads; ids re-densified.

        ``parent_ids`` of the result point back into this store (the
        persisted remap table).
        """
        keep_entities = np.asarray(keep_entities, dtype=bool)
        keep_quads = np.asarray(keep_quads, dtype=bool)
        old_ids = np.nonzero(keep_entities)[0]
        remap = np.full(self.n_entities, -1, dtype=np.int64)
        remap[old_ids] = np.arange(len(old_ids))
        qmask = keep_quads & keep_entities[self.s] & keep_entities[self.o]
        quads = np.stack([remap[self.s[qmask]], self.r[qmask],
                          remap[self.o[qmask]], self.t[qmask]], axis=1)
        links = self.concept_links
        if links.size:
            lmask = keep_entities[links[:, 0]] & keep_entities[links[:, 1]]
            links = np.stack([remap[links[lmask, 0]], remap[links[lmask, 1]]], axis=1)
        parents = self.concept_parents
        if parents.size:
            pmask = keep_entities[parents[:, 0]] & keep_entities[parents[:, 1]]
            parents = np.stack([remap[parents[pmask, 0]],
                                remap[parents[pmask, 1]]], axis=1)
        return GraphStore.from_arrays(
            labels=[self.labels[i] for i in old_ids],
            classes=self.classes[old_ids],
            pub_dates=self.pub_dates[old_ids],
            quads=quads,
            parent_ids=old_ids,
            concept_links=links,
            concept_parents=parents,
        )


def _as_pairs(arr) -> np.ndarray:
    if arr is None:
        return np.zeros((0, 2), dtype=np.int64)
    arr = np.asarray(arr, dtype=np.int64).reshape(-1, 2)
    if arr.size:
        arr = np.unique(arr, axis=0)
    return arr
