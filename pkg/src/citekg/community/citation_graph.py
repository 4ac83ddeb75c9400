"""Undirected simple citation network over the works of a store.

Citation direction is ignored and parallel edges/self-loops collapsed,
the conventional presentation for modularity-family objectives.
"""

from __future__ import annotations

import numpy as np

from ..graph.store import REL_CITES, WORK


class CitationGraph:
    def __init__(self, node_ids, edges):
        """``edges`` are (u, v) pairs of positions into ``node_ids``."""
        self.node_ids = np.asarray(node_ids, dtype=np.int64)
        self.n = len(self.node_ids)
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size:
            lo = np.minimum(edges[:, 0], edges[:, 1])
            hi = np.maximum(edges[:, 0], edges[:, 1])
            keep = lo != hi
            edges = np.unique(np.stack([lo[keep], hi[keep]], axis=1), axis=0)
        self.edges = edges
        self.m = len(edges)
        ends = np.concatenate([edges[:, 0], edges[:, 1]])
        nbrs = np.concatenate([edges[:, 1], edges[:, 0]])
        order = np.lexsort((nbrs, ends))
        ends, nbrs = ends[order], nbrs[order]
        counts = np.bincount(ends, minlength=self.n)
        self.indptr = np.concatenate([[0], np.cumsum(counts)])
        self.adj = nbrs
        self.degree = counts.astype(np.int64)

    @classmethod
    def from_store(cls, store) -> "CitationGraph":
        works = store.ids_of_class(WORK)
        pos = np.full(store.n_entities, -1, dtype=np.int64)
        pos[works] = np.arange(len(works))
        mask = store.r == REL_CITES
        edges = np.stack([pos[store.s[mask]], pos[store.o[mask]]], axis=1)
        return cls(works, edges)

    def neighbors(self, u: int) -> np.ndarray:
        return self.adj[self.indptr[u]:self.indptr[u + 1]]
