"""Undirected incidence index over a quad subset.

Each quad contributes two incidence records: the subject sees the
object under group ``r`` (outgoing) and the object sees the subject
under group ``n_relations + r`` (incoming), giving ``2 * |R|``
relation-direction groups for relation-aware aggregation.
"""

from __future__ import annotations

import numpy as np

from ..graph.store import N_RELATIONS

N_GROUPS = 2 * N_RELATIONS


class GraphView:
    def __init__(self, store, quad_idx):
        quad_idx = np.asarray(quad_idx, dtype=np.int64)
        s, r, o = store.s[quad_idx], store.r[quad_idx], store.o[quad_idx]
        nodes = np.concatenate([s, o])
        neigh = np.concatenate([o, s])
        group = np.concatenate([r, N_RELATIONS + r])
        order = np.lexsort((neigh, group, nodes))
        nodes, self.neigh, self.group = (nodes[order], neigh[order],
                                         group[order])
        counts = np.bincount(nodes, minlength=store.n_entities)
        self.indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self.n_entities = store.n_entities

    def degree(self, node: int) -> int:
        return int(self.indptr[node + 1] - self.indptr[node])

    def incident(self, node: int):
        """(neighbor ids, group ids) of all incident edge slots."""
        lo, hi = self.indptr[node], self.indptr[node + 1]
        return self.neigh[lo:hi], self.group[lo:hi]


def sample_neighborhood(node, fanout, rng, view: GraphView):
    """Up to ``fanout`` incident edges, uniform without replacement.

    ``rng=None`` (or a degree within the fanout) returns the full
    neighborhood; selections are re-sorted so equal draws are
    order-stable.
    """
    neigh, group = view.incident(node)
    if rng is None or fanout is None or len(neigh) <= fanout:
        return neigh, group
    pick = np.sort(rng.choice(len(neigh), size=fanout, replace=False))
    return neigh[pick], group[pick]
