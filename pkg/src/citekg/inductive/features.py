"""Relational degree feature vectors.

Per node, a vector of size 2|R| with the relation order
[cites, author, published_in, affiliation]: coordinate i is the
incoming degree under relation i, coordinate |R| + i the outgoing one.
"""

from __future__ import annotations

import numpy as np

from ..graph.store import N_RELATIONS


def degree_features(store, quad_idx=None) -> np.ndarray:
    feats = np.zeros((store.n_entities, 2 * N_RELATIONS), dtype=np.float64)
    if quad_idx is None:
        s, r, o = store.s, store.r, store.o
    else:
        quad_idx = np.asarray(quad_idx, dtype=np.int64)
        s, r, o = store.s[quad_idx], store.r[quad_idx], store.o[quad_idx]
    np.add.at(feats, (o, r), 1.0)
    np.add.at(feats, (s, N_RELATIONS + r), 1.0)
    return feats
