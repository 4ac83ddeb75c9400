"""Pruning, snowball sampling, and node-class ablation variants."""

from __future__ import annotations

from collections import deque

import numpy as np

from ..errors import ConfigError
from ..utils import NO_DATE, as_rng
from .store import (AUTHOR, CONCEPT, INSTITUTION, REL_AFFILIATION, REL_AUTHOR,
                    REL_CITES, REL_PUBLISHED_IN, VENUE, WORK, GraphStore)

#: Warning code returned when BFS exhausts before reaching the target.
TARGET_UNREACHABLE = "target_unreachable"


def _closure_from_works(store: GraphStore, keep_work: np.ndarray):
    """Entity/quad keep-masks induced by a set of kept works.

    Keeps all author/venue/institution links of kept works, citation
    links between kept works, concept links of kept works plus the
    ancestral closure of the linked concepts; everything dangling is
    garbage-collected.
    """
    keep_e = np.zeros(store.n_entities, dtype=bool)
    keep_e[keep_work] = True
    keep_q = np.zeros(store.n_quads, dtype=bool)

    is_cites = store.r == REL_CITES
    keep_q |= is_cites & keep_e[store.s] & keep_e[store.o]
    for rel in (REL_AUTHOR, REL_PUBLISHED_IN):
        m = (store.r == rel) & keep_e[store.s]
        keep_q |= m
        keep_e[store.o[m]] = True
    m = (store.r == REL_AFFILIATION) & keep_e[store.s]
    keep_q |= m
    keep_e[store.o[m]] = True

    if store.concept_links.size:
        linked = store.concept_links[keep_e[store.concept_links[:, 0]], 1]
        frontier = set(linked.tolist())
        closed: set[int] = set()
        parents = store.concept_parents
        while frontier:
            closed |= frontier
            if parents.size:
                m = np.isin(parents[:, 0], np.fromiter(frontier, dtype=np.int64))
                frontier = set(parents[m, 1].tolist()) - closed
            else:
                frontier = set()
        for c in closed:
            keep_e[c] = True
    return keep_e, keep_q


def drop_isolated_works(store: GraphStore) -> GraphStore:
    """Remove works with no incident citation link (and GC the rest)."""
    cites_deg = np.zeros(store.n_entities, dtype=np.int64)
    m = store.r == REL_CITES
    np.add.at(cites_deg, store.s[m], 1)
    np.add.at(cites_deg, store.o[m], 1)
    keep_work = store.work_ids[cites_deg[store.work_ids] > 0]
    keep_e, keep_q = _closure_from_works(store, keep_work)
    return store.restrict(keep_e, keep_q)


def drop_undated_works(store: GraphStore) -> GraphStore:
    """Remove works without a publication date (and GC the rest)."""
    works = store.work_ids
    keep_work = works[store.pub_dates[works] != NO_DATE]
    keep_e, keep_q = _closure_from_works(store, keep_work)
    return store.restrict(keep_e, keep_q)


def snowball_sample(store: GraphStore, target_works: int, seeds: int = 10,
                    rng_seed=0):
    """Breadth-first sample over undirected citation edges.

    Expands from ``seeds`` uniformly random seed works until
    ``target_works`` are collected, then keeps all author/venue/
    institution links of the sampled works and drops works without a
    publication date. Returns ``(store, warnings)``; a
    ``target_unreachable`` warning means BFS exhausted the reachable
    closure early and the result is smaller than requested.
    """
    works = store.work_ids
    if target_works > len(works):
        raise ConfigError(f"target_works {target_works} exceeds "
                          f"{len(works)} works in store")
    if seeds < 1:
        raise ConfigError("need at least one seed")
    rng = as_rng(rng_seed)
    seed_ids = rng.choice(works, size=min(seeds, len(works)), replace=False)

    visited: set[int] = set()
    queue: deque[int] = deque()
    for sid in seed_ids.tolist():
        if len(visited) >= target_works:
            break
        if sid not in visited:
            visited.add(sid)
            queue.append(sid)
    warnings = []
    while queue and len(visited) < target_works:
        node = queue.popleft()
        nbrs = np.concatenate([store.neighbors(node, REL_CITES, "out"),
                               store.neighbors(node, REL_CITES, "in")])
        nbrs = np.unique(nbrs)
        rng.shuffle(nbrs)
        for nb in nbrs.tolist():
            if nb not in visited:
                visited.add(nb)
                queue.append(nb)
                if len(visited) >= target_works:
                    break
    if len(visited) < target_works:
        warnings.append(TARGET_UNREACHABLE)

    sampled = np.fromiter(visited, dtype=np.int64)
    dated = sampled[store.pub_dates[sampled] != NO_DATE]
    keep_e, keep_q = _closure_from_works(store, dated)
    return store.restrict(keep_e, keep_q), warnings


#: The six expressible keep-sets (works are always kept; institutions
#: require authors, otherwise affiliation links would be disjoint).
VALID_ABLATIONS = (
    frozenset({WORK, AUTHOR, VENUE, INSTITUTION}),
    frozenset({WORK, AUTHOR, INSTITUTION}),       # -V
    frozenset({WORK, AUTHOR, VENUE}),             # -I
    frozenset({WORK, AUTHOR}),                    # -V -I
    frozenset({WORK, VENUE}),                     # -A -I
    frozenset({WORK}),                            # -V -A -I
)


def ablation_variant(store: GraphStore, keep) -> GraphStore:
    """Restrict the store to quads between kept entity classes."""
    keep = frozenset(keep)
    if WORK not in keep:
        raise ConfigError("works must be kept: the task predicts links "
                          "between publications")
    if INSTITUTION in keep and AUTHOR not in keep:
        raise ConfigError("institutions cannot be kept without authors: "
                          "affiliation links would leave them disjoint")
    keep_cls = np.zeros(5, dtype=bool)
    for cls in keep | {CONCEPT}:  # concept side tables ride along
        keep_cls[cls] = True
    keep_q = keep_cls[store.classes[store.s]] & keep_cls[store.classes[store.o]]
    keep_e = np.zeros(store.n_entities, dtype=bool)
    keep_e[store.classes == WORK] = True
    keep_e[store.s[keep_q]] = True
    keep_e[store.o[keep_q]] = True
    if store.concept_links.size:
        keep_e[store.concept_links[:, 1]] = True
    if store.concept_parents.size:
        keep_e[store.concept_parents.ravel()] = True
    return store.restrict(keep_e, keep_q)
