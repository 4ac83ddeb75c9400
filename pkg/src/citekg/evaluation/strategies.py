"""Evaluation-time negative sampling strategies.

Five candidate pools for ranking a (s, cites, o, t) query's tail:

* ``random``: every entity, any class
* ``entity_type``: entities with the target's class
* ``time_constrained``: works published inside the evaluation window
* ``community``: works sharing the target's community
* ``full``: no sampling, rank against everything (see ``full_pool``)

Every pool is filtered: known-true tails for (s, r) and the target
itself never appear among negatives. Pools smaller than the requested
count are sampled with replacement and the query flagged, so tiny
communities stay evaluable.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, StrategyError
from ..graph.store import WORK
from ..utils import as_rng
from .ranking import EvalQuery

STRATEGIES = ("random", "entity_type", "time_constrained", "community",
              "full")


class FilterIndex:
    """Known-true tails per (subject, relation) over the whole store."""

    def __init__(self, store):
        self._tails: dict[tuple[int, int], list[int]] = {}
        for s, r, o in zip(store.s.tolist(), store.r.tolist(),
                           store.o.tolist()):
            self._tails.setdefault((s, r), []).append(o)
        self._cache: dict[tuple[int, int], np.ndarray] = {}

    def tails(self, s: int, r: int) -> np.ndarray:
        key = (int(s), int(r))
        hit = self._cache.get(key)
        if hit is None:
            hit = np.unique(np.asarray(self._tails.get(key, []),
                                       dtype=np.int64))
            self._cache[key] = hit
        return hit


class StrategyPools:
    """Precomputed per-strategy base pools for one split."""

    def __init__(self, split, partition=None, works_only_full=True):
        store = split.store
        self.split = split
        self.store = store
        self.partition = partition
        self.filter_index = FilterIndex(store)
        self._all = np.arange(store.n_entities, dtype=np.int64)
        self._by_class = {c: store.ids_of_class(c) for c in range(5)}
        works = store.work_ids
        dates = store.pub_dates[works]
        in_window = dates >= split.threshold
        if split.window_end is not None:
            in_window &= dates < split.window_end
        self._window_works = works[in_window]
        self._full = works.copy() if works_only_full else self._all

    def base_pool(self, strategy: str, target: int) -> np.ndarray:
        store = self.store
        if strategy == "random":
            return self._all
        if strategy == "entity_type":
            return self._by_class[int(store.classes[target])]
        if strategy == "time_constrained":
            return self._window_works
        if strategy == "full":
            return self._full
        if strategy == "community":
            if self.partition is None:
                raise ConfigError("community strategy needs a partition")
            label = self.partition.label_of(target)
            if label is None:
                raise StrategyError(
                    f"target {store.labels[target]} is not in the partition")
            return self.partition.members(label)
        raise ConfigError(f"unknown strategy {strategy!r}")


def sample_eval_negatives(strategy, query, n, store, split, partition, rng,
                          pools=None, on_empty="error"):
    """Draw ``n`` filtered negatives for one (s, r, o, t) query.

    Returns ``(candidates, with_replacement, fallback)``. With
    ``on_empty="random"`` an empty strategy pool falls back to the
    random pool and flags the query instead of raising.
    """
    s, r, o = int(query[0]), int(query[1]), int(query[2])
    pools = pools or StrategyPools(split, partition)
    rng = as_rng(rng)
    base = pools.base_pool(strategy, o)
    blocked = pools.filter_index.tails(s, r)  # includes the target itself
    avail = np.setdiff1d(base, blocked, assume_unique=False)
    avail = avail[avail != o]
    fallback = False
    if avail.size == 0:
        if on_empty != "random" or strategy == "random":
            raise StrategyError(
                f"empty {strategy} pool for query "
                f"({store.labels[s]}, {store.labels[o]})")
        fallback = True
        avail = np.setdiff1d(pools.base_pool("random", o), blocked)
        avail = avail[avail != o]
        if avail.size == 0:
            raise StrategyError("empty fallback pool")
    if avail.size >= n:
        negatives = rng.choice(avail, size=n, replace=False)
        with_replacement = False
    else:
        negatives = rng.choice(avail, size=n, replace=True)
        with_replacement = True
    return negatives, with_replacement, fallback


def build_queries(split, strategy, n_negatives, rng, partition=None,
                  max_queries=None, on_empty="error",
                  works_only_full=True) -> list[EvalQuery]:
    """EvalQuery list over the split's eval targets (subsampled when
    ``max_queries`` caps them)."""
    store = split.store
    rng = as_rng(rng)
    pools = StrategyPools(split, partition, works_only_full)
    target_idx = split.eval_target_idx
    if max_queries is not None and len(target_idx) > max_queries:
        target_idx = rng.choice(target_idx, size=max_queries, replace=False)
        target_idx = np.sort(target_idx)
    queries = []
    for qi in target_idx.tolist():
        s, r, o, t = (int(store.s[qi]), int(store.r[qi]), int(store.o[qi]),
                      int(store.t[qi]))
        if strategy == "full":
            base = pools.base_pool("full", o)
            blocked = pools.filter_index.tails(s, r)
            negatives = np.setdiff1d(base, blocked)
            negatives = negatives[negatives != o]
            with_replacement = fallback = False
        else:
            negatives, with_replacement, fallback = sample_eval_negatives(
                strategy, (s, r, o, t), n_negatives, store, split, partition,
                rng, pools=pools, on_empty=on_empty)
        candidates = np.concatenate([negatives,
                                     np.asarray([o], dtype=np.int64)])
        queries.append(EvalQuery(s=s, r=r, o=o, t=t, candidates=candidates,
                                 true_position=len(candidates) - 1,
                                 with_replacement=with_replacement,
                                 fallback=fallback))
    return queries


def full_pool(store, s, r, o, filter_index=None, works_only=True):
    """Every (filtered) candidate for a full ranking of one query."""
    filter_index = filter_index or FilterIndex(store)
    base = store.work_ids if works_only else np.arange(store.n_entities)
    blocked = filter_index.tails(s, r)
    avail = np.setdiff1d(base, blocked)
    return avail[avail != o]


def full_ranking(score_fn, store, s, r, o, t, filter_index=None,
                 works_only=True):
    """Filtered rank of ``o`` against every candidate entity.

    Returns ``(rank, wall_s)``; the pool is restricted to works unless
    ``works_only`` is off.
    """
    import time

    from .ranking import rank_from_scores
    start = time.monotonic()
    pool = full_pool(store, s, r, o, filter_index, works_only)
    candidates = np.concatenate([pool, np.asarray([o], dtype=np.int64)])
    scores = score_fn(s, r, candidates, t)
    rank = rank_from_scores(np.asarray(scores), len(candidates) - 1)
    return rank, time.monotonic() - start
