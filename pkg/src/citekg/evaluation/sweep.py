"""Negative-count sweeps with nested candidate pools.

For each query one permutation of the strategy pool is drawn; the
pools at increasing counts are its prefixes, so they are nested and the
per-strategy MRR is structurally weakly decreasing in the count.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from ..utils import as_rng
from .ranking import aggregate, rank_from_scores
from .strategies import StrategyPools


def negative_count_sweep(score_fn, split, strategies, counts, rng,
                         partition=None, max_queries=None,
                         include_full=True) -> list[dict]:
    """MRR per (strategy, count); one record per pair, counts ascending.

    ``include_full`` appends a final point ranking against each query's
    whole (filtered) strategy pool.
    """
    counts = [int(c) for c in counts]
    if counts != sorted(counts) or any(c < 1 for c in counts):
        raise ConfigError("counts must be ascending positive integers")
    store = split.store
    rng = as_rng(rng)
    pools = StrategyPools(split, partition)
    target_idx = split.eval_target_idx
    if max_queries is not None and len(target_idx) > max_queries:
        target_idx = np.sort(rng.choice(target_idx, size=max_queries,
                                        replace=False))

    records = []
    for strategy in strategies:
        perms, truths = [], []
        for qi in target_idx.tolist():
            s, r, o = int(store.s[qi]), int(store.r[qi]), int(store.o[qi])
            t = int(store.t[qi])
            base = pools.base_pool(strategy, o)
            blocked = pools.filter_index.tails(s, r)
            avail = np.setdiff1d(base, blocked)
            avail = avail[avail != o]
            perms.append(rng.permutation(avail))
            truths.append((s, r, o, t))
        levels = [(c, c) for c in counts]
        if include_full:
            levels.append(("full", None))
        for label, count in levels:
            ranks = []
            for perm, (s, r, o, t) in zip(perms, truths):
                negatives = perm if count is None else perm[:count]
                cands = np.concatenate([negatives, [o]])
                scores = score_fn(s, r, cands, t)
                ranks.append(rank_from_scores(np.asarray(scores),
                                              len(cands) - 1))
            report = aggregate(ranks, strategy=strategy,
                               n_negatives=-1 if count is None else count)
            records.append({"strategy": strategy, "count": label,
                            "mrr": report.mrr, "hits1": report.hits1,
                            "hits10": report.hits10,
                            "hits50": report.hits50,
                            "n_queries": int(len(ranks))})
    return records
