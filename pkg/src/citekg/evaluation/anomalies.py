"""Citation-anomaly probes for a trained scorer.

A query paper's known citation is ranked against randomly drawn
negative papers. The citation is *surprising* when it lands below rank
500 of 1000; a *should-have* citation is a negative paper that outranks
it at the top, reported with the ratio of its score to the positive's.
"""

from __future__ import annotations

import numpy as np

from ..errors import StrategyError
from ..graph.store import REL_CITES
from ..utils import as_rng
from .ranking import rank_from_scores
from .strategies import FilterIndex

SURPRISING_RANK = 500


def citation_report(score_fn, store, query_paper: int, positive_paper: int,
                    n: int = 1000, rng=None, filter_index=None) -> dict:
    """Rank one known citation among ``n`` random negative papers."""
    rng = as_rng(rng)
    filter_index = filter_index or FilterIndex(store)
    blocked = filter_index.tails(query_paper, REL_CITES)
    pool = np.setdiff1d(store.work_ids, blocked)
    pool = pool[(pool != query_paper) & (pool != positive_paper)]
    if pool.size == 0:
        raise StrategyError("no negative papers available")
    negatives = rng.choice(pool, size=n, replace=pool.size < n)

    t = int(store.pub_dates[query_paper])
    candidates = np.concatenate([negatives, [positive_paper]])
    scores = np.asarray(score_fn(query_paper, REL_CITES, candidates, t),
                        dtype=np.float64)
    rank = rank_from_scores(scores, len(candidates) - 1)
    pos_score = float(scores[-1])
    top = int(np.argmax(scores))
    top_is_negative = top != len(candidates) - 1 and scores[top] > pos_score
    top_neg = int(np.argmax(scores[:-1]))
    top_neg_score = float(scores[top_neg])
    relative = top_neg_score / pos_score if pos_score != 0 else float("inf")
    return {
        "query": store.labels[query_paper],
        "positive": store.labels[positive_paper],
        "rank": int(rank),
        "n_neg": int(n),
        "top_negative": store.labels[int(negatives[top_neg])],
        "top_negative_score": top_neg_score,
        "positive_score": pos_score,
        "relative_score": float(relative),
        "should_have": bool(top_is_negative),
        "surprising": bool(rank > SURPRISING_RANK),
    }
