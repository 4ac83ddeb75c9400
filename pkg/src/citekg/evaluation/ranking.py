"""Filtered tail ranking and metric aggregation.

The rank of the true tail among its candidates is the average rank
``1 + #strictly-greater + #equal/2`` rounded half up, so fully tied
pools give the middle rank instead of an optimistic 1. Candidate pools
are filtered: every other known-true tail for the query's
(subject, relation) is removed before ranking.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, NumericError


@dataclass
class EvalQuery:
    """One tail-ranking task: true quad plus its filtered candidates.

    ``candidates`` contains the true object exactly once at
    ``true_position``; everything else is a sampled negative that is
    not a known-true tail for (s, r).
    """

    s: int
    r: int
    o: int
    t: int
    candidates: np.ndarray
    true_position: int
    with_replacement: bool = False
    fallback: bool = False


@dataclass
class RankingReport:
    ranks: np.ndarray
    mrr: float
    hits1: float
    hits10: float
    hits50: float
    strategy: str
    n_negatives: int
    wall_s: float = 0.0
    with_replacement: bool = False
    notes: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {"mrr": self.mrr, "hits1": self.hits1, "hits10": self.hits10,
                "hits50": self.hits50, "strategy": self.strategy,
                "n_neg": self.n_negatives, "n_queries": int(len(self.ranks)),
                "with_replacement": self.with_replacement,
                "wall_s": self.wall_s, **self.notes}


def rank_from_scores(scores: np.ndarray, true_position: int) -> int:
    """Average rank of the candidate at ``true_position``."""
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        bad = int(np.nonzero(~np.isfinite(scores))[0][0])
        raise NumericError(f"non-finite score for candidate at position {bad}")
    true_score = scores[true_position]
    greater = int(np.sum(scores > true_score))
    equal = int(np.sum(scores == true_score)) - 1
    return int(np.floor(1 + greater + equal / 2 + 0.5))


def rank_tail(score_fn, query: EvalQuery) -> int:
    """Filtered rank of the query's true tail under ``score_fn``.

    ``score_fn(s, r, o_array, t_days)`` returns one score per candidate.
    """
    scores = score_fn(query.s, query.r, query.candidates, query.t)
    return rank_from_scores(np.asarray(scores), query.true_position)


def aggregate(ranks, strategy="", n_negatives=0, wall_s=0.0,
              with_replacement=False, notes=None) -> RankingReport:
    """MRR (mean of 1/rank) and Hits@{1,10,50} over per-query ranks."""
    ranks = np.asarray(ranks, dtype=np.float64)
    if ranks.size == 0:
        raise ConfigError("cannot aggregate zero ranks")
    return RankingReport(
        ranks=ranks.astype(np.int64),
        mrr=float(np.mean(1.0 / ranks)),
        hits1=float(np.mean(ranks <= 1)),
        hits10=float(np.mean(ranks <= 10)),
        hits50=float(np.mean(ranks <= 50)),
        strategy=strategy, n_negatives=n_negatives, wall_s=wall_s,
        with_replacement=with_replacement, notes=notes or {})


def evaluate_queries(score_fn, queries, strategy="", n_negatives=0,
                     notes=None) -> RankingReport:
    start = time.monotonic()
    ranks = [rank_tail(score_fn, q) for q in queries]
    return aggregate(ranks, strategy=strategy, n_negatives=n_negatives,
                     wall_s=time.monotonic() - start,
                     with_replacement=any(q.with_replacement for q in queries),
                     notes=notes)


def query_records(queries, ranks, strategy, n_negatives):
    """JSON-lines records, one per query."""
    for q, rank in zip(queries, ranks):
        yield {"s": int(q.s), "r": int(q.r), "o": int(q.o), "t": int(q.t),
               "rank": int(rank), "strategy": strategy,
               "n_neg": int(n_negatives)}
