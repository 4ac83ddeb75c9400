import numpy as np
import pytest

from citekg.errors import NumericError, StrategyError
from citekg.evaluation.anomalies import citation_report
from citekg.evaluation.ranking import (EvalQuery, aggregate,
                                       evaluate_queries, rank_from_scores,
                                       rank_tail)
from citekg.evaluation.strategies import (FilterIndex, StrategyPools,
                                          build_queries, full_pool,
                                          full_ranking,
                                          sample_eval_negatives)
from citekg.evaluation.sweep import negative_count_sweep
from citekg.graph.split import temporal_split
from citekg.graph.store import AUTHOR, REL_CITES, WORK
from citekg.utils import parse_date

from conftest import make_store, random_toy_store
from oracles import brute_force_metrics, brute_force_rank
from synth import planted_citation_store

T_VALID = parse_date("2017-01-01")
T_TEST = parse_date("2020-01-01")


class TestRank:
    def test_strictly_highest_is_rank_one(self):
        assert rank_from_scores(np.array([0.1, 0.2, 0.9]), 2) == 1

    def test_all_equal_among_1001_gives_501(self):
        assert rank_from_scores(np.full(1001, 3.3), 500) == 501

    def test_removing_higher_filtered_candidate_improves_by_one(self):
        scores = np.array([5.0, 1.0, 2.0, 0.5])
        with_high = rank_from_scores(scores, 2)
        without = rank_from_scores(scores[1:], 1)
        assert with_high - without == 1

    def test_half_up_rounding_on_odd_tie(self):
        # one equal competitor: 1 + 0 + 0.5 -> 2
        assert rank_from_scores(np.array([1.0, 1.0]), 0) == 2

    def test_non_finite_score_raises(self):
        with pytest.raises(NumericError):
            rank_from_scores(np.array([1.0, np.nan]), 0)

    def test_matches_brute_force(self, rng):
        for _ in range(300):
            n = int(rng.integers(2, 30))
            scores = rng.integers(0, 5, size=n).astype(float)
            pos = int(rng.integers(n))
            assert rank_from_scores(scores, pos) == \
                brute_force_rank(scores.tolist(), pos)


class TestAggregate:
    def test_hand_mrr(self):
        report = aggregate([1, 2, 4])
        assert report.mrr == pytest.approx((1 + 0.5 + 0.25) / 3)
        assert report.hits1 == pytest.approx(1 / 3)

    def test_all_rank_one(self):
        report = aggregate([1, 1, 1])
        assert report.mrr == 1.0 and report.hits50 == 1.0

    def test_single_rank_1000(self):
        report = aggregate([1000])
        assert report.hits50 == 0.0

    def test_hits_monotone_in_k(self, rng):
        ranks = rng.integers(1, 100, size=50)
        report = aggregate(ranks)
        assert report.hits1 <= report.hits10 <= report.hits50

    def test_matches_brute_force(self, rng):
        ranks = rng.integers(1, 60, size=40).tolist()
        report = aggregate(ranks)
        want = brute_force_metrics(ranks)
        assert report.mrr == pytest.approx(want["mrr"])
        assert report.hits10 == pytest.approx(want["hits10"])


def _eval_split(seed=0, n_works=50):
    store = planted_citation_store(n_works=n_works, group_size=10,
                                   cites_per_work=4, seed=seed)
    return temporal_split(store, T_VALID, T_TEST)


def _toy_scorer(store, seed=0):
    """Deterministic pseudo-random scorer, independent of any model."""
    table = np.random.default_rng(seed).normal(
        size=(store.n_entities, store.n_entities))

    def score(s, r, o_array, t=None):
        return table[int(s), np.asarray(o_array)]
    return score


class TestStrategies:
    def test_entity_type_all_works(self, rng):
        split = _eval_split()
        store = split.store
        qi = split.eval_target_idx[0]
        query = (int(store.s[qi]), int(store.r[qi]), int(store.o[qi]),
                 int(store.t[qi]))
        negs, _, _ = sample_eval_negatives("entity_type", query, 30, store,
                                           split, None, rng)
        assert (store.classes[negs] == WORK).all()

    def test_time_constrained_in_window(self, rng):
        split = _eval_split()
        store = split.store
        qi = split.eval_target_idx[0]
        query = (int(store.s[qi]), int(store.r[qi]), int(store.o[qi]),
                 int(store.t[qi]))
        negs, _, _ = sample_eval_negatives("time_constrained", query, 20,
                                           store, split, None, rng)
        dates = store.pub_dates[negs]
        assert (dates >= split.threshold).all()
        assert (dates < split.window_end).all()

    def test_community_membership(self, rng):
        from citekg.community.partition import Partition
        split = _eval_split()
        store = split.store
        works = store.work_ids
        labels = (np.arange(len(works)) % 2).astype(np.int64)
        partition = Partition(node_ids=works, labels=labels, n_communities=2)
        qi = split.eval_target_idx[0]
        o = int(store.o[qi])
        query = (int(store.s[qi]), int(store.r[qi]), o, int(store.t[qi]))
        negs, _, _ = sample_eval_negatives("community", query, 10, store,
                                           split, partition, rng,
                                           on_empty="error")
        target_label = partition.label_of(o)
        for n in negs:
            assert partition.label_of(int(n)) == target_label

    def test_filtered_tails_never_sampled(self, rng):
        split = _eval_split()
        store = split.store
        fi = FilterIndex(store)
        for qi in split.eval_target_idx[:10]:
            s, r, o = int(store.s[qi]), int(store.r[qi]), int(store.o[qi])
            negs, _, _ = sample_eval_negatives(
                "random", (s, r, o, 0), 50, store, split, None, rng)
            blocked = set(fi.tails(s, r).tolist())
            assert not (set(negs.tolist()) & blocked)

    def test_small_pool_replacement_flagged(self, rng):
        store = make_store([("X", "cites", "Y", "2018-01-01"),
                            ("A", "cites", "B", "2015-01-01")],
                           dates={"Y": "2017-05-01", "B": "2014-01-01"})
        split = temporal_split(store, T_VALID, T_TEST)
        qi = split.eval_target_idx[0]
        query = (int(store.s[qi]), 0, int(store.o[qi]), int(store.t[qi]))
        negs, with_replacement, _ = sample_eval_negatives(
            "entity_type", query, 10, store, split, None, rng)
        assert with_replacement and len(negs) == 10

    def test_singleton_community_errors_or_falls_back(self, rng):
        from citekg.community.partition import Partition
        split = _eval_split()
        store = split.store
        qi = split.eval_target_idx[0]
        o = int(store.o[qi])
        query = (int(store.s[qi]), 0, o, int(store.t[qi]))
        works = store.work_ids
        labels = np.zeros(len(works), dtype=np.int64)
        labels[works == o] = 1  # the target is alone in community 1
        partition = Partition(works, labels, 2)
        with pytest.raises(StrategyError):
            sample_eval_negatives("community", query, 5, store, split,
                                  partition, rng)
        negs, _, fallback = sample_eval_negatives(
            "community", query, 5, store, split, partition, rng,
            on_empty="random")
        assert fallback and len(negs) == 5

    def test_pool_subset_relations(self, rng):
        split = _eval_split()
        pools = StrategyPools(split)
        qi = split.eval_target_idx[0]
        o = int(split.store.o[qi])
        tc = set(pools.base_pool("time_constrained", o).tolist())
        et = set(pools.base_pool("entity_type", o).tolist())
        rd = set(pools.base_pool("random", o).tolist())
        assert tc <= et <= rd


class TestEndToEnd:
    def test_oracle_equivalence_exhaustive_pools(self, rng):
        # full-pool ranking equals the independent brute-force ranker
        for seed in range(3):
            split = _eval_split(seed=seed)
            store = split.store
            score = _toy_scorer(store, seed)
            queries = build_queries(split, "full", 0, rng)
            report = evaluate_queries(score, queries, strategy="full")
            oracle_ranks = []
            for q in queries:
                scores = score(q.s, q.r, q.candidates, q.t).tolist()
                oracle_ranks.append(brute_force_rank(scores,
                                                     q.true_position))
            assert report.ranks.tolist() == oracle_ranks
            want = brute_force_metrics(oracle_ranks)
            assert report.mrr == pytest.approx(want["mrr"])

    def test_full_ranking_equals_rank_tail_on_full_pool(self, rng):
        split = _eval_split()
        store = split.store
        score = _toy_scorer(store)
        qi = split.eval_target_idx[0]
        s, r, o, t = (int(store.s[qi]), int(store.r[qi]), int(store.o[qi]),
                      int(store.t[qi]))
        rank, wall = full_ranking(score, store, s, r, o, t)
        query = build_queries(split, "full", 0, rng)[0]
        assert rank == rank_tail(score, query)
        assert wall >= 0.0

    def test_full_rank_weakly_dominates_sampled(self, rng):
        split = _eval_split()
        store = split.store
        score = _toy_scorer(store)
        full_queries = build_queries(split, "full", 0, rng)
        sampled = build_queries(split, "entity_type", 10,
                                np.random.default_rng(4))
        for fq, sq in zip(full_queries, sampled):
            if set(sq.candidates.tolist()) <= set(fq.candidates.tolist()):
                assert rank_tail(score, fq) >= rank_tail(score, sq)

    def test_report_invariant_to_candidate_order(self, rng):
        split = _eval_split()
        score = _toy_scorer(split.store)
        queries = build_queries(split, "random", 20, rng)
        ranks1 = [rank_tail(score, q) for q in queries]
        for q in queries:
            perm = np.random.default_rng(1).permutation(len(q.candidates))
            q.candidates = q.candidates[perm]
            q.true_position = int(np.nonzero(
                perm == q.true_position)[0][0])
        ranks2 = [rank_tail(score, q) for q in queries]
        assert ranks1 == ranks2


class TestSweep:
    def test_mrr_weakly_decreasing_on_nested_pools(self, rng):
        split = _eval_split()
        score = _toy_scorer(split.store)
        records = negative_count_sweep(score, split,
                                       ["random", "entity_type"],
                                       [5, 10, 20], rng)
        by_strategy = {}
        for rec in records:
            by_strategy.setdefault(rec["strategy"], []).append(rec["mrr"])
        for series in by_strategy.values():
            assert all(b <= a + 1e-12 for a, b in zip(series, series[1:]))

    def test_series_length(self, rng):
        split = _eval_split()
        score = _toy_scorer(split.store)
        records = negative_count_sweep(score, split, ["random"],
                                       [2, 4], rng, include_full=False)
        assert len(records) == 2
        records = negative_count_sweep(score, split,
                                       ["random", "entity_type"],
                                       [2, 4, 8], rng, include_full=True)
        assert len(records) == 8

    def test_single_negative_hits_values(self, rng):
        split = _eval_split()
        score = _toy_scorer(split.store)
        records = negative_count_sweep(score, split, ["random"], [1], rng,
                                       include_full=False)
        # two-candidate case: per-query hit is 0 or 1 under integer
        # average-rank, so the aggregate lies in [0, 1]
        assert 0.0 <= records[0]["hits1"] <= 1.0


class TestCitationReport:
    def test_positive_top_not_should_have(self):
        store = planted_citation_store(n_works=30, seed=2)
        qi = 0
        s, o = int(store.s[qi]), int(store.o[qi])

        def score(s_, r_, o_array, t=None):
            # the true positive scores highest
            return np.where(np.asarray(o_array) == o, 10.0, 1.0)

        rec = citation_report(score, store, s, o, n=20,
                              rng=np.random.default_rng(0))
        assert not rec["should_have"]
        assert rec["relative_score"] < 1
        assert rec["rank"] == 1 and not rec["surprising"]

    @staticmethod
    def _report_pool(store, s, o):
        # the negatives the report can draw: works minus known-true
        # tails of (s, cites) minus the pair itself
        pool = full_pool(store, s, REL_CITES, o)
        return pool[pool != s]

    def test_rank_501_is_surprising(self):
        store = planted_citation_store(n_works=1200, seed=3)
        cites = np.nonzero(store.r == REL_CITES)[0]
        s, o = int(store.s[cites[0]]), int(store.o[cites[0]])
        pool = self._report_pool(store, s, o)
        above = set(pool[:501].tolist())  # exactly 501 negatives outscore o

        def score(s_, r_, o_array, t=None):
            o_array = np.asarray(o_array)
            out = np.zeros(o_array.shape)
            for i, cand in enumerate(o_array.tolist()):
                out[i] = 2.0 if cand in above else (1.0 if cand == o else 0.5)
            return out

        rec = citation_report(score, store, s, o, n=len(pool),
                              rng=np.random.default_rng(1))
        assert rec["rank"] == 502
        assert rec["surprising"]

    def test_relative_score_ratio(self):
        # a 2.927x-scored top negative yields relative score 2.927
        store = planted_citation_store(n_works=40, seed=4)
        cites = np.nonzero(store.r == REL_CITES)[0]
        s, o = int(store.s[cites[0]]), int(store.o[cites[0]])
        pool = self._report_pool(store, s, o)
        top_neg = int(pool[0])

        def score(s_, r_, o_array, t=None):
            o_array = np.asarray(o_array)
            out = np.full(o_array.shape, 0.5)
            out[o_array == o] = 1.0
            out[o_array == top_neg] = 2.927
            return out

        rec = citation_report(score, store, s, o, n=len(pool),
                              rng=np.random.default_rng(0))
        assert rec["should_have"]
        assert rec["relative_score"] == pytest.approx(2.927)
        assert rec["top_negative"] == store.labels[top_neg]
