from .ranking import (EvalQuery, RankingReport, aggregate, evaluate_queries,
                      query_records, rank_from_scores, rank_tail)
from .strategies import (STRATEGIES, FilterIndex, StrategyPools,
                         build_queries, full_pool, full_ranking,
                         sample_eval_negatives)
from .sweep import negative_count_sweep
from .anomalies import SURPRISING_RANK, citation_report

__all__ = [
    "EvalQuery", "RankingReport", "aggregate", "evaluate_queries",
    "query_records", "rank_from_scores", "rank_tail", "STRATEGIES",
    "FilterIndex", "StrategyPools", "build_queries", "full_pool",
    "full_ranking", "sample_eval_negatives", "negative_count_sweep",
    "SURPRISING_RANK", "citation_report",
]
