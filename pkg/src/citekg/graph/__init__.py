from .store import (AUTHOR, CONCEPT, INSTITUTION, N_RELATIONS, REL_AFFILIATION,
                    REL_AUTHOR, REL_CITES, REL_PUBLISHED_IN, RELATION_LABELS,
                    VENUE, WORK, GraphStore)
from .io import (export_tsv, ingest_quads, load_store, save_store)
from .sampling import (TARGET_UNREACHABLE, VALID_ABLATIONS, ablation_variant,
                       drop_isolated_works, drop_undated_works, snowball_sample)
from .split import (INDUCTIVE, TRANSDUCTIVE, TemporalSplit, temporal_split,
                    merge_validation_into_train)
from .quality import QualityReport, quality_report

__all__ = [
    "AUTHOR", "CONCEPT", "INSTITUTION", "N_RELATIONS", "REL_AFFILIATION",
    "REL_AUTHOR", "REL_CITES", "REL_PUBLISHED_IN", "RELATION_LABELS", "VENUE",
    "WORK", "GraphStore", "export_tsv", "ingest_quads", "load_store",
    "save_store", "TARGET_UNREACHABLE", "VALID_ABLATIONS", "ablation_variant",
    "drop_isolated_works", "drop_undated_works", "snowball_sample",
    "INDUCTIVE", "TRANSDUCTIVE", "TemporalSplit", "temporal_split",
    "merge_validation_into_train", "QualityReport", "quality_report",
]
