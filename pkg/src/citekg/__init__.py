"""citekg: temporal citation knowledge-graph embedding and link prediction."""

__version__ = "0.1.0"

from .graph import (GraphStore, TemporalSplit, ablation_variant,
                    drop_isolated_works, drop_undated_works, export_tsv,
                    ingest_quads, load_store, merge_validation_into_train,
                    quality_report, save_store, snowball_sample,
                    temporal_split)

__all__ = [
    "__version__", "GraphStore", "TemporalSplit", "ablation_variant",
    "drop_isolated_works", "drop_undated_works", "export_tsv", "ingest_quads",
    "load_store", "merge_validation_into_train", "quality_report",
    "save_store", "snowball_sample", "temporal_split",
]
