from .citation_graph import CitationGraph
from .concepts import concept_quality
from .leiden import ConstrainedLeiden, leiden_constrained
from .partition import Partition, init_fixed_partition
from .quality import QUALITY_KINDS, QualityState, quality

__all__ = [
    "CitationGraph", "concept_quality", "ConstrainedLeiden",
    "leiden_constrained", "Partition", "init_fixed_partition",
    "QUALITY_KINDS", "QualityState", "quality",
]
