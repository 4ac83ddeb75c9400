from .encoders import (RgcnEncoder, SageEncoder, decode_dot, encode_graphsage,
                       encode_rgcn)
from .features import degree_features
from .graphview import N_GROUPS, GraphView, sample_neighborhood
from .models import (GraphSAGELinkPredictor, RGCNLinkPredictor, embed_unseen)

__all__ = [
    "RgcnEncoder", "SageEncoder", "decode_dot", "encode_graphsage",
    "encode_rgcn", "degree_features", "N_GROUPS", "GraphView",
    "sample_neighborhood", "GraphSAGELinkPredictor", "RGCNLinkPredictor",
    "embed_unseen",
]
