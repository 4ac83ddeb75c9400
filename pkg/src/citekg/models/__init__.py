from .checkpoint import Checkpoint, MAGIC_ENCODER, MAGIC_SHALLOW
from .shallow import (MODEL_KINDS, ComplEx, DEDistMult, DETransE, RotatE,
                      ShallowModel, TimeScale)
from .scoring import (diachronic_embed, score_complex, score_rotate,
                      score_translation, score_trilinear)
from .tables import init_bound, init_entity_random

__all__ = [
    "Checkpoint", "MAGIC_ENCODER", "MAGIC_SHALLOW", "MODEL_KINDS", "ComplEx",
    "DEDistMult", "DETransE", "RotatE", "ShallowModel", "TimeScale",
    "diachronic_embed", "score_complex", "score_rotate", "score_translation",
    "score_trilinear", "init_bound", "init_entity_random",
]
