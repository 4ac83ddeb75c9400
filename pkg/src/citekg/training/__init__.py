from .config import config_to_params, load_kv_config
from .losses import (cross_entropy_loss, logsigmoid_loss,
                     self_adversarial_weights, softmax_cross_entropy)
from .negatives import corruption_sides, sample_train_negatives
from .optimizers import RowAdagrad, RowSGD, make_optimizer
from .loop import fit_shallow

__all__ = [
    "config_to_params", "load_kv_config", "cross_entropy_loss",
    "logsigmoid_loss", "self_adversarial_weights", "softmax_cross_entropy",
    "corruption_sides", "sample_train_negatives", "RowAdagrad", "RowSGD",
    "make_optimizer", "fit_shallow",
]
