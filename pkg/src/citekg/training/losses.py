"""Training losses and self-adversarial negative weighting.

The margin log-sigmoid loss is written for distance-style inputs
(nonnegative, smaller is better)::

    L = -log sigma(gamma - d_pos) - sum_j w_j log sigma(d_j - gamma)

Similarity scorers feed it their negated scores with gamma = 0, which
reduces to -log sigma(f_pos) - sum_j w_j log sigma(-f_j). Negative
weights are a softmax of the (similarity-oriented) scores at
temperature alpha and are treated as constants: no gradient flows
through them.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit, softmax

from ..errors import ContractError


def self_adversarial_weights(neg_scores, alpha: float) -> np.ndarray:
    """Softmax of alpha-scaled scores along the last axis."""
    neg_scores = np.asarray(neg_scores, dtype=np.float64)
    return softmax(alpha * neg_scores, axis=-1)


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def logsigmoid_loss(pos_score, neg_scores, weights, gamma: float):
    """Margin log-sigmoid loss on distance-style scores.

    Returns ``(loss, d_pos, d_neg)``; inputs broadcast over a leading
    batch axis, with negatives on the last axis.
    """
    pos = np.asarray(pos_score, dtype=np.float64)
    neg = np.asarray(neg_scores, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    loss = -_log_sigmoid(gamma - pos) - np.sum(w * _log_sigmoid(neg - gamma),
                                               axis=-1)
    d_pos = expit(pos - gamma)
    d_neg = -w * expit(gamma - neg)
    return loss, d_pos, d_neg


def softmax_cross_entropy(scores, true_index=0):
    """-log softmax(scores)[true]; returns ``(loss, d_scores)``.

    ``scores`` holds all candidates (truth included) on the last axis.
    """
    scores = np.asarray(scores, dtype=np.float64)
    p = softmax(scores, axis=-1)
    true_p = np.take_along_axis(
        p, np.full(scores.shape[:-1] + (1,), true_index, dtype=np.int64),
        axis=-1)[..., 0]
    loss = -np.log(np.maximum(true_p, np.finfo(np.float64).tiny))
    d = p.copy()
    sel = (Ellipsis, true_index)
    d[sel] -= 1.0
    return loss, d


def cross_entropy_loss(pos_score, head_scores, tail_scores,
                       head_true=0, tail_true=0):
    """Both-direction softmax loss over corruption candidate scores.

    ``head_scores`` / ``tail_scores`` are candidate score arrays that
    must contain the true quad's score at ``*_true``; ``pos_score`` is
    only used to validate that contract.
    """
    for name, arr, idx in (("head", head_scores, head_true),
                           ("tail", tail_scores, tail_true)):
        arr = np.asarray(arr)
        if not np.allclose(arr[..., idx], pos_score):
            raise ContractError(
                f"{name} candidate list does not contain the true quad's "
                f"score at index {idx}")
    lh, dh = softmax_cross_entropy(head_scores, head_true)
    lt, dt = softmax_cross_entropy(tail_scores, tail_true)
    return lh + lt, dh, dt
