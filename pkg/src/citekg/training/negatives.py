"""Uniform corruption sampling for training batches."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError

HEAD, TAIL = 0, 1


def sample_train_negatives(quad, n: int, side: int, rng, store) -> np.ndarray:
    """``n`` uniform entity draws replacing one side of a quad.

    Draws are with replacement from the full entity set; training
    negatives are intentionally unfiltered.
    """
    if n < 1:
        raise ConfigError("need at least one negative per positive")
    return rng.integers(0, store.n_entities, size=n, dtype=np.int64)


def corruption_sides(batch_size: int) -> np.ndarray:
    """Deterministic half-half schedule: even batch positions corrupt
    the tail, odd positions the head."""
    sides = np.full(batch_size, TAIL, dtype=np.int64)
    sides[1::2] = HEAD
    return sides


def sample_negatives_batch(batch_size: int, n: int, rng, n_entities: int):
    return rng.integers(0, n_entities, size=(batch_size, n), dtype=np.int64)
