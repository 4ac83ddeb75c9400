"""Sparse per-row optimizers over shared parameter tables.

Updates touch only the rows present in a sparse gradient. Workers may
apply updates to the same tables concurrently without locks; torn or
lost updates under contention are an accepted part of the relaxed-
consistency training contract.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError


class RowSGD:
    def __init__(self, tables: dict, learning_rate: float):
        self.tables = tables
        self.lr = learning_rate

    def apply(self, grads: dict):
        # rows=None updates the whole table (dense parameters)
        for name, (rows, g) in grads.items():
            if rows is None:
                self.tables[name] -= self.lr * g
            else:
                self.tables[name][rows] -= self.lr * g


class RowAdagrad:
    """Per-coordinate accumulated-squared-gradient scaling."""

    def __init__(self, tables: dict, learning_rate: float, eps: float = 1e-10):
        self.tables = tables
        self.lr = learning_rate
        self.eps = eps
        self.state = {name: np.zeros_like(t) for name, t in tables.items()}

    def apply(self, grads: dict):
        for name, (rows, g) in grads.items():
            acc = self.state[name]
            if rows is None:
                acc += g * g
                self.tables[name] -= self.lr * g / (np.sqrt(acc) + self.eps)
            else:
                acc[rows] += g * g
                self.tables[name][rows] -= self.lr * g / (np.sqrt(acc[rows])
                                                          + self.eps)


def make_optimizer(kind: str, tables: dict, learning_rate: float):
    if kind == "adagrad":
        return RowAdagrad(tables, learning_rate)
    if kind == "sgd":
        return RowSGD(tables, learning_rate)
    raise ConfigError(f"unknown optimizer {kind!r}")
