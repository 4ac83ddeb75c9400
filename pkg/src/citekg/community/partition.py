"""Work-to-community assignments under a fixed label budget."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..utils import as_rng


@dataclass
class Partition:
    """Assignment of graph nodes (store entity ids) to community labels.

    Labels live in ``[0, n_communities)``; ``cap`` is an optional hard
    bound on community size (checked by ``validate``).
    """

    node_ids: np.ndarray
    labels: np.ndarray
    n_communities: int
    cap: int | None = None
    _pos: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.node_ids = np.asarray(self.node_ids, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.node_ids) != len(self.labels):
            raise ConfigError("node_ids and labels length mismatch")
        self._pos = {int(n): i for i, n in enumerate(self.node_ids)}

    def label_of(self, node: int):
        pos = self._pos.get(int(node))
        return None if pos is None else int(self.labels[pos])

    def members(self, label: int) -> np.ndarray:
        return self.node_ids[self.labels == label]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_communities)

    def n_used(self) -> int:
        return int((self.sizes() > 0).sum())

    def validate(self):
        if len(self.labels) and (self.labels.min() < 0
                                 or self.labels.max() >= self.n_communities):
            raise ConfigError("label outside the community budget")
        if self.cap is not None and len(self.labels):
            worst = int(self.sizes().max())
            if worst > self.cap:
                raise ConfigError(
                    f"community of size {worst} exceeds cap {self.cap}")
        return self


def init_fixed_partition(works, n_communities: int, rng,
                         cap: int | None = None) -> Partition:
    """Uniform random assignment over ``n_communities`` labels.

    With a cap, assignment is uniform over labels with remaining
    capacity (requires n_communities * cap >= len(works)).
    """
    works = np.asarray(works, dtype=np.int64)
    if n_communities < 1:
        raise ConfigError("need at least one community")
    rng = as_rng(rng)
    if cap is None:
        labels = rng.integers(0, n_communities, size=len(works))
        return Partition(works, labels, n_communities)
    if n_communities * cap < len(works):
        raise ConfigError(
            f"{len(works)} works cannot fit {n_communities} communities "
            f"of at most {cap}")
    labels = np.empty(len(works), dtype=np.int64)
    remaining = np.full(n_communities, cap, dtype=np.int64)
    open_labels = list(range(n_communities))
    for pos in rng.permutation(len(works)):
        pick = open_labels[int(rng.integers(len(open_labels)))]
        labels[pos] = pick
        remaining[pick] -= 1
        if remaining[pick] == 0:
            open_labels.remove(pick)
    return Partition(works, labels, n_communities, cap=cap)
