"""Partition quality functions over an undirected citation graph.

Standard published formulations, all expressed through per-community
statistics (size n_c, internal edge count L_c, degree sum D_c) so moves
update in O(1):

* modularity:    sum_c [ L_c/m - (D_c / 2m)^2 ]
* rb_er:         sum_c [ L_c - resolution * rho * n_c (n_c - 1) / 2 ]
  (Potts model against an Erdos-Renyi null of density rho)
* significance:  sum_c binom(n_c, 2) * KL(p_c || rho)
* surprise:      m * KL(q || <q>)  with q the internal-edge fraction
  and <q> the expected fraction under random placement

KL is the binary divergence; degenerate terms (empty communities, a
graph with density 0 or 1) contribute zero.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError

QUALITY_KINDS = ("modularity", "rber", "significance", "surprise")


def _binary_kl(q, p):
    if p <= 0.0 or p >= 1.0:
        return 0.0
    q = min(max(q, 0.0), 1.0)
    out = 0.0
    if q > 0:
        out += q * np.log(q / p)
    if q < 1:
        out += (1 - q) * np.log((1 - q) / (1 - p))
    return out


class QualityState:
    """Per-community statistics plus O(1) move deltas for one quality."""

    def __init__(self, graph, labels, kind, n_communities, resolution=1.0):
        if kind not in QUALITY_KINDS:
            raise ConfigError(f"unknown quality kind {kind!r}")
        self.kind = kind
        self.resolution = resolution
        self.m = graph.m
        self.n = graph.n
        self.N = n_communities
        self.density = (2.0 * self.m / (self.n * (self.n - 1))
                        if self.n > 1 else 0.0)
        labels = np.asarray(labels, dtype=np.int64)
        self.size = np.bincount(labels, minlength=self.N).astype(np.int64)
        self.deg_sum = np.zeros(self.N, dtype=np.int64)
        np.add.at(self.deg_sum, labels, graph.degree)
        self.internal = np.zeros(self.N, dtype=np.int64)
        if graph.m:
            same = labels[graph.edges[:, 0]] == labels[graph.edges[:, 1]]
            np.add.at(self.internal, labels[graph.edges[same, 0]], 1)

    # -- community term per kind ----------------------------------------

    def _term(self, n_c, L_c, D_c) -> float:
        if n_c == 0:
            return 0.0
        if self.kind == "modularity":
            return L_c / self.m - (D_c / (2.0 * self.m)) ** 2
        if self.kind == "rber":
            return L_c - self.resolution * self.density * n_c * (n_c - 1) / 2
        if self.kind == "significance":
            pairs = n_c * (n_c - 1) / 2
            if pairs == 0:
                return 0.0
            return pairs * _binary_kl(L_c / pairs, self.density)
        raise AssertionError(self.kind)

    def _surprise_value(self, internal_total, pairs_total) -> float:
        all_pairs = self.n * (self.n - 1) / 2
        if self.m == 0 or all_pairs == 0:
            return 0.0
        q = internal_total / self.m
        expected = pairs_total / all_pairs
        return self.m * _binary_kl(q, expected)

    def value(self) -> float | None:
        if self.m == 0:
            return None
        if self.kind == "surprise":
            pairs_total = float(np.sum(self.size * (self.size - 1) / 2))
            return self._surprise_value(float(self.internal.sum()),
                                        pairs_total)
        return float(sum(self._term(int(n), int(L), int(D))
                         for n, L, D in zip(self.size, self.internal,
                                            self.deg_sum)))

    # -- moves ------------------------------------------------------------

    def move_delta(self, a, b, k_ua, k_ub, deg_u, size_u=1, e_u=0) -> float:
        """Quality change for moving a unit (node or super-node) a -> b.

        ``k_ua``/``k_ub`` are its edge counts into the two communities
        (excluding its own internal edges ``e_u``).
        """
        if a == b:
            return 0.0
        if self.kind == "surprise":
            internal = float(self.internal.sum())
            pairs = float(np.sum(self.size * (self.size - 1) / 2))
            before = self._surprise_value(internal, pairs)
            internal2 = internal - k_ua + k_ub
            na, nb = self.size[a], self.size[b]
            pairs2 = pairs \
                - na * (na - 1) / 2 + (na - size_u) * (na - size_u - 1) / 2 \
                - nb * (nb - 1) / 2 + (nb + size_u) * (nb + size_u - 1) / 2
            return self._surprise_value(internal2, pairs2) - before
        before = (self._term(self.size[a], self.internal[a], self.deg_sum[a])
                  + self._term(self.size[b], self.internal[b],
                               self.deg_sum[b]))
        after = (self._term(self.size[a] - size_u,
                            self.internal[a] - k_ua - e_u,
                            self.deg_sum[a] - deg_u)
                 + self._term(self.size[b] + size_u,
                              self.internal[b] + k_ub + e_u,
                              self.deg_sum[b] + deg_u))
        return float(after - before)

    def apply_move(self, a, b, k_ua, k_ub, deg_u, size_u=1, e_u=0):
        self.size[a] -= size_u
        self.size[b] += size_u
        self.deg_sum[a] -= deg_u
        self.deg_sum[b] += deg_u
        self.internal[a] -= k_ua + e_u
        self.internal[b] += k_ub + e_u


def quality(graph, labels, kind, n_communities=None, resolution=1.0):
    """Scalar quality of a labeling; None on an empty edge set."""
    if n_communities is None:
        n_communities = int(np.max(labels)) + 1 if len(labels) else 1
    state = QualityState(graph, labels, kind, n_communities, resolution)
    return state.value()
