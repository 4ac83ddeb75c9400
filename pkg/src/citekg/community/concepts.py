"""Concept-based community quality.

Every community is scored by its dominant root concept: walk each
linked concept up the (acyclic) hierarchy to its roots, tally member
papers per root, take the root covering the most papers, and report the
percentage of the community's papers under it. Communities without any
concept-linked paper get None.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError


def _roots_of_concepts(concept_parents, concepts):
    """Memoized concept -> frozenset(roots) over child->parent edges."""
    parents: dict[int, list[int]] = {}
    for child, parent in np.asarray(concept_parents,
                                    dtype=np.int64).reshape(-1, 2):
        parents.setdefault(int(child), []).append(int(parent))
    roots: dict[int, frozenset] = {}
    state: dict[int, int] = {}  # 1 = in progress, 2 = done

    def visit(c: int) -> frozenset:
        if state.get(c) == 2:
            return roots[c]
        if state.get(c) == 1:
            raise ConfigError(f"concept hierarchy contains a cycle at {c}")
        state[c] = 1
        ps = parents.get(c, [])
        if not ps:
            out = frozenset([c])
        else:
            out = frozenset().union(*(visit(p) for p in ps))
        state[c] = 2
        roots[c] = out
        return out

    for c in concepts:
        visit(int(c))
    return roots


def concept_quality(partition, concept_links, concept_parents):
    """Per-community dominant-root coverage percentages.

    Returns a list of records ``{community, n_papers, n_linked, root,
    pct}`` sorted by community id; ``root``/``pct`` are None for
    communities without concept-linked papers.
    """
    links = np.asarray(concept_links, dtype=np.int64).reshape(-1, 2)
    concepts = np.unique(links[:, 1]) if links.size else np.zeros(0, np.int64)
    root_map = _roots_of_concepts(concept_parents, concepts)

    paper_roots: dict[int, set] = {}
    for work, concept in links:
        paper_roots.setdefault(int(work), set()).update(
            root_map[int(concept)])

    records = []
    used = sorted(set(partition.labels.tolist()))
    for label in used:
        papers = partition.members(label)
        tallies: dict[int, int] = {}
        linked = 0
        for p in papers.tolist():
            rs = paper_roots.get(int(p))
            if not rs:
                continue
            linked += 1
            for root in rs:
                tallies[root] = tallies.get(root, 0) + 1
        if not tallies:
            records.append({"community": int(label),
                            "n_papers": int(len(papers)),
                            "n_linked": 0, "root": None, "pct": None})
            continue
        # largest tally wins; ties break to the smallest root id
        best_root = min(tallies, key=lambda r: (-tallies[r], r))
        pct = 100.0 * tallies[best_root] / len(papers)
        records.append({"community": int(label),
                        "n_papers": int(len(papers)),
                        "n_linked": int(linked), "root": int(best_root),
                        "pct": float(pct)})
    return records
