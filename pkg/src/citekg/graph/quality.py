"""Validity and completeness metrics for an extracted graph."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .store import (AUTHOR, REL_AFFILIATION, REL_AUTHOR, REL_CITES,
                    REL_PUBLISHED_IN, WORK, GraphStore)


@dataclass(frozen=True)
class QualityReport:
    """Percentages in [0, 100]; None when the denominator is empty.

    ``mutual_citation_pct`` counts citation quads whose reverse edge
    also exists (both directions of a reciprocal pair count, at any
    timestamp). Completeness metrics count works with at least one
    author / venue link and authors with at least one affiliation.
    """

    mutual_citation_pct: float | None
    authorship_completeness_pct: float | None
    venue_completeness_pct: float | None
    institution_completeness_pct: float | None

    def as_dict(self) -> dict:
        return asdict(self)


def _pct(num: int, den: int) -> float | None:
    return None if den == 0 else 100.0 * num / den


def quality_report(store: GraphStore) -> QualityReport:
    n = store.n_entities
    cites = store.r == REL_CITES
    pairs = store.s[cites].astype(np.int64) * n + store.o[cites]
    reverse = store.o[cites].astype(np.int64) * n + store.s[cites]
    mutual = int(np.isin(pairs, np.unique(reverse)).sum())

    works = store.ids_of_class(WORK)
    authors = store.ids_of_class(AUTHOR)
    has = {rel: np.zeros(n, dtype=bool)
           for rel in (REL_AUTHOR, REL_PUBLISHED_IN, REL_AFFILIATION)}
    for rel, flag in has.items():
        flag[store.s[store.r == rel]] = True

    return QualityReport(
        mutual_citation_pct=_pct(mutual, int(cites.sum())),
        authorship_completeness_pct=_pct(
            int(has[REL_AUTHOR][works].sum()), len(works)),
        venue_completeness_pct=_pct(
            int(has[REL_PUBLISHED_IN][works].sum()), len(works)),
        institution_completeness_pct=_pct(
            int(has[REL_AFFILIATION][authors].sum()), len(authors)),
    )
