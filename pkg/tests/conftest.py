import numpy as np
import pytest

from citekg.graph.store import (AUTHOR, CONCEPT, INSTITUTION, VENUE, WORK,
                                GraphStore, RELATION_IDS)
from citekg.utils import NO_DATE, parse_date


def make_store(quads, classes=None, dates=None, concept_links=None,
               concept_parents=None):
    """Build a store from human-readable rows.

    ``quads``: (subject, relation-label, object, iso-date) tuples.
    ``classes``: optional {label: class} overrides (otherwise inferred).
    ``dates``: optional {label: iso-date} overrides for works.
    """
    inferred = {}
    rows = []
    for s, rel, o, date in quads:
        rel_id = RELATION_IDS[rel]
        s_cls = (WORK, WORK, WORK, AUTHOR)[rel_id]
        o_cls = (WORK, AUTHOR, VENUE, INSTITUTION)[rel_id]
        inferred.setdefault(s, s_cls)
        inferred.setdefault(o, o_cls)
        rows.append((s, rel_id, o, parse_date(date)))
    for label, cls in (classes or {}).items():
        inferred[label] = cls
    for label in (dates or {}):
        inferred.setdefault(label, WORK)
    for pair in (concept_links or []):
        inferred.setdefault(pair[0], WORK)
        inferred.setdefault(pair[1], CONCEPT)
    for pair in (concept_parents or []):
        inferred.setdefault(pair[0], CONCEPT)
        inferred.setdefault(pair[1], CONCEPT)
    labels = sorted(inferred)
    ids = {lab: i for i, lab in enumerate(labels)}
    pub = np.full(len(labels), NO_DATE, dtype=np.int64)
    for s, rel_id, o, t in rows:
        if inferred[s] == WORK:
            if pub[ids[s]] == NO_DATE or t < pub[ids[s]]:
                pub[ids[s]] = t
    for label, date in (dates or {}).items():
        pub[ids[label]] = parse_date(date)
    quad_arr = np.asarray([(ids[s], r, ids[o], t) for s, r, o, t in rows],
                          dtype=np.int64).reshape(-1, 4)
    links = [(ids[a], ids[b]) for a, b in (concept_links or [])] or None
    parents = [(ids[a], ids[b]) for a, b in (concept_parents or [])] or None
    return GraphStore.from_arrays(
        labels=labels,
        classes=np.asarray([inferred[lab] for lab in labels], dtype=np.uint8),
        pub_dates=pub, quads=quad_arr,
        concept_links=links, concept_parents=parents)


def random_toy_store(rng, n_works=20, n_authors=6, n_venues=3,
                     n_institutions=2, n_cites=40, date_lo="2010-01-01",
                     date_hi="2023-01-01"):
    """Random well-formed store for brute-force comparisons."""
    lo, hi = parse_date(date_lo), parse_date(date_hi)
    works = [f"W{i}" for i in range(n_works)]
    authors = [f"A{i}" for i in range(n_authors)]
    venues = [f"V{i}" for i in range(n_venues)]
    insts = [f"I{i}" for i in range(n_institutions)]
    dates = {w: int(rng.integers(lo, hi)) for w in works}
    quads = []
    for _ in range(n_cites):
        a, b = rng.choice(n_works, size=2, replace=False)
        quads.append((works[a], "cites", works[b], _iso(dates[works[a]])))
    for w in works:
        for a in rng.choice(n_authors, size=rng.integers(0, 3), replace=False):
            quads.append((w, "author", authors[a], _iso(dates[w])))
        if rng.random() < 0.8:
            quads.append((w, "published_in", venues[rng.integers(n_venues)],
                          _iso(dates[w])))
    for a in authors:
        if rng.random() < 0.7:
            quads.append((a, "affiliation", insts[rng.integers(n_institutions)],
                          _iso(int(rng.integers(lo, hi)))))
    return make_store(quads, dates={w: _iso(d) for w, d in dates.items()})


def _iso(days):
    from citekg.utils import format_date
    return format_date(days)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
