"""Temporal partitioning of quads into train / eval-target / exo sets.

A split is taken at a threshold date: quads strictly before it are
training data, quads in the evaluation window are classified as either
eval targets (citation links between two unseen works) or exo links
(window quads touching at least one seen node). A work is *unseen* iff
its publication date is on or after the threshold; a non-work entity is
unseen iff it occurs in no pre-threshold quad.

In transductive mode the exo links are folded into the training data;
in inductive mode they are withheld from training and exposed only as
auxiliary links when evaluating, and training additionally excludes the
(rare, mutual-citation-artifact) pre-threshold quads that touch an
unseen work, so unseen entities never leak into training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..utils import NO_DATE, format_date
from .store import REL_CITES, WORK, GraphStore

TRANSDUCTIVE = "transductive"
INDUCTIVE = "inductive"
PHASE_VALIDATION = "validation"
PHASE_TEST = "test"


@dataclass(frozen=True)
class TemporalSplit:
    store: GraphStore
    t_valid: int
    t_test: int
    mode: str
    phase: str
    threshold: int               # t_valid in validation phase, t_test in test
    window_end: int | None       # exclusive end of the eval window (None = open)
    train_idx: np.ndarray        # quads with t < threshold
    eval_target_idx: np.ndarray  # window cites-quads between unseen works
    exo_idx: np.ndarray          # window quads touching >=1 seen node
    dropped_idx: np.ndarray      # window quads with no seen endpoint, non-target
    future_idx: np.ndarray       # quads at/after window_end (next phase)
    unseen_entities: np.ndarray  # bool mask over entities

    @property
    def n_train(self) -> int:
        return len(self.train_idx)

    def training_idx(self) -> np.ndarray:
        """Quad indices a model may train on, resolved by mode."""
        if self.mode == TRANSDUCTIVE:
            return np.sort(np.concatenate([self.train_idx, self.exo_idx]))
        unseen = self.unseen_entities
        st = self.store
        keep = ~(unseen[st.s[self.train_idx]] | unseen[st.o[self.train_idx]])
        return self.train_idx[keep]

    def auxiliary_idx(self) -> np.ndarray:
        """Exo quads, usable at evaluation time in inductive mode."""
        return self.exo_idx

    def evaluation_graph_idx(self) -> np.ndarray:
        """Quads visible to an encoder when embedding at evaluation time."""
        return np.sort(np.concatenate([self.training_idx(), self.exo_idx]))

    def describe(self) -> dict:
        return {
            "mode": self.mode, "phase": self.phase,
            "t_valid": format_date(self.t_valid),
            "t_test": format_date(self.t_test),
            "n_train": int(self.n_train),
            "n_eval_targets": int(len(self.eval_target_idx)),
            "n_exo": int(len(self.exo_idx)),
            "n_dropped": int(len(self.dropped_idx)),
            "n_future": int(len(self.future_idx)),
            "n_unseen_entities": int(self.unseen_entities.sum()),
        }


def _classify(store: GraphStore, t_valid: int, t_test: int, mode: str,
              phase: str) -> TemporalSplit:
    threshold = t_valid if phase == PHASE_VALIDATION else t_test
    window_end = t_test if phase == PHASE_VALIDATION else None

    works = store.classes == WORK
    undated = works & (store.pub_dates == NO_DATE)
    if undated.any():
        bad = np.nonzero(undated)[0][:5]
        names = ", ".join(store.labels[i] for i in bad)
        raise ConfigError(
            f"{int(undated.sum())} works have no publication date "
            f"(e.g. {names}); run drop_undated_works first")

    train_mask = store.t < threshold
    in_window = ~train_mask if window_end is None else (
        ~train_mask & (store.t < window_end))
    future_mask = ~train_mask & ~in_window

    unseen = np.zeros(store.n_entities, dtype=bool)
    unseen[works] = store.pub_dates[works] >= threshold
    seen_structurally = np.zeros(store.n_entities, dtype=bool)
    seen_structurally[store.s[train_mask]] = True
    seen_structurally[store.o[train_mask]] = True
    unseen[~works] = ~seen_structurally[~works]

    target_mask = (in_window & (store.r == REL_CITES) &
                   unseen[store.s] & unseen[store.o])
    exo_mask = in_window & ~target_mask & ~(unseen[store.s] & unseen[store.o])
    dropped_mask = in_window & ~target_mask & ~exo_mask

    idx = np.arange(store.n_quads)
    return TemporalSplit(
        store=store, t_valid=t_valid, t_test=t_test, mode=mode, phase=phase,
        threshold=threshold, window_end=window_end,
        train_idx=idx[train_mask], eval_target_idx=idx[target_mask],
        exo_idx=idx[exo_mask], dropped_idx=idx[dropped_mask],
        future_idx=idx[future_mask], unseen_entities=unseen)


def temporal_split(store: GraphStore, t_valid: int, t_test: int,
                   mode: str = TRANSDUCTIVE) -> TemporalSplit:
    """Validation-phase split: train before ``t_valid``, evaluate on
    ``[t_valid, t_test)``. Dates on a threshold fall into the later
    period."""
    if mode not in (TRANSDUCTIVE, INDUCTIVE):
        raise ConfigError(f"unknown split mode {mode!r}")
    if not t_valid < t_test:
        raise ConfigError("t_valid must be before t_test")
    split = _classify(store, t_valid, t_test, mode, PHASE_VALIDATION)
    if split.n_train == 0:
        raise ConfigError("empty training set: every quad is at or after "
                          "the validation threshold")
    if len(split.eval_target_idx) == 0:
        raise ConfigError("no evaluation targets: no citation links between "
                          "unseen works in the validation window")
    return split


def merge_validation_into_train(split: TemporalSplit) -> TemporalSplit:
    """Test-phase split: every quad before ``t_test`` becomes training
    data and the evaluation window opens at ``t_test``."""
    merged = _classify(split.store, split.t_valid, split.t_test, split.mode,
                       PHASE_TEST)
    if len(merged.eval_target_idx) == 0:
        raise ConfigError("no evaluation targets in the test window")
    return merged
