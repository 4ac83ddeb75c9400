"""Inductive link predictors: encoder + dot decoder behind fit/score.

Three input variants per encoder:

* ``embedding``: a trainable input table, learned end to end
* ``hybrid``: frozen pretrained shallow-model embeddings as inputs
  (the table is never updated; checkpoints reference it by content
  hash)
* ``degree``: fixed relational degree features

Training minimizes both-direction softmax cross-entropy over citation
links of the training graph, with fanout-sampled neighborhoods.
Evaluation uses full neighborhoods over the training-plus-auxiliary
view, so unseen works are embedded purely from their links to known
nodes; neighbors without input states (unseen entities in inductive
mode) are skipped, and zero-neighbor nodes get the zero-message state.
"""

from __future__ import annotations

import json
import time

import numpy as np
from sklearn.base import BaseEstimator

from ..errors import ConfigError, ContractError, NumericError
from ..graph.split import INDUCTIVE
from ..graph.store import REL_CITES
from ..models.checkpoint import Checkpoint
from ..models.tables import init_uniform
from ..training.losses import softmax_cross_entropy
from ..training.optimizers import make_optimizer
from ..utils import as_rng
from .encoders import RgcnEncoder, SageEncoder, build_blocks, decode_dot
from .features import degree_features
from .graphview import GraphView

VARIANT_ALIASES = {"e": "embedding", "embedding": "embedding",
                   "h": "hybrid", "hybrid": "hybrid",
                   "d": "degree", "degree": "degree"}


class _EncoderLinkPredictor(BaseEstimator):
    encoder_kind = ""

    def __init__(self, variant="embedding", dim=400, n_layers=1, fanout=25,
                 aggregator="mean", normalization="layer", n_bases=8,
                 dropout=0.1, n_negatives=50, learning_rate=0.03,
                 batch_size=128, max_steps=None, time_budget_s=None,
                 optimizer="adagrad", val_period=0, val_queries=100,
                 val_negatives=100, n_jobs=1, random_state=0):
        self.variant = variant
        self.dim = dim
        self.n_layers = n_layers
        self.fanout = fanout
        self.aggregator = aggregator
        self.normalization = normalization
        self.n_bases = n_bases
        self.dropout = dropout
        self.n_negatives = n_negatives
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_steps = max_steps
        self.time_budget_s = time_budget_s
        self.optimizer = optimizer
        self.val_period = val_period
        self.val_queries = val_queries
        self.val_negatives = val_negatives
        self.n_jobs = n_jobs
        self.random_state = random_state

    # -- setup ----------------------------------------------------------

    def _resolved_variant(self) -> str:
        try:
            return VARIANT_ALIASES[str(self.variant).lower()]
        except KeyError:
            raise ConfigError(f"unknown variant {self.variant!r}") from None

    def _make_encoder(self, d_in, rng):
        dims = [d_in] + [self.dim] * max(self.n_layers, 1)
        if self.encoder_kind == "graphsage":
            return SageEncoder(dims, aggregator=self.aggregator,
                               normalization=self.normalization, rng=rng)
        return RgcnEncoder(dims, n_bases=self.n_bases,
                           normalization=self.normalization, rng=rng)

    def _setup_inputs(self, split, pretrained, rng):
        variant = self._resolved_variant()
        store = split.store
        if variant == "hybrid":
            if pretrained is None:
                raise ConfigError("hybrid variant needs a pretrained "
                                  "embedding checkpoint")
            if pretrained.meta.get("n_entities") != store.n_entities:
                raise ContractError(
                    f"pretrained checkpoint covers "
                    f"{pretrained.meta.get('n_entities')} entities, store "
                    f"has {store.n_entities}")
            self.frozen_inputs_ = np.ascontiguousarray(
                pretrained.tables["entities"])
            self.frozen_hash_ = pretrained.content_hash()
            self.input_kind_ = "frozen"
            return self.frozen_inputs_.shape[1]
        if variant == "degree":
            self.feature_inputs_ = degree_features(store,
                                                   split.training_idx())
            self.input_kind_ = "features"
            return self.feature_inputs_.shape[1]
        self.params_["inputs"] = init_uniform(
            (store.n_entities, self.dim), self.dim, 0.0, rng)
        self.input_kind_ = "table"
        return self.dim

    def _input_rows(self):
        if self.input_kind_ == "frozen":
            table = self.frozen_inputs_
        elif self.input_kind_ == "features":
            table = self.feature_inputs_
        else:
            table = self.params_["inputs"]

        def inputs_of(ids):
            if len(ids) == 0:
                return np.zeros((0, table.shape[1]))
            return table[ids]
        return inputs_of

    # -- training ---------------------------------------------------------

    def fit(self, split, pretrained=None, log_path=None):
        """Train on the split's citation links.

        ``pretrained`` (hybrid variant) is a shallow-model Checkpoint
        whose entity table becomes the frozen input features.
        """
        if self.max_steps is None and self.time_budget_s is None:
            raise ConfigError("set max_steps and/or time_budget_s")
        store = split.store
        root = as_rng(self.random_state)
        init_rng, val_rng = root.spawn(2)
        worker_rngs = root.spawn(max(self.n_jobs, 1))
        self.params_ = {}
        self.split_mode_ = split.mode
        self.n_entities_ = store.n_entities
        d_in = self._setup_inputs(split, pretrained, init_rng)
        self.encoder_ = self._make_encoder(d_in, init_rng)
        self.params_.update(self.encoder_.params)
        self.encoder_.params = self.params_  # inputs ride in the same dict

        train_idx = split.training_idx()
        view = GraphView(store, train_idx)
        cites = train_idx[store.r[train_idx] == REL_CITES]
        if len(cites) == 0:
            raise ConfigError("no citation links to train on")
        pairs = np.stack([store.s[cites], store.o[cites]], axis=1)
        optimizer = make_optimizer(self.optimizer, self.params_,
                                   self.learning_rate)

        max_steps = np.inf if self.max_steps is None else int(self.max_steps)
        budget = np.inf if self.time_budget_s is None \
            else float(self.time_budget_s)
        round_steps = self.val_period if self.val_period else 100
        start = time.monotonic()
        step, history = 0, []
        best = {k: v.copy() for k, v in self.params_.items()}
        best_mrr = self._validation_mrr(split, val_rng)
        diverged = False
        log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
        try:
            while step < max_steps and time.monotonic() - start < budget:
                todo = int(min(round_steps, max_steps - step))
                try:
                    loss = self._run_steps(todo, pairs, view, worker_rngs,
                                           optimizer, store)
                    if not np.isfinite(loss):
                        raise NumericError("non-finite training loss")
                except NumericError:
                    diverged = True
                    self.params_ = {k: v.copy() for k, v in best.items()}
                    self.encoder_.params = self.params_
                    break
                step += todo
                self._h_cache = None
                val = self._validation_mrr(split, val_rng)
                record = {"step": step, "loss": loss, "val_mrr": val,
                          "elapsed_s": time.monotonic() - start}
                history.append(record)
                if log_fh:
                    log_fh.write(json.dumps(record) + "\n")
                if val is not None and (best_mrr is None or val >= best_mrr):
                    best_mrr = val
                    best = {k: v.copy() for k, v in self.params_.items()}
        finally:
            if log_fh:
                log_fh.close()
        if best_mrr is not None and not diverged:
            self.params_ = best
            self.encoder_.params = self.params_
        self.step_ = step
        self.history_ = history
        self.best_val_mrr_ = best_mrr
        self.diverged_ = diverged
        self._h_cache = None
        self._rng_state = {"workers": [r.bit_generator.state
                                       for r in worker_rngs],
                           "val": val_rng.bit_generator.state}
        return self

    def _run_steps(self, todo, pairs, view, worker_rngs, optimizer, store):
        if len(worker_rngs) == 1:
            return self._worker_steps(todo, pairs, view, worker_rngs[0],
                                      optimizer, store)
        from concurrent.futures import ThreadPoolExecutor
        base, extra = divmod(todo, len(worker_rngs))
        shares = [base + (1 if i < extra else 0)
                  for i in range(len(worker_rngs))]
        with ThreadPoolExecutor(len(worker_rngs)) as pool:
            losses = list(pool.map(
                lambda wr: self._worker_steps(wr[1], pairs, view, wr[0],
                                              optimizer, store),
                zip(worker_rngs, shares)))
        return float(np.mean(losses))

    def _worker_steps(self, n_steps, pairs, view, rng, optimizer, store):
        total = 0.0
        batch_size = min(self.batch_size, len(pairs))
        for _ in range(n_steps):
            pick = rng.integers(0, len(pairs), size=batch_size)
            u, v = pairs[pick, 0], pairs[pick, 1]
            negs_h = rng.integers(0, store.n_entities,
                                  size=(batch_size, self.n_negatives))
            negs_t = rng.integers(0, store.n_entities,
                                  size=(batch_size, self.n_negatives))
            total += self._train_batch(u, v, negs_h, negs_t, view, rng,
                                       optimizer)
        return total / max(n_steps, 1)

    def _train_batch(self, u, v, negs_h, negs_t, view, rng, optimizer):
        nodes = np.unique(np.concatenate([u, v, negs_h.ravel(),
                                          negs_t.ravel()]))
        pos_of = {int(n): i for i, n in enumerate(nodes)}
        blocks = build_blocks(nodes, self.encoder_.n_layers, view,
                              self.fanout, rng)
        h, caches = self.encoder_.forward(blocks, self._input_rows(),
                                          dropout=self.dropout, rng=rng)
        if not np.isfinite(h).all():
            raise NumericError("non-finite encoder state")
        look = np.vectorize(pos_of.__getitem__, otypes=[np.int64])
        u_pos, v_pos = look(u), look(v)
        head_cand = np.concatenate([u_pos[:, None], look(negs_h)], axis=1)
        tail_cand = np.concatenate([v_pos[:, None], look(negs_t)], axis=1)

        dh = np.zeros_like(h)
        total_loss = 0.0
        for cand_pos, anchor_pos in ((head_cand, v_pos), (tail_cand, u_pos)):
            scores = np.sum(h[cand_pos] * h[anchor_pos][:, None, :], axis=2)
            loss, d = softmax_cross_entropy(scores, 0)
            total_loss += float(loss.mean())
            np.add.at(dh, cand_pos, d[:, :, None] * h[anchor_pos][:, None, :])
            np.add.at(dh, anchor_pos,
                      np.sum(d[:, :, None] * h[cand_pos], axis=1))

        grads, (input_nodes, d_inputs) = self.encoder_.backward(caches, dh)
        sparse = {name: (None, g) for name, g in grads.items()}
        if self.input_kind_ == "table" and len(input_nodes):
            sparse["inputs"] = (input_nodes, d_inputs)
        optimizer.apply(sparse)
        return total_loss

    # -- inference --------------------------------------------------------

    def embed_nodes(self, node_ids, view, allowed=None) -> np.ndarray:
        """Deterministic states: full neighborhoods, no dropout."""
        blocks = build_blocks(np.asarray(node_ids, dtype=np.int64),
                              self.encoder_.n_layers, view, None, None,
                              allowed=allowed)
        h, _ = self.encoder_.forward(blocks, self._input_rows())
        return h

    def _eval_states(self, split):
        if getattr(self, "_h_cache", None) is not None:
            return self._h_cache
        store = split.store
        view = GraphView(store, split.evaluation_graph_idx())
        allowed = None
        if split.mode == INDUCTIVE:
            allowed = ~split.unseen_entities
        h = self.embed_nodes(np.arange(store.n_entities), view, allowed)
        self._h_cache = h
        return h

    def pair_scorer(self, split):
        """Callable (s, r, o_array, t) -> decoder scores for the ranker."""
        h = self._eval_states(split)

        def score(s, r, o_array, t_days=None):
            return decode_dot(h[np.asarray(o_array)], h[int(s)])
        return score

    def _validation_mrr(self, split, val_rng):
        from ..evaluation.ranking import evaluate_queries
        from ..evaluation.strategies import build_queries
        if self.val_queries <= 0 or len(split.eval_target_idx) == 0:
            return None
        queries = build_queries(split, strategy="random",
                                n_negatives=self.val_negatives, rng=val_rng,
                                max_queries=self.val_queries)
        report = evaluate_queries(self.pair_scorer(split), queries,
                                  strategy="random",
                                  n_negatives=self.val_negatives)
        return report.mrr

    # -- persistence --------------------------------------------------------

    def to_checkpoint(self) -> Checkpoint:
        meta = {
            "encoder": self.encoder_kind,
            "variant": self._resolved_variant(),
            "config": dict(self.get_params()),
            "n_entities": int(self.n_entities_),
            "step": int(getattr(self, "step_", 0)),
            "split_mode": self.split_mode_,
            "rng_state": getattr(self, "_rng_state", None),
            "frozen_hash": getattr(self, "frozen_hash_", None),
        }
        tables = dict(self.params_)
        if self.input_kind_ == "features":
            tables["features"] = self.feature_inputs_
        return Checkpoint(kind="encoder", meta=meta, tables=tables)

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint, pretrained=None):
        kinds = {"graphsage": GraphSAGELinkPredictor,
                 "rgcn": RGCNLinkPredictor}
        try:
            klass = kinds[ckpt.meta["encoder"]]
        except KeyError:
            raise ConfigError(
                f"unknown encoder kind {ckpt.meta.get('encoder')!r}") from None
        config = ckpt.meta["config"]
        model = klass(**{k: v for k, v in config.items()
                         if k in klass().get_params()})
        model.n_entities_ = ckpt.meta["n_entities"]
        model.split_mode_ = ckpt.meta.get("split_mode", INDUCTIVE)
        model.step_ = ckpt.meta.get("step", 0)
        model.history_ = []
        variant = model._resolved_variant()
        model.params_ = {k: np.array(v) for k, v in ckpt.tables.items()
                         if k != "features"}
        if variant == "hybrid":
            if pretrained is None:
                raise ConfigError("hybrid checkpoint needs its pretrained "
                                  "embedding checkpoint")
            if pretrained.content_hash() != ckpt.meta.get("frozen_hash"):
                raise ContractError(
                    "pretrained checkpoint hash does not match the one this "
                    "encoder was trained with")
            model.frozen_inputs_ = np.ascontiguousarray(
                pretrained.tables["entities"])
            model.frozen_hash_ = ckpt.meta["frozen_hash"]
            model.input_kind_ = "frozen"
            d_in = model.frozen_inputs_.shape[1]
        elif variant == "degree":
            model.feature_inputs_ = np.array(ckpt.tables["features"])
            model.input_kind_ = "features"
            d_in = model.feature_inputs_.shape[1]
        else:
            model.input_kind_ = "table"
            d_in = model.params_["inputs"].shape[1]
        model.encoder_ = model._make_encoder(d_in, rng=0)
        model.encoder_.params = model.params_
        model._h_cache = None
        return model


class GraphSAGELinkPredictor(_EncoderLinkPredictor):
    """Sage-style encoder over all incident edges, relation-agnostic."""

    encoder_kind = "graphsage"


class RGCNLinkPredictor(_EncoderLinkPredictor):
    """Relation-grouped encoder with basis-composed weights."""

    encoder_kind = "rgcn"

    def __init__(self, variant="embedding", dim=200, n_layers=1, fanout=25,
                 aggregator="mean", normalization="layer", n_bases=8,
                 dropout=0.0, n_negatives=50, learning_rate=0.03,
                 batch_size=128, max_steps=None, time_budget_s=None,
                 optimizer="adagrad", val_period=0, val_queries=100,
                 val_negatives=100, n_jobs=1, random_state=0):
        super().__init__(variant=variant, dim=dim, n_layers=n_layers,
                         fanout=fanout, aggregator=aggregator,
                         normalization=normalization, n_bases=n_bases,
                         dropout=dropout, n_negatives=n_negatives,
                         learning_rate=learning_rate, batch_size=batch_size,
                         max_steps=max_steps, time_budget_s=time_budget_s,
                         optimizer=optimizer, val_period=val_period,
                         val_queries=val_queries,
                         val_negatives=val_negatives, n_jobs=n_jobs,
                         random_state=random_state)


def embed_unseen(node, aux_quad_idx, predictor, split):
    """State for one unseen node from its auxiliary links alone."""
    store = split.store
    view = GraphView(store, np.asarray(aux_quad_idx, dtype=np.int64))
    allowed = ~split.unseen_entities
    return predictor.embed_nodes(np.asarray([node]), view, allowed)[0]
