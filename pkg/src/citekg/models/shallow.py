"""Shallow embedding models behind a fit/score estimator API.

Four models share one training loop: a static complex bilinear model, a
static rotation model, and two time-conditioned models built on
diachronic entity vectors (translation- and product-decoded). Entity
and relation rows are initialized uniformly in (-mu, mu) with
mu = (2 + gamma) / dim; rotation relations are raw phase angles.

Fitted attributes follow sklearn conventions (`params_`, `step_`,
`history_`); `fit` consumes a TemporalSplit. Scoring/gradient internals
are exposed through `score_and_grad` (single quad, used by gradient
tests) and the `_forward_batch` / `_backward_batch` pair driven by the
training loop.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from ..errors import ConfigError, ContractError, NumericError
from ..utils import NO_DATE, as_rng
from .checkpoint import Checkpoint
from .scoring import (diachronic_backward, diachronic_embed, dropout_mask,
                      grad_complex, grad_rotate, grad_translation,
                      grad_trilinear, score_complex, score_rotate,
                      score_translation, score_trilinear)
from .tables import (as_complex, as_interleaved, init_phases, init_uniform,
                     split_static_dynamic)

HEAD, TAIL = 0, 1


class GradAccumulator:
    """Collects sparse per-row gradient contributions per table."""

    def __init__(self):
        self._parts: dict[str, list[tuple[np.ndarray, np.ndarray]]] = {}

    def add(self, table: str, ids: np.ndarray, grads: np.ndarray):
        ids = np.asarray(ids).ravel()
        grads = np.asarray(grads, dtype=np.float64).reshape(len(ids), -1)
        self._parts.setdefault(table, []).append((ids, grads))

    def finalize(self) -> dict[str, tuple[np.ndarray, np.ndarray]]:
        out = {}
        for table, parts in self._parts.items():
            ids = np.concatenate([p[0] for p in parts])
            grads = np.concatenate([p[1] for p in parts])
            uniq, inv = np.unique(ids, return_inverse=True)
            acc = np.zeros((len(uniq), grads.shape[1]))
            np.add.at(acc, inv, grads)
            out[table] = (uniq, acc)
        return out


class TimeScale:
    """Maps day-resolution dates onto [0, 1] over the corpus date range."""

    def __init__(self, t0: int, span: int):
        self.t0 = int(t0)
        self.span = max(int(span), 1)

    @classmethod
    def from_store(cls, store) -> "TimeScale":
        dates = store.pub_dates[store.pub_dates != NO_DATE]
        if dates.size == 0:
            return cls(0, 1)
        return cls(int(dates.min()), int(dates.max() - dates.min()))

    def encode(self, days) -> np.ndarray:
        return (np.asarray(days, dtype=np.float64) - self.t0) / self.span

    def as_dict(self) -> dict:
        return {"t0": self.t0, "span": self.span}


class ShallowModel(BaseEstimator):
    """Shared estimator plumbing; subclasses define the scorer."""

    kind: str = ""
    temporal = False
    #: "similarity" scorers are maximized as-is; "distance" scorers are
    #: negated norms whose margin loss acts on the positive norm.
    orientation = "similarity"

    def __init__(self, dim=200, learning_rate=0.3, n_negatives=512,
                 regularization=1e-6, alpha=0.25, gamma=0.0, psi=0.0,
                 dropout=0.0, loss="logsigmoid_adversarial", batch_size=1024,
                 max_steps=None, time_budget_s=None, optimizer="adagrad",
                 val_period=0, val_queries=100, val_negatives=100, n_jobs=1,
                 random_state=0):
        self.dim = dim
        self.learning_rate = learning_rate
        self.n_negatives = n_negatives
        self.regularization = regularization
        self.alpha = alpha
        self.gamma = gamma
        self.psi = psi
        self.dropout = dropout
        self.loss = loss
        self.batch_size = batch_size
        self.max_steps = max_steps
        self.time_budget_s = time_budget_s
        self.optimizer = optimizer
        self.val_period = val_period
        self.val_queries = val_queries
        self.val_negatives = val_negatives
        self.n_jobs = n_jobs
        self.random_state = random_state

    # -- parameter lifecycle ------------------------------------------

    def _init_params(self, n_entities, n_relations, rng) -> dict:
        raise NotImplementedError

    def initialize(self, store, rng=None) -> "ShallowModel":
        """Allocate fresh parameter tables bound to a store's counts."""
        rng = as_rng(self.random_state if rng is None else rng)
        self.n_entities_ = store.n_entities
        self.n_relations_ = 4
        self.time_scale_ = TimeScale.from_store(store)
        self.params_ = self._init_params(self.n_entities_, self.n_relations_,
                                         rng)
        self.step_ = 0
        self.history_ = []
        return self

    def fit(self, split, log_path=None, resume=None):
        """Train on a temporal split under the configured budget.

        ``resume`` accepts a Checkpoint from an earlier run of the same
        model/store; training continues from its step counter and RNG
        streams.
        """
        from ..training.loop import fit_shallow
        fit_shallow(self, split, log_path=log_path, resume=resume)
        return self

    # -- scoring -------------------------------------------------------

    def _encode_time(self, t_days):
        return self.time_scale_.encode(t_days)

    def score_quads(self, s_ids, r_ids, o_ids, t_days=None) -> np.ndarray:
        """Scores for aligned id arrays (broadcasting allowed)."""
        raise NotImplementedError

    def pair_scorer(self):
        """Callable (s, r, o_array, t_days) -> scores, for the ranker."""
        def score(s, r, o_array, t_days=None):
            o_array = np.asarray(o_array)
            return self.score_quads(np.full(o_array.shape, s), r, o_array,
                                    t_days)
        return score

    def score_and_grad(self, s, r, o, t_days=None):
        """Score of one quad plus gradients w.r.t. every touched row."""
        batch = {
            "s": np.asarray([s]), "r": np.asarray([r]), "o": np.asarray([o]),
            "t": np.asarray([0 if t_days is None else t_days]),
            "neg": np.zeros((1, 0), dtype=np.int64),
            "side": np.asarray([TAIL]),
        }
        pos, _, cache = self._forward_batch(batch, rng=None, training=False)
        acc = GradAccumulator()
        self._backward_batch(cache, np.ones(1), np.zeros((1, 0)), acc)
        return float(pos[0]), acc.finalize()

    # -- training internals ---------------------------------------------

    def _forward_batch(self, batch, rng, training):
        raise NotImplementedError

    def _backward_batch(self, cache, d_pos, d_neg, acc: GradAccumulator):
        raise NotImplementedError

    def _check_finite(self, scores, ids):
        bad = ~np.isfinite(scores)
        if bad.any():
            row = int(np.asarray(ids).ravel()[np.nonzero(bad.ravel())[0][0]])
            raise NumericError(f"non-finite score involving entity row {row}")

    # -- persistence ----------------------------------------------------

    def to_checkpoint(self, extra=None) -> Checkpoint:
        meta = {
            "model": self.kind, "dim": self.dim, "psi": self.psi,
            "gamma": self.gamma, "n_entities": self.n_entities_,
            "n_relations": self.n_relations_,
            "config": {k: v for k, v in self.get_params().items()},
            "step": int(self.step_),
            "time_scale": self.time_scale_.as_dict(),
            "rng_state": getattr(self, "_rng_state", None),
            "best_val_mrr": getattr(self, "best_val_mrr_", None),
        }
        if extra:
            meta.update(extra)
        tables = dict(self.params_)
        opt_state = getattr(self, "_opt_state", None)
        if opt_state:
            for name, arr in opt_state.items():
                tables[f"opt__{name}"] = arr
        return Checkpoint(kind="shallow", meta=meta, tables=tables)

    @staticmethod
    def from_checkpoint(ckpt: Checkpoint, store=None) -> "ShallowModel":
        kinds = {c.kind: c for c in (ComplEx, RotatE, DETransE, DEDistMult)}
        try:
            cls = kinds[ckpt.meta["model"]]
        except KeyError:
            raise ConfigError(f"unknown model kind {ckpt.meta.get('model')!r}") \
                from None
        config = dict(ckpt.meta["config"])
        model = cls(**{k: v for k, v in config.items()
                       if k in cls().get_params()})
        model.n_entities_ = ckpt.meta["n_entities"]
        model.n_relations_ = ckpt.meta["n_relations"]
        model.time_scale_ = TimeScale(**ckpt.meta["time_scale"])
        model.params_ = {k: np.array(v) for k, v in ckpt.tables.items()
                         if not k.startswith("opt__")}
        model.step_ = ckpt.meta["step"]
        model.history_ = []
        if store is not None and store.n_entities != model.n_entities_:
            raise ContractError(
                f"checkpoint has {model.n_entities_} entities but the bound "
                f"store has {store.n_entities}")
        return model


def _gather_negative_entities(params_row, neg):
    flat = neg.ravel()
    return params_row[flat].reshape(neg.shape + (params_row.shape[-1],))


class ComplEx(ShallowModel):
    """Complex bilinear scorer; entities/relations are complex rows."""

    kind = "complex"
    orientation = "similarity"

    def _init_params(self, n_entities, n_relations, rng):
        return {
            "entities": init_uniform((n_entities, 2 * self.dim), self.dim,
                                     self.gamma, rng),
            "relations": init_uniform((n_relations, 2 * self.dim), self.dim,
                                      self.gamma, rng),
        }

    def score_quads(self, s_ids, r_ids, o_ids, t_days=None):
        ent = as_complex(self.params_["entities"])
        rel = as_complex(self.params_["relations"])
        return score_complex(ent[s_ids], rel[r_ids], ent[o_ids])

    def _forward_batch(self, batch, rng, training):
        ent = as_complex(self.params_["entities"])
        rel = as_complex(self.params_["relations"])
        s, r, o, neg = batch["s"], batch["r"], batch["o"], batch["neg"]
        S, R, O = ent[s], rel[r], ent[o]
        pos = score_complex(S, R, O)
        N = _gather_negative_entities(ent, neg)
        head = batch["side"] == HEAD
        neg_scores = np.where(
            head[:, None],
            score_complex(N, R[:, None, :], O[:, None, :]),
            score_complex(S[:, None, :], R[:, None, :], N))
        self._check_finite(pos, s)
        self._check_finite(neg_scores, neg)
        cache = {"batch": batch, "S": S, "R": R, "O": O, "N": N, "head": head}
        return pos, neg_scores, cache

    def _backward_batch(self, cache, d_pos, d_neg, acc):
        b = cache["batch"]
        S, R, O, N, head = (cache[k] for k in ("S", "R", "O", "N", "head"))
        g_s, g_r, g_o = grad_complex(S, R, O)
        acc.add("entities", b["s"], as_interleaved(d_pos[:, None] * g_s))
        acc.add("relations", b["r"], as_interleaved(d_pos[:, None] * g_r))
        acc.add("entities", b["o"], as_interleaved(d_pos[:, None] * g_o))
        if b["neg"].shape[1]:
            hm = head[:, None, None]
            gn_s, gn_r, gn_o = grad_complex(
                np.where(hm, N, S[:, None, :]), R[:, None, :],
                np.where(hm, O[:, None, :], N))
            d = d_neg[:, :, None]
            # Replaced-side gradient goes to the negative rows; the kept
            # side and the relation accumulate over all negatives.
            g_neg = np.where(hm, gn_s, gn_o) * d
            acc.add("entities", b["neg"], as_interleaved(g_neg))
            g_keep = np.where(hm, gn_o * d, gn_s * d).sum(axis=1)
            keep_ids = np.where(head, b["o"], b["s"])
            acc.add("entities", keep_ids, as_interleaved(g_keep))
            acc.add("relations", b["r"], as_interleaved((gn_r * d).sum(axis=1)))


class RotatE(ShallowModel):
    """Rotation scorer; relations stored as phase angles."""

    kind = "rotate"
    orientation = "distance"

    def __init__(self, dim=50, learning_rate=0.1, n_negatives=64,
                 regularization=1e-6, alpha=1.0, gamma=6.0, psi=0.0,
                 dropout=0.0, loss="logsigmoid_adversarial", batch_size=1024,
                 max_steps=None, time_budget_s=None, optimizer="adagrad",
                 val_period=0, val_queries=100, val_negatives=100, n_jobs=1,
                 random_state=0):
        super().__init__(dim=dim, learning_rate=learning_rate,
                         n_negatives=n_negatives,
                         regularization=regularization, alpha=alpha,
                         gamma=gamma, psi=psi, dropout=dropout, loss=loss,
                         batch_size=batch_size, max_steps=max_steps,
                         time_budget_s=time_budget_s, optimizer=optimizer,
                         val_period=val_period, val_queries=val_queries,
                         val_negatives=val_negatives, n_jobs=n_jobs,
                         random_state=random_state)

    def _init_params(self, n_entities, n_relations, rng):
        return {
            "entities": init_uniform((n_entities, 2 * self.dim), self.dim,
                                     self.gamma, rng),
            "relations": init_phases((n_relations, self.dim), rng),
        }

    def score_quads(self, s_ids, r_ids, o_ids, t_days=None):
        ent = as_complex(self.params_["entities"])
        theta = self.params_["relations"]
        return score_rotate(ent[s_ids], theta[r_ids], ent[o_ids])

    def _forward_batch(self, batch, rng, training):
        ent = as_complex(self.params_["entities"])
        theta = self.params_["relations"]
        s, r, o, neg = batch["s"], batch["r"], batch["o"], batch["neg"]
        S, T, O = ent[s], theta[r], ent[o]
        pos = score_rotate(S, T, O)
        N = _gather_negative_entities(ent, neg)
        head = batch["side"] == HEAD
        neg_scores = np.where(
            head[:, None],
            score_rotate(N, T[:, None, :], O[:, None, :]),
            score_rotate(S[:, None, :], T[:, None, :], N))
        self._check_finite(pos, s)
        self._check_finite(neg_scores, neg)
        cache = {"batch": batch, "S": S, "T": T, "O": O, "N": N, "head": head}
        return pos, neg_scores, cache

    def _backward_batch(self, cache, d_pos, d_neg, acc):
        b = cache["batch"]
        S, T, O, N, head = (cache[k] for k in ("S", "T", "O", "N", "head"))
        g_s, g_t, g_o = grad_rotate(S, T, O)
        acc.add("entities", b["s"], as_interleaved(d_pos[:, None] * g_s))
        acc.add("relations", b["r"], d_pos[:, None] * g_t)
        acc.add("entities", b["o"], as_interleaved(d_pos[:, None] * g_o))
        if b["neg"].shape[1]:
            hm = head[:, None, None]
            gn_s, gn_t, gn_o = grad_rotate(
                np.where(hm, N, S[:, None, :]), T[:, None, :],
                np.where(hm, O[:, None, :], N))
            d = d_neg[:, :, None]
            acc.add("entities", b["neg"],
                    as_interleaved(np.where(hm, gn_s, gn_o) * d))
            g_keep = np.where(hm, gn_o * d, gn_s * d).sum(axis=1)
            acc.add("entities", np.where(head, b["o"], b["s"]),
                    as_interleaved(g_keep))
            acc.add("relations", b["r"], (gn_t * d).sum(axis=1))


class _Diachronic(ShallowModel):
    """Shared plumbing for the time-conditioned models."""

    temporal = True

    def _init_params(self, n_entities, n_relations, rng):
        d_static, d_dyn = split_static_dynamic(self.dim, self.psi)
        self._d_static = d_static
        return {
            "static": init_uniform((n_entities, d_static), self.dim,
                                   self.gamma, rng),
            "amplitude": init_uniform((n_entities, d_dyn), self.dim,
                                      self.gamma, rng),
            "frequency": init_uniform((n_entities, d_dyn), self.dim,
                                      self.gamma, rng),
            "phase": init_uniform((n_entities, d_dyn), self.dim,
                                  self.gamma, rng),
            "relations": init_uniform((n_relations, self.dim), self.dim,
                                      self.gamma, rng),
        }

    @property
    def d_static(self) -> int:
        return split_static_dynamic(self.dim, self.psi)[0]

    def embed_entities(self, ids, t_code) -> np.ndarray:
        """Time-conditioned vectors for entity ids at encoded times."""
        p = self.params_
        return diachronic_embed(p["static"][ids], p["amplitude"][ids],
                                p["frequency"][ids], p["phase"][ids], t_code)

    def _entity_grads(self, acc, ids, g, t_code):
        p = self.params_
        gs, ga, gf, gp = diachronic_backward(
            g, p["amplitude"][ids], p["frequency"][ids], p["phase"][ids],
            t_code, self.d_static)
        acc.add("static", ids, gs)
        acc.add("amplitude", ids, ga)
        acc.add("frequency", ids, gf)
        acc.add("phase", ids, gp)

    def _forward_batch(self, batch, rng, training):
        s, r, o, neg = batch["s"], batch["r"], batch["o"], batch["neg"]
        t_code = self._encode_time(batch["t"])
        R = self.params_["relations"][r]
        DS = self.embed_entities(s, t_code)
        DO = self.embed_entities(o, t_code)
        DN = self.embed_entities(neg, t_code[:, None]) if neg.shape[1] else \
            np.zeros(neg.shape + (self.dim,))
        mask = dropout_mask((len(s), self.dim), self.dropout, rng) \
            if training and self.dropout > 0 else None
        head = batch["side"] == HEAD
        pos, neg_scores, cache = self._decode(DS, R, DO, DN, head, mask)
        self._check_finite(pos, s)
        if neg.shape[1]:
            self._check_finite(neg_scores, neg)
        cache.update({"batch": batch, "t_code": t_code, "head": head,
                      "DS": DS, "R": R, "DO": DO, "DN": DN, "mask": mask})
        return pos, neg_scores, cache

    def _backward_batch(self, cache, d_pos, d_neg, acc):
        b = cache["batch"]
        g_s, g_r, g_o, g_n = self._decode_backward(cache, d_pos, d_neg)
        t_code = cache["t_code"]
        self._entity_grads(acc, b["s"], g_s, t_code)
        acc.add("relations", b["r"], g_r)
        self._entity_grads(acc, b["o"], g_o, t_code)
        if b["neg"].shape[1]:
            self._entity_grads(acc, b["neg"], g_n, t_code[:, None])


class DETransE(_Diachronic):
    """Translation decoder over diachronic vectors."""

    kind = "de_transe"
    orientation = "distance"

    def __init__(self, dim=100, learning_rate=0.1, n_negatives=512,
                 regularization=0.0, alpha=0.25, gamma=6.0, psi=0.08,
                 dropout=0.0, loss="logsigmoid_adversarial", batch_size=1024,
                 max_steps=None, time_budget_s=None, optimizer="adagrad",
                 val_period=0, val_queries=100, val_negatives=100, n_jobs=1,
                 random_state=0):
        super().__init__(dim=dim, learning_rate=learning_rate,
                         n_negatives=n_negatives,
                         regularization=regularization, alpha=alpha,
                         gamma=gamma, psi=psi, dropout=dropout, loss=loss,
                         batch_size=batch_size, max_steps=max_steps,
                         time_budget_s=time_budget_s, optimizer=optimizer,
                         val_period=val_period, val_queries=val_queries,
                         val_negatives=val_negatives, n_jobs=n_jobs,
                         random_state=random_state)

    def score_quads(self, s_ids, r_ids, o_ids, t_days=None):
        t_code = self._encode_time(0 if t_days is None else t_days)
        diff = (self.embed_entities(np.asarray(s_ids), t_code)
                + self.params_["relations"][r_ids]
                - self.embed_entities(np.asarray(o_ids), t_code))
        return score_translation(diff)

    def _decode(self, DS, R, DO, DN, head, mask):
        diff = DS + R - DO
        pos = score_translation(diff, mask)
        mask_n = None if mask is None else mask[:, None, :]
        diff_n = np.where(head[:, None, None], DN + R[:, None] - DO[:, None],
                          DS[:, None] + R[:, None] - DN)
        neg = score_translation(diff_n, mask_n)
        return pos, neg, {"diff": diff, "diff_n": diff_n}

    def _decode_backward(self, cache, d_pos, d_neg):
        head, mask = cache["head"], cache["mask"]
        g_diff = grad_translation(cache["diff"], mask) * d_pos[:, None]
        mask_n = None if mask is None else mask[:, None, :]
        g_diff_n = grad_translation(cache["diff_n"], mask_n) \
            * d_neg[:, :, None]
        hm = head[:, None, None]
        g_s = g_diff + np.where(hm, 0.0, g_diff_n).sum(axis=1)
        g_o = -g_diff - np.where(hm, g_diff_n, 0.0).sum(axis=1)
        g_r = g_diff + g_diff_n.sum(axis=1)
        g_n = np.where(hm, g_diff_n, -g_diff_n)
        return g_s, g_r, g_o, g_n


class DEDistMult(_Diachronic):
    """Trilinear decoder over diachronic vectors."""

    kind = "de_distmult"
    orientation = "similarity"

    def __init__(self, dim=100, learning_rate=0.1, n_negatives=512,
                 regularization=1e-6, alpha=0.0, gamma=0.0, psi=0.08,
                 dropout=0.1, loss="cross_entropy", batch_size=1024,
                 max_steps=None, time_budget_s=None, optimizer="adagrad",
                 val_period=0, val_queries=100, val_negatives=100, n_jobs=1,
                 random_state=0):
        super().__init__(dim=dim, learning_rate=learning_rate,
                         n_negatives=n_negatives,
                         regularization=regularization, alpha=alpha,
                         gamma=gamma, psi=psi, dropout=dropout, loss=loss,
                         batch_size=batch_size, max_steps=max_steps,
                         time_budget_s=time_budget_s, optimizer=optimizer,
                         val_period=val_period, val_queries=val_queries,
                         val_negatives=val_negatives, n_jobs=n_jobs,
                         random_state=random_state)

    def score_quads(self, s_ids, r_ids, o_ids, t_days=None):
        t_code = self._encode_time(0 if t_days is None else t_days)
        return score_trilinear(self.embed_entities(np.asarray(s_ids), t_code),
                               self.params_["relations"][r_ids],
                               self.embed_entities(np.asarray(o_ids), t_code))

    def _decode(self, DS, R, DO, DN, head, mask):
        pos = score_trilinear(DS, R, DO, mask)
        mask_n = None if mask is None else mask[:, None, :]
        hm = head[:, None, None]
        A = np.where(hm, DN, DS[:, None])
        B = np.where(hm, DO[:, None], DN)
        neg = score_trilinear(A, R[:, None], B, mask_n)
        return pos, neg, {"A": A, "B": B}

    def _decode_backward(self, cache, d_pos, d_neg):
        DS, R, DO, head, mask = (cache[k] for k in
                                 ("DS", "R", "DO", "head", "mask"))
        ga, gr, gb = grad_trilinear(DS, R, DO, mask)
        g_s = ga * d_pos[:, None]
        g_r = gr * d_pos[:, None]
        g_o = gb * d_pos[:, None]
        mask_n = None if mask is None else mask[:, None, :]
        gna, gnr, gnb = grad_trilinear(cache["A"], R[:, None], cache["B"],
                                       mask_n)
        d = d_neg[:, :, None]
        hm = head[:, None, None]
        g_s = g_s + np.where(hm, 0.0, gna * d).sum(axis=1)
        g_o = g_o + np.where(hm, gnb * d, 0.0).sum(axis=1)
        g_r = g_r + (gnr * d).sum(axis=1)
        g_n = np.where(hm, gna, gnb) * d
        return g_s, g_r, g_o, g_n


MODEL_KINDS = {c.kind: c for c in (ComplEx, RotatE, DETransE, DEDistMult)}
