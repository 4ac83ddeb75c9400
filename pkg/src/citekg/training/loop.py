"""Mini-batch training loop for the shallow models.

Steps run in rounds; each round dispatches batches to workers, then the
main thread checks budgets, runs held-out validation, logs a progress
record, and snapshots the best-validation parameters. Workers apply
sparse updates to the shared tables without locks (tolerated races);
with a single worker the whole run is bit-reproducible from the seed.

Each batch corrupts the tail for even in-batch positions and the head
for odd positions. The margin loss consumes distance-style inputs, so
scores are negated on the way in (similarity scorers use margin 0);
cross-entropy mode scores both corruption directions per positive.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..errors import ConfigError, ContractError, NumericError
from ..utils import as_rng
from .losses import (logsigmoid_loss, self_adversarial_weights,
                     softmax_cross_entropy)
from .negatives import HEAD, TAIL, corruption_sides, sample_negatives_batch
from .optimizers import RowAdagrad, make_optimizer

LOSS_ADVERSARIAL = "logsigmoid_adversarial"
LOSS_CROSS_ENTROPY = "cross_entropy"


def _resolve_budget(max_steps, time_budget_s):
    if max_steps is None and time_budget_s is None:
        raise ConfigError("set max_steps and/or time_budget_s")
    if time_budget_s is not None and time_budget_s < 0:
        raise ConfigError("time budget must be >= 0")
    if max_steps is not None and max_steps < 0:
        raise ConfigError("max_steps must be >= 0")
    return (np.inf if max_steps is None else int(max_steps),
            np.inf if time_budget_s is None else float(time_budget_s))


def _step_adversarial(model, batch, rng, optimizer):
    pos, neg, cache = model._forward_batch(batch, rng, training=True)
    weights = self_adversarial_weights(neg, model.alpha)
    gamma = model.gamma if model.orientation == "distance" else 0.0
    loss, d_pos_d, d_neg_d = logsigmoid_loss(-pos, -neg, weights, gamma)
    d_pos, d_neg = -d_pos_d, -d_neg_d  # distance input is the negated score
    _apply(model, cache, d_pos, d_neg, optimizer)
    return float(np.mean(loss))


def _step_cross_entropy(model, batch, rng, optimizer, n_entities):
    total = 0.0
    for side in (HEAD, TAIL):
        b = dict(batch)
        b["side"] = np.full(len(batch["s"]), side, dtype=np.int64)
        b["neg"] = sample_negatives_batch(len(batch["s"]),
                                          batch["neg"].shape[1], rng,
                                          n_entities)
        pos, neg, cache = model._forward_batch(b, rng, training=True)
        scores = np.concatenate([pos[:, None], neg], axis=1)
        loss, d = softmax_cross_entropy(scores, 0)
        _apply(model, cache, d[:, 0], d[:, 1:], optimizer)
        total += float(np.mean(loss))
    return total


def _apply(model, cache, d_pos, d_neg, optimizer):
    from ..models.shallow import GradAccumulator
    acc = GradAccumulator()
    model._backward_batch(cache, d_pos, d_neg, acc)
    grads = acc.finalize()
    lam = model.regularization
    if lam > 0:
        for name, (rows, g) in grads.items():
            g += 2.0 * lam * model.params_[name][rows]
    optimizer.apply(grads)


class _Worker:
    """One training stream: owns an RNG and a slice of the step budget."""

    def __init__(self, model, store, train_quads, rng):
        self.model = model
        self.store = store
        self.quads = train_quads  # (n, 4) int64 columns s, r, o, t
        self.rng = rng

    def run(self, n_steps, optimizer) -> float:
        model = self.model
        batch_size = min(model.batch_size, len(self.quads))
        losses = 0.0
        for _ in range(n_steps):
            pick = self.rng.integers(0, len(self.quads), size=batch_size)
            rows = self.quads[pick]
            batch = {
                "s": rows[:, 0], "r": rows[:, 1], "o": rows[:, 2],
                "t": rows[:, 3],
                "neg": sample_negatives_batch(batch_size, model.n_negatives,
                                              self.rng,
                                              self.store.n_entities),
                "side": corruption_sides(batch_size),
            }
            if model.loss == LOSS_CROSS_ENTROPY:
                losses += _step_cross_entropy(model, batch, self.rng,
                                              optimizer,
                                              self.store.n_entities)
            else:
                losses += _step_adversarial(model, batch, self.rng, optimizer)
        return losses / max(n_steps, 1)


def _validation_mrr(model, split, val_rng, n_queries, n_negatives):
    from ..evaluation.ranking import evaluate_queries
    from ..evaluation.strategies import build_queries
    if n_queries <= 0 or len(split.eval_target_idx) == 0:
        return None
    queries = build_queries(split, strategy="random", n_negatives=n_negatives,
                            rng=val_rng, max_queries=n_queries)
    report = evaluate_queries(model.pair_scorer(), queries,
                              strategy="random", n_negatives=n_negatives)
    return report.mrr


def fit_shallow(model, split, log_path=None, resume=None):
    """Train ``model`` in place; returns the fitted model.

    The budget comes from the model's ``max_steps`` (a total step
    target) and/or ``time_budget_s``. The returned parameters are the
    best-validation snapshot (or the final ones when no validation
    ran); ``step_``, ``history_``, ``best_val_mrr_`` and ``diverged_``
    are set on the model.

    ``resume`` takes a Checkpoint written by an earlier run; training
    continues from its step counter, RNG streams, and optimizer state.
    Continuation is deterministic in single-worker mode: resuming the
    same checkpoint twice gives bit-identical results. (Checkpoints
    store float32 tables, so a resumed run is not bit-equal to an
    uninterrupted float64 one.)
    """
    store = split.store
    if model.temporal and store.n_quads == 0:
        raise ConfigError("temporal model needs timestamped quads")
    max_steps, budget_s = _resolve_budget(model.max_steps,
                                          model.time_budget_s)
    root = as_rng(model.random_state)
    init_rng, val_rng = root.spawn(2)
    worker_rngs = root.spawn(max(model.n_jobs, 1))

    if resume is None:
        model.initialize(store, rng=init_rng)
        step = 0
    else:
        _restore(model, store, resume, worker_rngs, val_rng)
        step = model.step_
    idx = split.training_idx()
    if len(idx) == 0:
        raise ConfigError("no training quads for this split/mode")
    quads = np.stack([store.s[idx], store.r[idx], store.o[idx],
                      store.t[idx]], axis=1)
    optimizer = make_optimizer(model.optimizer, model.params_,
                               model.learning_rate)
    if resume is not None and isinstance(optimizer, RowAdagrad):
        for name in optimizer.state:
            key = f"opt__{name}"
            if key in resume.tables:
                optimizer.state[name] = np.array(resume.tables[key])
    workers = [_Worker(model, store, quads, rng) for rng in worker_rngs]

    round_steps = model.val_period if model.val_period else 100
    start = time.monotonic()
    history = []
    best = {k: v.copy() for k, v in model.params_.items()}
    best_mrr = _validation_mrr(model, split, val_rng, model.val_queries,
                               model.val_negatives)
    diverged = False
    mean_loss = None
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        while step < max_steps and time.monotonic() - start < budget_s:
            todo = int(min(round_steps, max_steps - step))
            per_worker = _split_steps(todo, len(workers))
            try:
                if len(workers) == 1:
                    losses = [workers[0].run(per_worker[0], optimizer)]
                else:
                    with ThreadPoolExecutor(len(workers)) as pool:
                        losses = list(pool.map(
                            lambda wn: wn[0].run(wn[1], optimizer),
                            zip(workers, per_worker)))
                mean_loss = float(np.mean(losses))
                if not np.isfinite(mean_loss):
                    raise NumericError("non-finite training loss")
            except NumericError:
                diverged = True
                model.params_ = {k: v.copy() for k, v in best.items()}
                break
            step += todo
            val = _validation_mrr(model, split, val_rng, model.val_queries,
                                  model.val_negatives)
            record = {"step": step, "loss": mean_loss, "val_mrr": val,
                      "elapsed_s": time.monotonic() - start}
            history.append(record)
            if log_fh:
                log_fh.write(json.dumps(record) + "\n")
            if val is not None and (best_mrr is None or val >= best_mrr):
                best_mrr = val
                best = {k: v.copy() for k, v in model.params_.items()}
    finally:
        if log_fh:
            log_fh.close()

    if best_mrr is not None and not diverged:
        model.params_ = best
    model.step_ = step
    model.history_ = history
    model.best_val_mrr_ = best_mrr
    model.diverged_ = diverged
    model._rng_state = {
        "workers": [r.bit_generator.state for r in worker_rngs],
        "val": val_rng.bit_generator.state,
    }
    model._opt_state = getattr(optimizer, "state", None)
    return model


def _restore(model, store, ckpt, worker_rngs, val_rng):
    if ckpt.meta.get("model") != model.kind:
        raise ContractError(f"checkpoint holds a {ckpt.meta.get('model')!r} "
                            f"model, not {model.kind!r}")
    if ckpt.meta["n_entities"] != store.n_entities:
        raise ContractError("checkpoint entity count does not match store")
    from ..models.shallow import TimeScale
    model.n_entities_ = ckpt.meta["n_entities"]
    model.n_relations_ = ckpt.meta["n_relations"]
    model.time_scale_ = TimeScale(**ckpt.meta["time_scale"])
    model.params_ = {k: np.array(v) for k, v in ckpt.tables.items()
                     if not k.startswith("opt__")}
    model.step_ = ckpt.meta["step"]
    model.history_ = []
    state = ckpt.meta.get("rng_state") or {}
    saved = state.get("workers", [])
    if len(saved) != len(worker_rngs):
        raise ContractError(f"checkpoint was written with {len(saved)} "
                            f"workers, cannot resume with {len(worker_rngs)}")
    for rng, st in zip(worker_rngs, saved):
        rng.bit_generator.state = st
    if state.get("val"):
        val_rng.bit_generator.state = state["val"]


def _split_steps(total: int, n: int) -> list[int]:
    base, extra = divmod(total, n)
    return [base + (1 if i < extra else 0) for i in range(n)]
