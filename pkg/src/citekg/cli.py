"""Command-line entry point.

One binary, subcommand style: ingest, sample, split, qc, ablate, train,
eval, sweep, report, communities. Every run writes a manifest echoing
the fully-resolved config and content hashes of its inputs. Paths may
be relative to ``$CITEKG_DATA_DIR`` when set. ``--seed`` is accepted by
every stochastic command; ``--workers 1`` (the default) activates all
determinism guarantees.

Exit codes: 1 internal, 2 usage/input, 3 numeric divergence, 4 contract
violation.
"""

from __future__ import annotations

import datetime
import functools
import json
import os
import sys

import click
import numpy as np

from . import __version__
from .errors import CiteKGError, ConfigError
from .evaluation.anomalies import citation_report
from .evaluation.ranking import evaluate_queries, query_records
from .evaluation.strategies import STRATEGIES, build_queries
from .evaluation.sweep import negative_count_sweep
from .graph.io import export_tsv, ingest_quads, load_store, save_store
from .graph.quality import quality_report
from .graph.sampling import (ablation_variant, drop_isolated_works,
                             drop_undated_works, snowball_sample)
from .graph.split import merge_validation_into_train, temporal_split
from .graph.store import AUTHOR, INSTITUTION, VENUE, WORK
from .community.concepts import concept_quality
from .community.leiden import ConstrainedLeiden
from .community.partition import Partition
from .inductive.models import (GraphSAGELinkPredictor, RGCNLinkPredictor,
                               VARIANT_ALIASES)
from .manifest import write_manifest
from .models.checkpoint import Checkpoint
from .models.shallow import MODEL_KINDS, ShallowModel
from .training.config import config_to_params, load_kv_config
from .utils import parse_date, sha256_file


def _data_path(path):
    if path is None:
        return None
    base = os.environ.get("CITEKG_DATA_DIR")
    if base and not os.path.isabs(path):
        candidate = os.path.join(base, path)
        if os.path.exists(candidate) or not os.path.exists(path):
            return candidate
    return path


def _utcnow():
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def handles_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except CiteKGError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(exc.exit_code)
    return wrapper


@click.group()
@click.version_option(version=__version__)
def main():
    """Temporal citation-graph embedding and link prediction."""


# -- data commands -----------------------------------------------------

@main.command()
@click.option("-i", "--input", "input_path", required=True)
@click.option("--format", "fmt", type=click.Choice(["tsv", "jsonl"]),
              default="tsv", show_default=True)
@click.option("--sidecar", default=None, help="entity-class sidecar TSV")
@click.option("--mapping", default=None, help="JSON file of field paths")
@click.option("--on-unknown", type=click.Choice(["error", "skip"]),
              default="error", show_default=True)
@click.option("--drop-isolated/--keep-isolated", default=False,
              help="drop works without citation links after ingest")
@click.option("--drop-undated/--keep-undated", default=False,
              help="drop works without a publication date after ingest")
@click.option("-o", "--output", required=True, help="binary store path")
@handles_errors
def ingest(input_path, fmt, sidecar, mapping, on_unknown, drop_isolated,
           drop_undated, output):
    """Parse an edge file into a binary graph store."""
    started = _utcnow()
    input_path = _require(_data_path(input_path))
    sidecar = _require(_data_path(sidecar)) if sidecar else None
    mapping_cfg = None
    if mapping:
        with open(_require(_data_path(mapping)), encoding="utf-8") as fh:
            mapping_cfg = json.load(fh)
    store, warnings = ingest_quads(input_path, format=fmt,
                                   mapping=mapping_cfg, sidecar=sidecar,
                                   on_unknown=on_unknown)
    if drop_isolated:
        store = drop_isolated_works(store)
    if drop_undated:
        store = drop_undated_works(store)
    save_store(store, output)
    write_manifest(output + ".manifest.json", "ingest",
                   {"format": fmt, "on_unknown": on_unknown,
                    "drop_isolated": drop_isolated,
                    "drop_undated": drop_undated,
                    "mapping": mapping_cfg},
                   {"input": input_path, "sidecar": sidecar},
                   outputs=[output], warnings=warnings, started=started)
    click.echo(f"{store.n_entities} entities, {store.n_quads} quads "
               f"-> {output}")


@main.command()
@click.option("-i", "--input", "input_path", required=True)
@click.option("--target-works", type=int, required=True)
@click.option("--seeds", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--drop-isolated/--keep-isolated", default=True,
              help="prune citation-isolated works first")
@click.option("-o", "--output", required=True)
@handles_errors
def sample(input_path, target_works, seeds, seed, drop_isolated, output):
    """Snowball-sample a store down to a target number of works."""
    started = _utcnow()
    store = load_store(_require(_data_path(input_path)))
    if drop_isolated:
        store = drop_isolated_works(store)
    sampled, warnings = snowball_sample(store, target_works, seeds, seed)
    save_store(sampled, output)
    write_manifest(output + ".manifest.json", "sample",
                   {"target_works": target_works, "seeds": seeds,
                    "seed": seed, "drop_isolated": drop_isolated},
                   {"input": _data_path(input_path)}, outputs=[output],
                   warnings={w: 1 for w in warnings}, started=started)
    click.echo(f"sampled {len(sampled.work_ids)} works, "
               f"{sampled.n_quads} quads -> {output}")


@main.command()
@click.option("-i", "--input", "input_path", required=True)
@click.option("--valid", "t_valid", required=True, help="ISO date")
@click.option("--test", "t_test", required=True, help="ISO date")
@click.option("--mode", type=click.Choice(["transductive", "inductive"]),
              default="transductive", show_default=True)
@click.option("--phase", type=click.Choice(["validation", "test"]),
              default="validation", show_default=True)
@click.option("-o", "--output", required=True, help="split descriptor JSON")
@handles_errors
def split(input_path, t_valid, t_test, mode, phase, output):
    """Classify quads into train / eval-target / exo periods."""
    started = _utcnow()
    store_path = _require(_data_path(input_path))
    store = load_store(store_path)
    sp = _build_split(store, t_valid, t_test, mode, phase)
    descriptor = {"store": os.path.abspath(store_path),
                  "store_hash": sha256_file(store_path),
                  "t_valid": t_valid, "t_test": t_test, "mode": mode,
                  "phase": phase, "counts": sp.describe()}
    with open(output, "w", encoding="utf-8") as fh:
        json.dump(descriptor, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_manifest(output + ".manifest.json", "split", descriptor,
                   {"input": store_path}, outputs=[output], started=started)
    click.echo(json.dumps(sp.describe()))


def _build_split(store, t_valid, t_test, mode, phase):
    sp = temporal_split(store, parse_date(t_valid), parse_date(t_test),
                        mode=mode)
    if phase == "test":
        sp = merge_validation_into_train(sp)
    return sp


def _load_split(path, store=None):
    path = _require(_data_path(path))
    with open(path, encoding="utf-8") as fh:
        desc = json.load(fh)
    if store is None:
        store_path = desc["store"]
        if sha256_file(store_path) != desc["store_hash"]:
            raise ConfigError(f"store file {store_path} changed since the "
                              f"split was written")
        store = load_store(store_path)
    return _build_split(store, desc["t_valid"], desc["t_test"], desc["mode"],
                        desc["phase"]), store


@main.command()
@click.option("-i", "--input", "input_path", required=True)
@click.option("-o", "--output", default=None, help="report JSON path")
@handles_errors
def qc(input_path, output):
    """Validity and completeness metrics of a store."""
    started = _utcnow()
    store_path = _require(_data_path(input_path))
    report = quality_report(load_store(store_path)).as_dict()
    text = json.dumps(report, indent=2, sort_keys=True)
    click.echo(text)
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        write_manifest(output + ".manifest.json", "qc", {},
                       {"input": store_path}, outputs=[output],
                       started=started)


@main.command()
@click.option("-i", "--input", "input_path", required=True)
@click.option("--keep", required=True,
              help="comma list from works,authors,venues,institutions")
@click.option("-o", "--output", required=True)
@handles_errors
def ablate(input_path, keep, output):
    """Restrict a store to quads between kept entity classes."""
    started = _utcnow()
    store_path = _require(_data_path(input_path))
    names = {"works": WORK, "authors": AUTHOR, "venues": VENUE,
             "institutions": INSTITUTION}
    classes = set()
    for token in keep.split(","):
        token = token.strip().lower()
        if token not in names:
            raise ConfigError(f"unknown class {token!r} in --keep")
        classes.add(names[token])
    store = ablation_variant(load_store(store_path), classes)
    save_store(store, output)
    write_manifest(output + ".manifest.json", "ablate",
                   {"keep": sorted(keep.split(","))},
                   {"input": store_path}, outputs=[output], started=started)
    click.echo(f"{store.n_entities} entities, {store.n_quads} quads "
               f"-> {output}")


# -- modeling commands ---------------------------------------------------

def _require(path):
    if path is None or not os.path.exists(path):
        raise ConfigError(f"input file not found: {path}")
    return path


def _model_params(config_path, overrides):
    params = {}
    if config_path:
        params.update(config_to_params(load_kv_config(
            _require(_data_path(config_path)))))
    for token in overrides:
        if "=" not in token:
            raise ConfigError(f"--set expects key=value, got {token!r}")
        key, value = token.split("=", 1)
        from .training.config import KEY_TO_PARAM, _coerce
        params[KEY_TO_PARAM.get(key.strip(), key.strip())] = \
            _coerce(value.strip())
    return params


@main.command()
@click.option("-i", "--input", "input_path", required=True)
@click.option("--split", "split_path", required=True)
@click.option("--model", "model_kind",
              type=click.Choice(sorted(MODEL_KINDS)), default=None)
@click.option("--encoder", type=click.Choice(["graphsage", "rgcn"]),
              default=None)
@click.option("--variant", default="embedding",
              help="embedding|hybrid|degree (or e|h|d)")
@click.option("--pretrained", default=None,
              help="shallow checkpoint for the hybrid variant")
@click.option("--config", "config_path", default=None,
              help="key-value hyperparameter file")
@click.option("--set", "overrides", multiple=True,
              help="override a hyperparameter, key=value")
@click.option("--max-steps", type=int, default=None)
@click.option("--time-budget", type=float, default=None, help="seconds")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("-o", "--output", required=True, help="checkpoint path")
@handles_errors
def train(input_path, split_path, model_kind, encoder, variant, pretrained,
          config_path, overrides, max_steps, time_budget, seed, workers,
          output):
    """Train a shallow model or an inductive encoder on a split."""
    started = _utcnow()
    if (model_kind is None) == (encoder is None):
        raise ConfigError("choose exactly one of --model or --encoder")
    store_path = _require(_data_path(input_path))
    store = load_store(store_path)
    sp, _ = _load_split(split_path, store)
    params = _model_params(config_path, overrides)
    params.setdefault("random_state", seed)
    params.setdefault("n_jobs", workers)
    if max_steps is not None:
        params["max_steps"] = max_steps
    if time_budget is not None:
        params["time_budget_s"] = time_budget
    log_path = output + ".log.jsonl"

    if encoder is not None:
        if variant.lower() in ("h", "hybrid") and not pretrained:
            raise ConfigError("hybrid variant requires --pretrained")
        klass = {"graphsage": GraphSAGELinkPredictor,
                 "rgcn": RGCNLinkPredictor}[encoder]
        params["variant"] = VARIANT_ALIASES.get(variant.lower(), variant)
        model = klass(**{k: v for k, v in params.items()
                         if k in klass().get_params()})
        pre = Checkpoint.load(_require(_data_path(pretrained))) \
            if pretrained else None
        model.fit(sp, pretrained=pre, log_path=log_path)
    else:
        klass = MODEL_KINDS[model_kind]
        model = klass(**{k: v for k, v in params.items()
                         if k in klass().get_params()})
        model.fit(sp, log_path=log_path)
    model.to_checkpoint().save(output)
    write_manifest(output + ".manifest.json", "train",
                   {"model": model_kind, "encoder": encoder,
                    "variant": variant if encoder else None,
                    "resolved": model.get_params(),
                    "seed": seed, "workers": workers},
                   {"store": store_path,
                    "split": _data_path(split_path),
                    "pretrained": _data_path(pretrained)},
                   outputs=[output, log_path], started=started)
    val = getattr(model, "best_val_mrr_", None)
    click.echo(f"trained {model_kind or encoder} for {model.step_} steps"
               + (f", best val MRR {val:.4f}" if val is not None else "")
               + (", DIVERGED (kept last good state)"
                  if getattr(model, "diverged_", False) else ""))


def _load_scorer(checkpoint_path, store, sp, pretrained=None):
    ckpt = Checkpoint.load(_require(_data_path(checkpoint_path)))
    if ckpt.kind == "shallow":
        model = ShallowModel.from_checkpoint(ckpt, store)
        return model.pair_scorer()
    if sp is None:
        raise ConfigError("encoder checkpoints need --split to rebuild the "
                          "evaluation graph view")
    pre = Checkpoint.load(_require(_data_path(pretrained))) \
        if pretrained else None
    klass = {"graphsage": GraphSAGELinkPredictor,
             "rgcn": RGCNLinkPredictor}[ckpt.meta["encoder"]]
    predictor = klass.from_checkpoint(ckpt, pretrained=pre)
    if predictor.n_entities_ != store.n_entities:
        raise ConfigError("checkpoint entity count does not match store")
    return predictor.pair_scorer(sp)


def _load_partition(path, store):
    path = _require(_data_path(path))
    nodes, labels = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            name, label = line.split("\t")
            nodes.append(store.entity_id(name))
            labels.append(int(label))
    labels = np.asarray(labels)
    return Partition(np.asarray(nodes), labels, int(labels.max()) + 1)


@main.command("eval")
@click.option("--checkpoint", required=True)
@click.option("-i", "--input", "input_path", required=True)
@click.option("--split", "split_path", required=True)
@click.option("--strategy", type=click.Choice(STRATEGIES),
              default="random", show_default=True)
@click.option("-n", "--negatives", type=int, default=1000, show_default=True)
@click.option("--partition", "partition_path", default=None,
              help="partition TSV for the community strategy")
@click.option("--pretrained", default=None,
              help="pretrained checkpoint for hybrid encoders")
@click.option("--max-queries", type=int, default=None)
@click.option("--on-empty", type=click.Choice(["error", "random"]),
              default="error", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("-o", "--output", required=True, help="output prefix")
@handles_errors
def eval_cmd(checkpoint, input_path, split_path, strategy, negatives,
             partition_path, pretrained, max_queries, on_empty, seed,
             output):
    """Filtered tail ranking of a checkpoint under one strategy."""
    started = _utcnow()
    store_path = _require(_data_path(input_path))
    store = load_store(store_path)
    sp, _ = _load_split(split_path, store)
    scorer = _load_scorer(checkpoint, store, sp, pretrained)
    partition = _load_partition(partition_path, store) \
        if partition_path else None
    rng = np.random.default_rng(seed)
    queries = build_queries(sp, strategy, negatives, rng,
                            partition=partition, max_queries=max_queries,
                            on_empty=on_empty)
    report = evaluate_queries(scorer, queries, strategy=strategy,
                              n_negatives=negatives,
                              notes={"tie_rule": "average-rank-half-up",
                                     "random_pool": "all-entity-classes"})
    ranks_path = output + ".ranks.jsonl"
    with open(ranks_path, "w", encoding="utf-8") as fh:
        for record in query_records(queries, report.ranks, strategy,
                                    negatives):
            fh.write(json.dumps(record) + "\n")
    summary_path = output + ".summary.json"
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(report.summary(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_manifest(output + ".manifest.json", "eval",
                   {"strategy": strategy, "n_negatives": negatives,
                    "max_queries": max_queries, "on_empty": on_empty,
                    "seed": seed},
                   {"store": store_path, "split": _data_path(split_path),
                    "checkpoint": _data_path(checkpoint),
                    "partition": _data_path(partition_path)},
                   outputs=[ranks_path, summary_path], started=started)
    click.echo(json.dumps(report.summary()))


@main.command()
@click.option("--checkpoint", required=True)
@click.option("-i", "--input", "input_path", required=True)
@click.option("--split", "split_path", required=True)
@click.option("--strategies", default="random,entity_type,time_constrained",
              show_default=True)
@click.option("--counts", default="10,100,1000", show_default=True)
@click.option("--partition", "partition_path", default=None)
@click.option("--pretrained", default=None)
@click.option("--max-queries", type=int, default=None)
@click.option("--include-full/--no-full", default=False, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("-o", "--output", required=True, help="JSON-lines path")
@handles_errors
def sweep(checkpoint, input_path, split_path, strategies, counts,
          partition_path, pretrained, max_queries, include_full, seed,
          output):
    """MRR across negative-sample counts, one point per strategy/count."""
    started = _utcnow()
    store = load_store(_require(_data_path(input_path)))
    sp, _ = _load_split(split_path, store)
    scorer = _load_scorer(checkpoint, store, sp, pretrained)
    partition = _load_partition(partition_path, store) \
        if partition_path else None
    strategy_list = [s.strip() for s in strategies.split(",") if s.strip()]
    count_list = [int(c) for c in counts.split(",")]
    records = negative_count_sweep(scorer, sp, strategy_list, count_list,
                                   np.random.default_rng(seed),
                                   partition=partition,
                                   max_queries=max_queries,
                                   include_full=include_full)
    with open(output, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")
    write_manifest(output + ".manifest.json", "sweep",
                   {"strategies": strategy_list, "counts": count_list,
                    "include_full": include_full, "seed": seed,
                    "max_queries": max_queries},
                   {"store": _data_path(input_path),
                    "split": _data_path(split_path),
                    "checkpoint": _data_path(checkpoint)},
                   outputs=[output], started=started)
    click.echo(f"{len(records)} sweep points -> {output}")


@main.command()
@click.option("--checkpoint", required=True)
@click.option("-i", "--input", "input_path", required=True)
@click.option("--split", "split_path", default=None,
              help="needed only for encoder checkpoints")
@click.option("--query", "query_label", required=True)
@click.option("--positive", "positive_label", required=True)
@click.option("-n", "--negatives", type=int, default=1000, show_default=True)
@click.option("--pretrained", default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("-o", "--output", required=True)
@handles_errors
def report(checkpoint, input_path, split_path, query_label, positive_label,
           negatives, pretrained, seed, output):
    """Rank one known citation among random negatives; flag anomalies."""
    started = _utcnow()
    store = load_store(_require(_data_path(input_path)))
    sp = _load_split(split_path, store)[0] if split_path else None
    scorer = _load_scorer(checkpoint, store, sp, pretrained)
    record = citation_report(scorer, store, store.entity_id(query_label),
                             store.entity_id(positive_label), n=negatives,
                             rng=np.random.default_rng(seed))
    with open(output, "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_manifest(output + ".manifest.json", "report",
                   {"query": query_label, "positive": positive_label,
                    "n_negatives": negatives, "seed": seed},
                   {"store": _data_path(input_path),
                    "checkpoint": _data_path(checkpoint)},
                   outputs=[output], started=started)
    click.echo(json.dumps(record))


@main.command()
@click.option("-i", "--input", "input_path", required=True)
@click.option("--n", "n_communities", type=int, default=3000,
              show_default=True)
@click.option("--cap", type=int, default=300_000, show_default=True)
@click.option("--quality", "quality_kind",
              type=click.Choice(["modularity", "rber", "significance",
                                 "surprise"]),
              default="significance", show_default=True)
@click.option("--sweeps", type=int, default=20, show_default=True)
@click.option("--mode", type=click.Choice(["sequential", "batch"]),
              default="sequential", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("-o", "--output", "out_dir", required=True,
              help="output directory")
@handles_errors
def communities(input_path, n_communities, cap, quality_kind, sweeps, mode,
                seed, out_dir):
    """Constrained community detection over the citation network."""
    started = _utcnow()
    store_path = _require(_data_path(input_path))
    store = load_store(store_path)
    est = ConstrainedLeiden(n_communities=n_communities, cap=cap,
                            quality=quality_kind, max_sweeps=sweeps,
                            mode=mode, random_state=seed)
    est.fit(store)
    os.makedirs(out_dir, exist_ok=True)
    partition_path = os.path.join(out_dir, "partition.tsv")
    with open(partition_path, "w", encoding="utf-8") as fh:
        fh.write("# node\tcommunity\n")
        for node, label in zip(est.node_ids_, est.labels_):
            fh.write(f"{store.labels[node]}\t{int(label)}\n")
    trace_path = os.path.join(out_dir, "quality_trace.jsonl")
    with open(trace_path, "w", encoding="utf-8") as fh:
        for sweep_i, value in enumerate(est.trace_):
            fh.write(json.dumps({"sweep": sweep_i, "kind": quality_kind,
                                 "value": value}) + "\n")
    outputs = [partition_path, trace_path]
    if len(store.concept_links):
        records = concept_quality(est.partition_, store.concept_links,
                                  store.concept_parents)
        cq_path = os.path.join(out_dir, "concept_quality.csv")
        with open(cq_path, "w", encoding="utf-8") as fh:
            fh.write("community,n_papers,n_linked,root,pct\n")
            for rec in records:
                root = "" if rec["root"] is None else \
                    store.labels[rec["root"]]
                pct = "" if rec["pct"] is None else f"{rec['pct']:.4f}"
                fh.write(f"{rec['community']},{rec['n_papers']},"
                         f"{rec['n_linked']},{root},{pct}\n")
        outputs.append(cq_path)
    write_manifest(os.path.join(out_dir, "manifest.json"), "communities",
                   {"n_communities": n_communities, "cap": cap,
                    "quality": quality_kind, "sweeps": sweeps, "mode": mode,
                    "seed": seed},
                   {"store": store_path}, outputs=outputs, started=started)
    click.echo(f"{est.partition_.n_used()} communities used, "
               f"final {quality_kind} = {est.trace_[-1]}")


@main.command("export")
@click.option("-i", "--input", "input_path", required=True)
@click.option("-o", "--output", required=True, help="quad TSV path")
@click.option("--sidecar", default=None, help="class/date sidecar path")
@handles_errors
def export(input_path, output, sidecar):
    """Write a binary store back to quad TSV (+ optional sidecar)."""
    store = load_store(_require(_data_path(input_path)))
    export_tsv(store, output, sidecar)
    click.echo(f"{store.n_quads} quads -> {output}")


if __name__ == "__main__":
    main()
