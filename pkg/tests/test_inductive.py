import itertools

import numpy as np
import pytest

from citekg.errors import ConfigError, ContractError
from citekg.graph.split import INDUCTIVE, temporal_split
from citekg.graph.store import REL_CITES
from citekg.inductive.encoders import (RgcnEncoder, SageEncoder, build_blocks,
                                       decode_dot)
from citekg.inductive.features import degree_features
from citekg.inductive.graphview import (N_GROUPS, GraphView,
                                        sample_neighborhood)
from citekg.inductive.models import (GraphSAGELinkPredictor,
                                     RGCNLinkPredictor, embed_unseen)
from citekg.models.checkpoint import Checkpoint
from citekg.models.shallow import ComplEx
from citekg.utils import parse_date

from conftest import make_store, random_toy_store
from oracles import (central_difference, chi_square_uniform_pvalue,
                     relative_error)
from synth import planted_citation_store

T_VALID = parse_date("2017-01-01")
T_TEST = parse_date("2020-01-01")


class TestDegreeFeatures:
    def test_hand_counted_vector(self):
        store = make_store([
            ("X", "cites", "W", "2015-01-01"),
            ("Y", "cites", "W", "2015-02-01"),
            ("W", "cites", "Z", "2014-01-01"),
            ("W", "author", "A", "2014-01-01"),
        ], dates={"Z": "2013-01-01"})
        feats = degree_features(store)
        w = store.entity_id("W")
        assert feats[w].tolist() == [2, 0, 0, 0, 1, 1, 0, 0]

    def test_isolated_node_zero(self):
        store = make_store([("A", "cites", "B", "2015-01-01")],
                           dates={"B": "2014-01-01", "C": "2013-01-01"})
        feats = degree_features(store)
        assert (feats[store.entity_id("C")] == 0).all()

    def test_column_sums_match_relation_counts(self, rng):
        store = random_toy_store(rng)
        feats = degree_features(store)
        for rel in range(4):
            n = int((store.r == rel).sum())
            assert feats[:, rel].sum() == n           # incoming total
            assert feats[:, 4 + rel].sum() == n       # outgoing total


class TestNeighborhood:
    def _view(self, rng):
        store = random_toy_store(rng, n_works=15, n_cites=40)
        return store, GraphView(store, np.arange(store.n_quads))

    def test_degree_within_fanout_returns_all(self, rng):
        store, view = self._view(rng)
        node = int(np.argmax([view.degree(n)
                              for n in range(store.n_entities)]))
        deg = view.degree(node)
        nb, gr = sample_neighborhood(node, deg + 5, rng, view)
        assert len(nb) == deg

    def test_fixed_seed_identical(self, rng):
        store, view = self._view(rng)
        node = int(np.argmax([view.degree(n)
                              for n in range(store.n_entities)]))
        a = sample_neighborhood(node, 2, np.random.default_rng(5), view)
        b = sample_neighborhood(node, 2, np.random.default_rng(5), view)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_sampling_uniform_over_neighbors(self, rng):
        store = make_store([("HUB", "cites", f"L{i}", "2015-01-01")
                            for i in range(10)],
                           dates={f"L{i}": "2014-01-01" for i in range(10)})
        view = GraphView(store, np.arange(store.n_quads))
        hub = store.entity_id("HUB")
        counts = np.zeros(store.n_entities)
        for _ in range(10_000):
            nb, _ = sample_neighborhood(hub, 3, rng, view)
            counts[nb] += 1
        leaf_counts = counts[[store.entity_id(f"L{i}") for i in range(10)]]
        assert chi_square_uniform_pvalue(leaf_counts) > 0.01

    def test_zero_neighbor_empty_sample(self, rng):
        store = make_store([("A", "cites", "B", "2015-01-01")],
                           dates={"B": "2014-01-01", "C": "2010-01-01"})
        view = GraphView(store, np.arange(store.n_quads))
        nb, gr = sample_neighborhood(store.entity_id("C"), 5, rng, view)
        assert len(nb) == 0 and len(gr) == 0


def _micro_setup(rng, encoder_cls, n_nodes=8, **enc_kwargs):
    store = random_toy_store(rng, n_works=n_nodes, n_cites=2 * n_nodes)
    view = GraphView(store, np.arange(store.n_quads))
    d_in, d_out = 3, 4
    inputs = rng.normal(size=(store.n_entities, d_in))
    enc = encoder_cls([d_in, d_out], rng=rng, **enc_kwargs)

    def inputs_of(ids):
        return inputs[ids] if len(ids) else np.zeros((0, d_in))
    return store, view, inputs, enc, inputs_of


class TestEncoderSemantics:
    def test_all_zero_neighbors_give_activation_of_zero(self, rng):
        store, view, inputs, enc, _ = _micro_setup(
            rng, SageEncoder, normalization="none")
        zeros = np.zeros_like(inputs)
        blocks = build_blocks(np.arange(4), 1, view, None, None)
        h, _ = enc.forward(blocks, lambda ids: zeros[ids])
        assert np.allclose(h, 0.0)

    def test_mean_single_neighbor_is_that_state(self, rng):
        store = make_store([("A", "cites", "B", "2015-01-01")],
                           dates={"B": "2014-01-01"})
        view = GraphView(store, np.arange(store.n_quads))
        inputs = rng.normal(size=(2, 3))
        enc = SageEncoder([3, 3], normalization="none", rng=rng)
        a = store.entity_id("A")
        blocks = build_blocks([a], 1, view, None, None)
        h, caches = enc.forward(blocks, lambda ids: inputs[ids])
        b = store.entity_id("B")
        assert np.allclose(caches[0]["m"][0], inputs[b])

    @pytest.mark.parametrize("aggregator", ["mean", "pool"])
    def test_neighbor_permutation_invariance(self, rng, aggregator):
        # permuting the incident-edge order leaves the state unchanged
        quads = [("A", "cites", f"B{i}", "2015-01-01") for i in range(5)]
        dates = {f"B{i}": "2014-01-01" for i in range(5)}
        store = make_store(quads, dates=dates)
        inputs = rng.normal(size=(store.n_entities, 3))
        enc = SageEncoder([3, 4], aggregator=aggregator, rng=rng)
        a = store.entity_id("A")
        view = GraphView(store, np.arange(store.n_quads))
        nb, gr = view.incident(a)
        outs = []
        for perm in itertools.permutations(range(5)):
            order = np.asarray(perm)
            blocks = build_blocks([a], 1, view, None, None)
            block = blocks[0]
            block.src_pos = block.src_pos[order]
            block.groups = block.groups[order]
            h, _ = enc.forward(blocks, lambda ids: inputs[ids])
            outs.append(h[0])
        for out in outs[1:]:
            assert np.allclose(out, outs[0], atol=1e-12)

    def test_rgcn_one_relation_one_neighbor(self, rng):
        store = make_store([("A", "cites", "B", "2015-01-01")],
                           dates={"B": "2014-01-01"})
        view = GraphView(store, np.arange(store.n_quads))
        inputs = rng.normal(size=(2, 3))
        enc = RgcnEncoder([3, 4], n_bases=8, normalization="none", rng=rng)
        a, b = store.entity_id("A"), store.entity_id("B")
        blocks = build_blocks([a], 1, view, None, None)
        h, _ = enc.forward(blocks, lambda ids: inputs[ids])
        w_stack = np.tensordot(enc.params["a0"], enc.params["B0"],
                               axes=(1, 0))
        expected = np.maximum(w_stack[REL_CITES] @ inputs[b], 0.0)
        assert np.allclose(h[0], expected)

    def test_rgcn_duplicate_neighbors_invariant(self, rng):
        # duplicating every neighbor leaves the per-group mean unchanged
        quads = [("A", "cites", "B", "2015-01-01"),
                 ("A", "cites", "C", "2015-01-01")]
        dates = {"B": "2014-01-01", "C": "2014-01-01"}
        store = make_store(quads, dates=dates)
        view = GraphView(store, np.arange(store.n_quads))
        inputs = rng.normal(size=(store.n_entities, 3))
        enc = RgcnEncoder([3, 4], rng=rng)
        a = store.entity_id("A")
        blocks = build_blocks([a], 1, view, None, None)
        h1, _ = enc.forward(blocks, lambda ids: inputs[ids])
        block = blocks[0]
        block.src_pos = np.concatenate([block.src_pos, block.src_pos])
        block.groups = np.concatenate([block.groups, block.groups])
        block.ptr = block.ptr * 2
        block.seg = np.repeat(np.arange(1), np.diff(block.ptr))
        h2, _ = enc.forward(blocks, lambda ids: inputs[ids])
        assert np.allclose(h1, h2)

    def test_basis_saturation_reproduces_unconstrained(self, rng):
        # n_bases = n_groups with identity mixing = free per-group weights
        enc = RgcnEncoder([3, 4], n_bases=N_GROUPS, rng=rng)
        enc.params["a0"] = np.eye(N_GROUPS)
        w_stack = np.tensordot(enc.params["a0"], enc.params["B0"],
                               axes=(1, 0))
        assert np.allclose(w_stack, enc.params["B0"])

    def test_bases_bounded_by_groups(self, rng):
        with pytest.raises(ConfigError):
            RgcnEncoder([3, 4], n_bases=N_GROUPS + 1, rng=rng)

    def test_self_loop_freeness(self, rng):
        # perturbing a node's own input leaves its 1-layer state fixed
        for encoder_cls in (SageEncoder, RgcnEncoder):
            store, view, inputs, enc, inputs_of = _micro_setup(
                rng, encoder_cls)
            node = int(store.s[0])
            blocks = build_blocks([node], 1, view, None, None)
            h1, _ = enc.forward(blocks, inputs_of)
            inputs[node] += 100.0
            h2, _ = enc.forward(blocks, inputs_of)
            assert np.allclose(h1, h2)

    def test_decode_dot(self):
        assert decode_dot([1.0, 2.0], [3.0, 4.0]) == pytest.approx(11.0)
        assert decode_dot([1.0, 0.0], [0.0, 1.0]) == 0.0
        assert decode_dot([1.0, 0.0], [1.0, 0.0]) == 1.0


class TestEncoderGradients:
    @pytest.mark.parametrize("encoder_cls,kwargs", [
        (SageEncoder, {"aggregator": "mean", "normalization": "layer"}),
        (SageEncoder, {"aggregator": "mean", "normalization": "none"}),
        (SageEncoder, {"aggregator": "pool", "normalization": "layer"}),
        (RgcnEncoder, {"n_bases": 3, "normalization": "layer"}),
        (RgcnEncoder, {"n_bases": 8, "normalization": "none"}),
    ])
    def test_gradients_match_fd_on_micro_graphs(self, rng, encoder_cls,
                                                kwargs):
        for trial in range(4):
            store, view, inputs, enc, inputs_of = _micro_setup(
                rng, encoder_cls, **kwargs)
            nodes = rng.choice(store.n_entities, size=3, replace=False)
            blocks = build_blocks(nodes, 1, view, None, None)
            coef = rng.normal(size=(3, 4))

            def scalar():
                h, _ = enc.forward(blocks, inputs_of)
                return float(np.sum(h * coef))

            h, caches = enc.forward(blocks, inputs_of)
            grads, (in_nodes, d_in) = enc.backward(caches, coef)
            worst = 0.0
            for name, g in grads.items():
                p = enc.params[name]
                flat = p.reshape(-1)

                def f(x, p=p, flat=flat):
                    saved = flat.copy()
                    flat[:] = x
                    out = scalar()
                    flat[:] = saved
                    return out
                num = central_difference(f, flat.copy(), eps=1e-6)
                worst = max(worst, relative_error(g.ravel(), num,
                                                  floor=1e-6))
            # input gradients
            for k, node in enumerate(in_nodes):
                def f_in(x, node=node):
                    saved = inputs[node].copy()
                    inputs[node] = x
                    out = scalar()
                    inputs[node] = saved
                    return out
                num = central_difference(f_in, inputs[node].copy(), eps=1e-6)
                worst = max(worst, relative_error(d_in[k], num, floor=1e-6))
            assert worst < 1e-3, f"encoder gradient mismatch {worst}"


def _inductive_split(n_works=120, seed=0):
    store = planted_citation_store(n_works=n_works, group_size=10,
                                   cites_per_work=4, seed=seed)
    return temporal_split(store, T_VALID, T_TEST, mode=INDUCTIVE)


class TestPredictors:
    def test_zero_budget_returns_init(self):
        split = _inductive_split()
        model = GraphSAGELinkPredictor(dim=8, max_steps=0, val_queries=0,
                                       random_state=0)
        model.fit(split)
        assert model.step_ == 0

    def test_hybrid_requires_pretrained(self):
        split = _inductive_split()
        model = GraphSAGELinkPredictor(variant="hybrid", dim=8, max_steps=1,
                                       val_queries=0)
        with pytest.raises(ConfigError):
            model.fit(split)

    def test_hybrid_freeze_bit_identical(self):
        split = _inductive_split()
        pre = ComplEx(dim=4, max_steps=5, batch_size=16, n_negatives=4,
                      val_queries=0, random_state=1)
        pre.fit(split)
        ckpt = pre.to_checkpoint()
        before = ckpt.tables["entities"].tobytes()
        model = GraphSAGELinkPredictor(variant="hybrid", dim=8, max_steps=15,
                                       batch_size=8, n_negatives=3,
                                       val_queries=0, random_state=2)
        model.fit(split, pretrained=ckpt)
        assert ckpt.tables["entities"].tobytes() == before
        assert model.frozen_inputs_.tobytes() == before

    def test_pretrained_entity_count_mismatch(self):
        split = _inductive_split()
        other = _inductive_split(n_works=60, seed=3)
        pre = ComplEx(dim=4, max_steps=1, batch_size=8, n_negatives=2,
                      val_queries=0).fit(other)
        model = GraphSAGELinkPredictor(variant="hybrid", dim=8, max_steps=1,
                                       val_queries=0)
        with pytest.raises(ContractError):
            model.fit(split, pretrained=pre.to_checkpoint())

    def test_eval_full_fanout_deterministic(self):
        split = _inductive_split()
        model = GraphSAGELinkPredictor(variant="degree", dim=8, max_steps=10,
                                       batch_size=8, n_negatives=3,
                                       val_queries=0, random_state=5)
        model.fit(split)
        h1 = model._eval_states(split)
        model._h_cache = None
        h2 = model._eval_states(split)
        assert np.array_equal(h1, h2)

    def test_unseen_identical_neighborhoods_identical_embeddings(self):
        split = _inductive_split()
        model = GraphSAGELinkPredictor(variant="degree", dim=8, max_steps=5,
                                       batch_size=8, n_negatives=3,
                                       val_queries=0, random_state=5)
        model.fit(split)
        store = split.store
        aux = split.auxiliary_idx()
        unseen_ids = np.nonzero(split.unseen_entities)[0]
        h = [embed_unseen(int(u), aux, model, split) for u in unseen_ids[:2]]
        view = GraphView(store, aux)
        nb0, _ = view.incident(int(unseen_ids[0]))
        nb1, _ = view.incident(int(unseen_ids[1]))
        if np.array_equal(nb0, nb1):
            assert np.allclose(h[0], h[1])
        # zero-auxiliary-neighbor nodes embed to the zero-message state
        lonely = [u for u in unseen_ids if view.degree(int(u)) == 0]
        if lonely:
            hz = embed_unseen(int(lonely[0]), aux, model, split)
            assert np.isfinite(hz).all()

    def test_ablate_sampled_link_changes_embedding(self):
        # removing an auxiliary link changes the embedding iff sampled
        # (full fanout: always sampled when incident)
        split = _inductive_split()
        model = GraphSAGELinkPredictor(variant="degree", dim=8, max_steps=5,
                                       batch_size=8, n_negatives=3,
                                       val_queries=0, random_state=5)
        model.fit(split)
        store = split.store
        aux = split.auxiliary_idx()
        view = GraphView(store, aux)
        unseen_ids = [u for u in np.nonzero(split.unseen_entities)[0]
                      if view.degree(int(u)) >= 2]
        node = int(unseen_ids[0])
        h_full = embed_unseen(node, aux, model, split)
        incident_quads = [qi for qi in aux
                          if store.s[qi] == node or store.o[qi] == node]
        reduced = np.asarray([qi for qi in aux if qi != incident_quads[0]])
        h_less = embed_unseen(node, reduced, model, split)
        assert not np.allclose(h_full, h_less)
        # removing a non-incident link changes nothing
        other = [qi for qi in aux if qi not in incident_quads]
        if other:
            reduced2 = np.asarray([qi for qi in aux if qi != other[0]])
            h_same = embed_unseen(node, reduced2, model, split)
            assert np.allclose(h_full, h_same)

    def test_checkpoint_roundtrip_scores(self, tmp_path):
        split = _inductive_split()
        model = RGCNLinkPredictor(variant="embedding", dim=8, max_steps=10,
                                  batch_size=8, n_negatives=3, n_bases=4,
                                  val_queries=0, random_state=6)
        model.fit(split)
        path = tmp_path / "enc.kgi"
        model.to_checkpoint().save(path)
        restored = RGCNLinkPredictor.from_checkpoint(Checkpoint.load(path))
        s1 = model.pair_scorer(split)
        s2 = restored.pair_scorer(split)
        works = split.store.work_ids[:10]
        a = s1(int(works[0]), REL_CITES, works[1:], None)
        b = s2(int(works[0]), REL_CITES, works[1:], None)
        assert np.allclose(a, b, atol=1e-5)

    def test_hybrid_checkpoint_hash_reference(self, tmp_path):
        split = _inductive_split()
        pre = ComplEx(dim=4, max_steps=5, batch_size=16, n_negatives=4,
                      val_queries=0, random_state=1).fit(split)
        pre_ckpt = pre.to_checkpoint()
        model = GraphSAGELinkPredictor(variant="hybrid", dim=8, max_steps=5,
                                       batch_size=8, n_negatives=3,
                                       val_queries=0, random_state=2)
        model.fit(split, pretrained=pre_ckpt)
        enc_ckpt = Checkpoint.from_bytes(model.to_checkpoint().to_bytes())
        assert "inputs" not in enc_ckpt.tables  # referenced by hash only
        restored = GraphSAGELinkPredictor.from_checkpoint(
            enc_ckpt, pretrained=pre_ckpt)
        assert restored.frozen_hash_ == model.frozen_hash_
        with pytest.raises(ContractError):
            wrong = ComplEx(dim=4, max_steps=3, batch_size=16, n_negatives=4,
                            val_queries=0, random_state=9).fit(split)
            GraphSAGELinkPredictor.from_checkpoint(
                enc_ckpt, pretrained=wrong.to_checkpoint())
