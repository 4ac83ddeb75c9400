"""Self-loop-free message-passing encoders.

A node's new state is computed purely from its neighbors' previous
states (the node's own state is never read), so representations for
unseen nodes follow from one pass over their links to known nodes:

* sage layer:  h_u = norm(relu(W . agg({h_v})))  with mean or max-pool
  aggregation over all incident edges
* rgcn layer:  h_u = norm(relu(sum_g (1/|N_u^g|) W_g sum_{v in N_u^g} h_v))
  with per relation-direction group weights composed from a shared
  basis stack: W_g = sum_b a[g, b] B_b

Empty neighborhoods produce a zero message (hence a zero state), so
sparsely connected evaluation-period nodes stay scorable. Forward
passes cache what the hand-written backward needs; gradients cover the
layer weights, the basis stack/mixing, and the layer-0 input rows.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from ..utils import as_rng
from .graphview import N_GROUPS, sample_neighborhood

LN_EPS = 1e-5


def decode_dot(h_u, h_v) -> np.ndarray:
    """Score of a node pair: plain dot product of final states."""
    h_u, h_v = np.asarray(h_u), np.asarray(h_v)
    if h_u.shape[-1] != h_v.shape[-1]:
        raise ConfigError("decoder operands have different widths")
    return np.sum(h_u * h_v, axis=-1)


def glorot(shape, rng) -> np.ndarray:
    limit = np.sqrt(6.0 / (shape[-1] + shape[-2]))
    return as_rng(rng).uniform(-limit, limit, size=shape)


def _layer_norm_forward(a):
    mu = a.mean(axis=-1, keepdims=True)
    var = a.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    y = (a - mu) * inv
    return y, (y, inv)


def _layer_norm_backward(dy, cache):
    y, inv = cache
    return inv * (dy - dy.mean(axis=-1, keepdims=True)
                  - y * (dy * y).mean(axis=-1, keepdims=True))


class _Block:
    """One layer's batched neighborhood structure.

    ``nodes`` are the target ids; edge arrays are concatenated per-node
    slices with ``ptr`` boundaries; ``src_pos`` indexes each edge's
    source into the previous frontier's state matrix.
    """

    def __init__(self, nodes, ptr, src_pos, groups, prev_nodes):
        self.nodes = nodes
        self.ptr = ptr
        self.src_pos = src_pos
        self.groups = groups
        self.prev_nodes = prev_nodes
        self.seg = np.repeat(np.arange(len(nodes)), np.diff(ptr))


def build_blocks(node_ids, n_layers, view, fanout, rng, allowed=None):
    """Layered sampled neighborhoods for a batch, outermost first.

    ``allowed`` masks which neighbor nodes may contribute (nodes whose
    layer-0 inputs exist); edges to excluded nodes are dropped.
    """
    node_ids = np.asarray(node_ids, dtype=np.int64)
    blocks = []
    frontier = node_ids
    for _ in range(n_layers):
        ptr = [0]
        nbrs, grps = [], []
        for node in frontier:
            nb, gr = sample_neighborhood(int(node), fanout, rng, view)
            if allowed is not None and len(nb):
                keep = allowed[nb]
                nb, gr = nb[keep], gr[keep]
            nbrs.append(nb)
            grps.append(gr)
            ptr.append(ptr[-1] + len(nb))
        flat = np.concatenate(nbrs) if nbrs else np.zeros(0, dtype=np.int64)
        groups = np.concatenate(grps) if grps else np.zeros(0, dtype=np.int64)
        prev_nodes, src_pos = np.unique(flat, return_inverse=True) \
            if len(flat) else (np.zeros(0, dtype=np.int64),
                               np.zeros(0, dtype=np.int64))
        blocks.append(_Block(frontier, np.asarray(ptr, dtype=np.int64),
                             src_pos, groups, prev_nodes))
        frontier = prev_nodes
    return blocks[::-1]  # innermost (layer 1) first


class SageEncoder:
    """Stacked self-loop-free sage layers."""

    def __init__(self, dims, aggregator="mean", normalization="layer",
                 rng=None):
        # dims: [d_in, d_1, ..., d_K]
        rng = as_rng(rng)
        if aggregator not in ("mean", "pool"):
            raise ConfigError(f"unknown aggregator {aggregator!r}")
        if normalization not in ("none", "layer"):
            raise ConfigError(f"unknown normalization {normalization!r}")
        self.aggregator = aggregator
        self.normalization = normalization
        self.params = {}
        for k in range(len(dims) - 1):
            self.params[f"W{k}"] = glorot((dims[k + 1], dims[k]), rng)
            if aggregator == "pool":
                self.params[f"P{k}"] = glorot((dims[k], dims[k]), rng)
                self.params[f"pb{k}"] = np.zeros(dims[k])

    @property
    def n_layers(self):
        return sum(1 for k in self.params if k.startswith("W"))

    def _aggregate(self, k, block, prev_h):
        B = len(block.nodes)
        din = prev_h.shape[1] if len(prev_h) else self.params[f"W{k}"].shape[1]
        counts = np.diff(block.ptr).astype(np.float64)
        if self.aggregator == "mean":
            m = np.zeros((B, din))
            if len(block.src_pos):
                np.add.at(m, block.seg, prev_h[block.src_pos])
            m /= np.maximum(counts, 1.0)[:, None]
            return m, {"counts": counts}
        # pool: elementwise max over relu-projected neighbor states
        P, pb = self.params[f"P{k}"], self.params[f"pb{k}"]
        x = prev_h[block.src_pos]
        proj_pre = x @ P.T + pb
        proj = np.maximum(proj_pre, 0.0)
        m = np.zeros((B, din))
        argmax = np.full((B, din), -1, dtype=np.int64)
        for i in range(B):
            lo, hi = block.ptr[i], block.ptr[i + 1]
            if hi > lo:
                local = proj[lo:hi]
                idx = np.argmax(local, axis=0)
                m[i] = local[idx, np.arange(din)]
                argmax[i] = lo + idx
        return m, {"counts": counts, "proj_pre": proj_pre, "x": x,
                   "argmax": argmax}

    def forward(self, blocks, inputs_of, dropout=0.0, rng=None):
        """States for the outermost block's nodes.

        ``inputs_of(node_ids)`` returns the layer-0 rows. ``dropout``
        (training only) masks the aggregated messages. Returns
        ``(h, caches)``.
        """
        h = inputs_of(blocks[0].prev_nodes)
        caches = []
        for k, block in enumerate(blocks):
            m, agg_cache = self._aggregate(k, block, h)
            mask = None
            if dropout > 0.0 and rng is not None:
                mask = (rng.random(m.shape) >= dropout) / (1.0 - dropout)
                m = m * mask
            W = self.params[f"W{k}"]
            pre = m @ W.T
            a = np.maximum(pre, 0.0)
            if self.normalization == "layer":
                out, ln_cache = _layer_norm_forward(a)
            else:
                out, ln_cache = a, None
            caches.append({"block": block, "prev_h": h, "m": m, "mask": mask,
                           "agg": agg_cache, "pre": pre, "ln": ln_cache})
            h = out
        return h, caches

    def backward(self, caches, d_out):
        """Parameter grads plus sparse input grads (node ids, rows)."""
        grads = {name: np.zeros_like(p) for name, p in self.params.items()}
        dh = d_out
        for k in reversed(range(len(caches))):
            cache = caches[k]
            block = cache["block"]
            if self.normalization == "layer":
                da = _layer_norm_backward(dh, cache["ln"])
            else:
                da = dh
            dpre = da * (cache["pre"] > 0)
            grads[f"W{k}"] += dpre.T @ cache["m"]
            dm = dpre @ self.params[f"W{k}"]
            if cache["mask"] is not None:
                dm = dm * cache["mask"]
            prev_h = cache["prev_h"]
            dprev = np.zeros_like(prev_h)
            agg = cache["agg"]
            if self.aggregator == "mean":
                if len(block.src_pos):
                    scale = 1.0 / np.maximum(agg["counts"], 1.0)
                    dx = dm[block.seg] * scale[block.seg][:, None]
                    np.add.at(dprev, block.src_pos, dx)
            else:
                P = self.params[f"P{k}"]
                dproj = np.zeros_like(agg["proj_pre"])
                argmax, din = agg["argmax"], dm.shape[1]
                for i in range(len(block.nodes)):
                    cols = np.nonzero(argmax[i] >= 0)[0]
                    if len(cols):
                        dproj[argmax[i, cols], cols] += dm[i, cols]
                dproj *= (agg["proj_pre"] > 0)
                grads[f"P{k}"] += dproj.T @ agg["x"]
                grads[f"pb{k}"] += dproj.sum(axis=0)
                np.add.at(dprev, block.src_pos, dproj @ P)
            dh = dprev
        return grads, (caches[0]["block"].prev_nodes, dh)


class RgcnEncoder:
    """Stacked self-loop-free relational layers with basis weights."""

    def __init__(self, dims, n_bases=8, normalization="layer", rng=None):
        rng = as_rng(rng)
        if not 1 <= n_bases <= N_GROUPS:
            raise ConfigError(
                f"n_bases must be in [1, {N_GROUPS}] "
                f"(one weight per relation-direction group at most)")
        if normalization not in ("none", "layer"):
            raise ConfigError(f"unknown normalization {normalization!r}")
        self.n_bases = n_bases
        self.normalization = normalization
        self.params = {}
        for k in range(len(dims) - 1):
            self.params[f"B{k}"] = glorot((n_bases, dims[k + 1], dims[k]), rng)
            self.params[f"a{k}"] = as_rng(rng).uniform(
                -np.sqrt(6.0 / (N_GROUPS + n_bases)),
                np.sqrt(6.0 / (N_GROUPS + n_bases)),
                size=(N_GROUPS, n_bases))

    @property
    def n_layers(self):
        return sum(1 for k in self.params if k.startswith("B"))

    def forward(self, blocks, inputs_of, dropout=0.0, rng=None):
        h = inputs_of(blocks[0].prev_nodes)
        caches = []
        for k, block in enumerate(blocks):
            B = len(block.nodes)
            din = h.shape[1] if len(h) else self.params[f"B{k}"].shape[2]
            key = block.seg * N_GROUPS + block.groups
            sums = np.zeros((B * N_GROUPS, din))
            if len(block.src_pos):
                np.add.at(sums, key, h[block.src_pos])
            counts = np.bincount(key, minlength=B * N_GROUPS).astype(
                np.float64)
            means = sums / np.maximum(counts, 1.0)[:, None]
            M = means.reshape(B, N_GROUPS, din)
            mask = None
            if dropout > 0.0 and rng is not None:
                mask = (rng.random(M.shape) >= dropout) / (1.0 - dropout)
                M = M * mask
            Wstack = np.tensordot(self.params[f"a{k}"],
                                  self.params[f"B{k}"], axes=(1, 0))
            pre = np.einsum("bgi,goi->bo", M, Wstack)
            a = np.maximum(pre, 0.0)
            if self.normalization == "layer":
                out, ln_cache = _layer_norm_forward(a)
            else:
                out, ln_cache = a, None
            caches.append({"block": block, "prev_h": h, "M": M, "key": key,
                           "counts": counts, "Wstack": Wstack, "pre": pre,
                           "mask": mask, "ln": ln_cache})
            h = out
        return h, caches

    def backward(self, caches, d_out):
        grads = {name: np.zeros_like(p) for name, p in self.params.items()}
        dh = d_out
        for k in reversed(range(len(caches))):
            cache = caches[k]
            block = cache["block"]
            if self.normalization == "layer":
                da = _layer_norm_backward(dh, cache["ln"])
            else:
                da = dh
            dpre = da * (cache["pre"] > 0)
            dWstack = np.einsum("bo,bgi->goi", dpre, cache["M"])
            grads[f"B{k}"] += np.tensordot(self.params[f"a{k}"], dWstack,
                                           axes=(0, 0))
            grads[f"a{k}"] += np.einsum("goi,boi->gb", dWstack,
                                        self.params[f"B{k}"])
            dM = np.einsum("bo,goi->bgi", dpre, cache["Wstack"])
            if cache["mask"] is not None:
                dM = dM * cache["mask"]
            dmeans = dM.reshape(-1, dM.shape[2])
            dprev = np.zeros_like(cache["prev_h"])
            if len(block.src_pos):
                scale = 1.0 / np.maximum(cache["counts"], 1.0)
                dx = dmeans[cache["key"]] * scale[cache["key"]][:, None]
                np.add.at(dprev, block.src_pos, dx)
            dh = dprev
        return grads, (caches[0]["block"].prev_nodes, dh)


def encode_graphsage(node, view, inputs_of, encoder: SageEncoder,
                     fanout=None, rng=None, allowed=None):
    """Single-node convenience wrapper: one full forward pass."""
    blocks = build_blocks([node], encoder.n_layers, view, fanout, rng,
                          allowed)
    h, _ = encoder.forward(blocks, inputs_of)
    return h[0]


def encode_rgcn(node, view, inputs_of, encoder: RgcnEncoder, fanout=None,
                rng=None, allowed=None):
    blocks = build_blocks([node], encoder.n_layers, view, fanout, rng,
                          allowed)
    h, _ = encoder.forward(blocks, inputs_of)
    return h[0]
