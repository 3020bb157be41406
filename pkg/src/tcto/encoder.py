"""Relational graph encoding of roadmap nodes.

Two graph-convolution layers with one weight matrix per operation relation
plus an explicit self-loop relation. Messages flow along incoming edges
(alive parents), averaged per relation, ReLU between layers and a linear
second layer. Backprop is manual so the value networks can train the
encoder end to end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nnsub import glorot_uniform
from .opset import N_OPERATIONS

STAT_DIM = 7
DEFAULT_DIMS = (STAT_DIM, 32, 64)


@dataclass(frozen=True)
class GraphSnapshot:
    """Alive subgraph in node-id order: stats rows, incoming relation ids
    (-1 for roots), and alive-parent positions per node."""

    stats: np.ndarray
    relations: np.ndarray
    parents: tuple

    @property
    def n_nodes(self) -> int:
        return self.stats.shape[0]


def squash_stats(stats) -> np.ndarray:
    """Bounded monotone compression, tanh(sign(x) * log1p(|x|) / 8).

    Derived columns can carry statistics of magnitude 1e20 and beyond;
    fed raw into the networks those overflow the backward pass, and at
    learning rate 0.01 anything much larger than O(1) diverges. The log
    keeps orders of magnitude distinguishable up to ~1e7 before the tanh
    saturates to +-1.
    """
    s = np.asarray(stats, dtype=float)
    return np.tanh(np.sign(s) * np.log1p(np.abs(s)) / 8.0)


def snapshot_from_roadmap(r) -> GraphSnapshot:
    alive = r.alive_nodes()
    pos = {n.id: k for k, n in enumerate(alive)}
    stats = squash_stats(np.stack([n.stats.as_vector() for n in alive]))
    relations = np.array(
        [-1 if n.is_root else n.op.id for n in alive], dtype=int
    )
    parents = tuple(
        tuple(pos[p] for p in n.parents if p in pos) for n in alive
    )
    stats.flags.writeable = False
    relations.flags.writeable = False
    return GraphSnapshot(stats=stats, relations=relations, parents=parents)


@dataclass
class RGCNParams:
    """layers[l][r]: weight for relation r at layer l; r == n_relations is
    the self-loop relation."""

    layers: list
    n_relations: int

    @classmethod
    def create(cls, rng: np.random.Generator, dims=DEFAULT_DIMS, n_relations=N_OPERATIONS):
        dims = list(dims)
        layers = []
        for d_in, d_out in zip(dims, dims[1:]):
            layers.append(
                [glorot_uniform(d_in, d_out, rng) for _ in range(n_relations + 1)]
            )
        return cls(layers=layers, n_relations=n_relations)

    @property
    def dims(self) -> tuple:
        return tuple(
            [self.layers[0][0].shape[0]] + [layer[0].shape[1] for layer in self.layers]
        )

    @property
    def out_dim(self) -> int:
        return self.layers[-1][0].shape[1]


def _message_operator(graph: GraphSnapshot) -> np.ndarray:
    """P with P[i, p] = 1/|parents(i)| for each alive parent p of node i."""
    m = graph.n_nodes
    p = np.zeros((m, m))
    for i, parents in enumerate(graph.parents):
        if parents:
            p[i, list(parents)] = 1.0 / len(parents)
    return p


def _rows_by_relation(graph: GraphSnapshot) -> list:
    out = {}
    for i, parents in enumerate(graph.parents):
        rel = int(graph.relations[i])
        if rel >= 0 and parents:
            out.setdefault(rel, []).append(i)
    return [(rel, np.array(rows)) for rel, rows in sorted(out.items())]


def rgcn_forward(graph, params: RGCNParams):
    """Returns (node embeddings, cache) for the alive subgraph."""
    if not isinstance(graph, GraphSnapshot):
        graph = snapshot_from_roadmap(graph)
    p = _message_operator(graph)
    rows_by_rel = _rows_by_relation(graph)
    self_idx = params.n_relations
    h = np.asarray(graph.stats, dtype=float)
    if h.shape[1] != params.dims[0]:
        raise ValueError(f"stat dim {h.shape[1]} does not match encoder {params.dims[0]}")
    last = len(params.layers) - 1
    inputs, msgs_all, pre = [], [], []
    for l, layer in enumerate(params.layers):
        msgs = p @ h
        z = h @ layer[self_idx]
        for rel, rows in rows_by_rel:
            z[rows] += msgs[rows] @ layer[rel]
        inputs.append(h)
        msgs_all.append(msgs)
        pre.append(z)
        h = z if l == last else np.maximum(z, 0.0)
    cache = (graph, p, rows_by_rel, inputs, msgs_all, pre)
    return h, cache


def rgcn_backward(params: RGCNParams, cache, d_out: np.ndarray):
    """Parameter gradients for a scalar loss, given d(loss)/d(embeddings)."""
    graph, p, rows_by_rel, inputs, msgs_all, pre = cache
    self_idx = params.n_relations
    grads = rgcn_zero_grads(params)
    last = len(params.layers) - 1
    da = np.asarray(d_out, dtype=float)
    for l in range(last, -1, -1):
        dz = da if l == last else da * (pre[l] > 0.0)
        layer = params.layers[l]
        h, msgs = inputs[l], msgs_all[l]
        grads[l][self_idx] += h.T @ dz
        dmsgs = np.zeros_like(msgs)
        for rel, rows in rows_by_rel:
            grads[l][rel] += msgs[rows].T @ dz[rows]
            dmsgs[rows] = dz[rows] @ layer[rel].T
        da = dz @ layer[self_idx].T + p.T @ dmsgs
    return grads


def rgcn_zero_grads(params: RGCNParams) -> list:
    return [[np.zeros_like(w) for w in layer] for layer in params.layers]


def rgcn_add_grads(acc, grads, scale: float = 1.0) -> None:
    for al, gl in zip(acc, grads):
        for aw, gw in zip(al, gl):
            aw += scale * gw


def rgcn_sgd_step(params: RGCNParams, grads, lr: float) -> None:
    for layer, gl in zip(params.layers, grads):
        for w, gw in zip(layer, gl):
            w -= lr * gw


# -- composite agent states ----------------------------------------------


@dataclass
class Encoder:
    """RGCN parameters plus a learned per-operation embedding table."""

    rgcn: RGCNParams
    op_table: np.ndarray

    @classmethod
    def create(cls, rng: np.random.Generator, dims=DEFAULT_DIMS, n_relations=N_OPERATIONS):
        rgcn = RGCNParams.create(rng, dims=dims, n_relations=n_relations)
        out = dims[-1]
        return cls(rgcn=rgcn, op_table=glorot_uniform(n_relations, out, rng))

    @property
    def out_dim(self) -> int:
        return self.rgcn.out_dim


@dataclass(frozen=True)
class StateSpec:
    """Mean-pool each position group, concatenate, append an operation
    embedding when op_id is set. Groups use snapshot row positions."""

    groups: tuple
    op_id: int | None = None


def cluster_rep(embeddings: np.ndarray, positions) -> np.ndarray:
    positions = list(positions)
    if not positions:
        raise ValueError("cannot pool an empty group")
    return embeddings[positions].mean(axis=0)


def op_rep(encoder: Encoder | None, op_id: int) -> np.ndarray:
    """Learned op embedding, or the one-hot fallback without an encoder."""
    if encoder is None:
        return op_one_hot_by_id(op_id)
    return encoder.op_table[op_id].copy()


def op_one_hot_by_id(op_id: int) -> np.ndarray:
    v = np.zeros(N_OPERATIONS)
    v[op_id] = 1.0
    return v


def state_forward(encoder: Encoder, graph: GraphSnapshot, spec: StateSpec):
    h, rcache = rgcn_forward(graph, encoder.rgcn)
    parts = [cluster_rep(h, g) for g in spec.groups]
    if spec.op_id is not None:
        parts.append(encoder.op_table[spec.op_id])
    cache = (graph, spec, rcache, h.shape)
    return np.concatenate(parts), cache


def state_backward(encoder: Encoder, cache, dx: np.ndarray):
    """Split dx back onto the pooled groups; returns (rgcn grads, op grads)."""
    graph, spec, rcache, h_shape = cache
    m, d = h_shape
    dh = np.zeros((m, d))
    offset = 0
    for g in spec.groups:
        seg = dx[offset : offset + d]
        dh[list(g)] += seg / len(g)
        offset += d
    op_grads = np.zeros_like(encoder.op_table)
    if spec.op_id is not None:
        op_grads[spec.op_id] = dx[offset : offset + d]
        offset += d
    if offset != dx.shape[0]:
        raise ValueError("dx length does not match the state layout")
    return rgcn_backward(encoder.rgcn, rcache, dh), op_grads


@dataclass
class EncoderGrads:
    rgcn: list
    op_table: np.ndarray


def encoder_zero_grads(encoder: Encoder) -> EncoderGrads:
    return EncoderGrads(
        rgcn=rgcn_zero_grads(encoder.rgcn), op_table=np.zeros_like(encoder.op_table)
    )


def encoder_add_grads(acc: EncoderGrads, rgcn_grads, op_grads, scale: float = 1.0) -> None:
    rgcn_add_grads(acc.rgcn, rgcn_grads, scale)
    acc.op_table += scale * op_grads


def encoder_sgd_step(encoder: Encoder, grads: EncoderGrads, lr: float) -> None:
    rgcn_sgd_step(encoder.rgcn, grads.rgcn, lr)
    encoder.op_table -= lr * grads.op_table
