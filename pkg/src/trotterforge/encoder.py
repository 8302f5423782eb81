"""Message-passing encoder over the commutator graph with attention pooling.

Four rounds of summed edge messages followed by a softmax-weighted readout
produce a fixed-size conditioning vector.  Sum aggregation plus shared
weights makes the encoding permutation invariant up to float associativity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .compiler import Policy
from .graph import HamiltonianGraph, build_graph
from .nn.layers import MLP, Dropout, LayerNorm, Linear, Module
from .nn.tensor import Tensor, concat, embedding, no_grad, softmax
from .pauli import Hamiltonian
from .streams import Stream

# Affine standardization of raw graph features; the log|c| channel is shifted
# out of its [-14, ~1] range so tanh layers stay unsaturated.
NODE_SHIFT = np.zeros(16)
NODE_SHIFT[0] = 14.0
NODE_SCALE = np.ones(16)
NODE_SCALE[0] = 1.0 / 14.0
NODE_SCALE[2] = 1.0 / 12.0
NODE_SCALE[3] = 1.0 / 12.0
EDGE_SCALE = np.array([0.5, 1.0 / 12.0, 1.0])

POLICY_EMBED_DIM = 19  # 8 size-histogram bins + 3 order counts + 8 sorted tau


@dataclass(frozen=True)
class GnnConfig:
    layers: int = 4
    hidden: int = 256
    out_dim: int = 512
    dropout: float = 0.1

    def __post_init__(self):
        if self.layers < 1 or self.hidden <= 0 or self.out_dim <= 0:
            raise ValueError("layers must be >= 1 and widths positive")


def standardize_graph(graph: HamiltonianGraph) -> tuple[np.ndarray, np.ndarray]:
    nodes = (graph.node_features + NODE_SHIFT) * NODE_SCALE
    edges = graph.edge_features * EDGE_SCALE
    return nodes, edges


class GnnEncoder(Module):
    def __init__(self, config: GnnConfig, stream: Stream):
        super().__init__()
        self.config = config
        s_in, s_msg, s_upd, s_attn, s_out, s_drop = stream.spawn(6)
        h = config.hidden
        self.input_proj = Linear(16, h, s_in)
        self.msg_mlps = [
            MLP([2 * h + 3, h, h], s, activation="tanh")
            for s in s_msg.spawn(config.layers)
        ]
        self.update_mlps = [
            MLP([2 * h, h, h], s, activation="tanh")
            for s in s_upd.spawn(config.layers)
        ]
        self.norms = [LayerNorm(h) for _ in range(config.layers)]
        self.dropouts = [
            Dropout(config.dropout, s) for s in s_drop.spawn(config.layers)
        ]
        self.attn_mlp = MLP([h, h, 1], s_attn, activation="tanh")
        self.output_proj = Linear(h, config.out_dim, s_out)

    def message_pass(
        self, states: Tensor, graph: HamiltonianGraph, edge_feats: np.ndarray, layer: int
    ) -> Tensor:
        """One round: summed neighbour messages, then the update MLP."""
        m = states.shape[0]
        if graph.edge_list:
            src = np.array([e for pair in graph.edge_list for e in pair])
            dst = np.array([e for pair in graph.edge_list for e in pair[::-1]])
            feats = np.repeat(edge_feats, 2, axis=0)
            # Gather endpoint states; receiver state is the first argument.
            h_dst = embedding(states, dst)
            h_src = embedding(states, src)
            raw = self.msg_mlps[layer](concat([h_dst, h_src, Tensor(feats)], axis=-1))
            scatter = np.zeros((m, len(dst)))
            scatter[dst, np.arange(len(dst))] = 1.0
            messages = Tensor(scatter) @ raw
        else:
            messages = Tensor(np.zeros((m, states.shape[1])))
        updated = self.update_mlps[layer](concat([states, messages], axis=-1))
        updated = self.norms[layer](updated)
        return self.dropouts[layer](updated)

    def attention_pool(self, states: Tensor) -> Tensor:
        scores = self.attn_mlp(states).reshape(1, states.shape[0])
        alpha = softmax(scores, axis=-1)
        return (alpha @ states).reshape(states.shape[1])

    def pooling_weights(self, states: Tensor) -> np.ndarray:
        scores = self.attn_mlp(states).reshape(1, states.shape[0])
        return softmax(scores, axis=-1).value[0]

    def forward_graph(self, graph: HamiltonianGraph) -> Tensor:
        nodes, edges = standardize_graph(graph)
        states = self.input_proj(Tensor(nodes))
        for layer in range(self.config.layers):
            states = self.message_pass(states, graph, edges, layer)
        pooled = self.attention_pool(states)
        return self.output_proj(pooled.reshape(1, -1)).reshape(-1)

    def encode(self, h: Hamiltonian) -> np.ndarray:
        """Deterministic conditioning vector (evaluation mode, no graph)."""
        was_training = self.training
        self.eval()
        try:
            with no_grad():
                return self.forward_graph(build_graph(h)).value.copy()
        finally:
            self.train(was_training)


def policy_embedding(policy: Policy) -> np.ndarray:
    """Fixed-size policy summary for the supervised fidelity head.

    Concatenates a normalized group-size histogram (8 bins, last bin
    collects sizes >= 8), order counts over {1, 2, 4} normalized by K, and
    tau sorted descending padded to 8 slots.
    """
    k = policy.num_groups
    sizes = np.bincount(np.asarray(policy.grouping), minlength=k)
    hist = np.zeros(8)
    for size in sizes:
        hist[min(size, 8) - 1] += 1.0
    hist /= k
    orders = np.array(
        [
            sum(1 for o in policy.orders if o == 1),
            sum(1 for o in policy.orders if o == 2),
            sum(1 for o in policy.orders if o == 4),
        ]
    ) / k
    tau = np.zeros(8)
    ordered = np.sort(np.asarray(policy.tau))[::-1][:8]
    tau[: len(ordered)] = ordered
    return np.concatenate([hist, orders, tau])


class FidelityHead(Module):
    """Conditioning vector + policy embedding -> predicted fidelity in (0, 1)."""

    def __init__(self, cond_dim: int, stream: Stream, hidden: int = 64):
        super().__init__()
        self.body = MLP([cond_dim + POLICY_EMBED_DIM, hidden, 1], stream, activation="tanh")

    def __call__(self, cond: Tensor, policy_emb: np.ndarray) -> Tensor:
        batch = cond.reshape(1, -1) if cond.ndim == 1 else cond
        emb = np.atleast_2d(policy_emb)
        raw = self.body(concat([batch, Tensor(emb)], axis=-1))
        return 1.0 / (1.0 + (-raw).exp())
