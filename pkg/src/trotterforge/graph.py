"""Commutator graph over Hamiltonian terms with fixed-width feature vectors.

Nodes carry 16 features: log-magnitude and sign of the coefficient, support
size, locality span, and a 12-slot per-qubit support mask (hence the n <= 12
cap).  Edges connect non-commuting pairs and carry the commutator norm, the
shared-qubit count, and a commutativity indicator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pauli import Hamiltonian, PauliString, PauliTerm, commutes

NODE_FEATURE_DIM = 16
EDGE_FEATURE_DIM = 3
MAX_GRAPH_QUBITS = 12


@dataclass
class HamiltonianGraph:
    node_features: np.ndarray  # (M, 16)
    edge_list: list[tuple[int, int]]  # j < k, non-commuting pairs only
    edge_features: np.ndarray  # (|E|, 3)

    def __post_init__(self):
        if self.node_features.shape[1] != NODE_FEATURE_DIM:
            raise ValueError("node features must be 16-wide")
        if self.edge_features.shape[1] != EDGE_FEATURE_DIM and len(self.edge_list):
            raise ValueError("edge features must be 3-wide")
        for j, k in self.edge_list:
            if j == k:
                raise ValueError("self-edges are not allowed")

    @property
    def num_nodes(self) -> int:
        return self.node_features.shape[0]


def node_features(term: PauliTerm, n: int) -> np.ndarray:
    """16-dim node vector; single-site and all-identity terms have locality 0."""
    if n > MAX_GRAPH_QUBITS:
        raise ValueError(f"node features support at most {MAX_GRAPH_QUBITS} qubits")
    support = term.string.support()
    locality = float(max(support) - min(support)) if len(support) > 1 else 0.0
    mask = np.zeros(MAX_GRAPH_QUBITS)
    for q in support:
        mask[q] = 1.0
    head = [
        np.log(abs(term.coeff) + 1e-6),
        np.sign(term.coeff),
        float(len(support)),
        locality,
    ]
    return np.concatenate([head, mask])


def edge_features(p: PauliString, q: PauliString) -> np.ndarray:
    """[2 * 1[non-commuting], |supp(P) & supp(Q)|, 1[commuting]]."""
    do_commute = commutes(p, q)
    shared = len(set(p.support()) & set(q.support()))
    return np.array(
        [0.0 if do_commute else 2.0, float(shared), 1.0 if do_commute else 0.0]
    )


def build_graph(h: Hamiltonian) -> HamiltonianGraph:
    """Edges are exactly the non-commuting term pairs; order follows the terms."""
    nodes = np.stack([node_features(term, h.n) for term in h.terms])
    edges: list[tuple[int, int]] = []
    feats: list[np.ndarray] = []
    for j in range(h.num_terms):
        for k in range(j + 1, h.num_terms):
            if not commutes(h.terms[j].string, h.terms[k].string):
                edges.append((j, k))
                feats.append(edge_features(h.terms[j].string, h.terms[k].string))
    edge_feats = (
        np.stack(feats) if feats else np.zeros((0, EDGE_FEATURE_DIM))
    )
    return HamiltonianGraph(nodes, edges, edge_feats)
