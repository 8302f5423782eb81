"""Corpus generation: labeled TFIM rows and the Heisenberg stress set.

Every row embeds a Hamiltonian, a randomly drawn policy, and exact labels
(fidelity from dense evolution, depth from the compiled circuit).  Rows are
generated from per-row child streams, so corpora replay bit-exactly from one
seed regardless of chunking.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .circuits import depth
from .compiler import Policy, compile_policy, normalize_policy, policy_from_dict, policy_to_dict
from .exact import policy_fidelity
from .pauli import (
    Hamiltonian,
    build_heisenberg,
    build_tfim,
    hamiltonian_from_dict,
    hamiltonian_to_dict,
)
from .streams import Stream

QUBIT_MIX = (4, 6, 8)
QUBIT_RATIO = (6, 3, 1)
J_RANGE = (0.5, 2.0)
H_RANGE = (0.1, 0.5)
HEISENBERG_RANGE = (0.2, 2.0)
EVOLUTION_TIME = 2.0
MAX_GROUPS = 6


@dataclass
class CorpusRow:
    hamiltonian: Hamiltonian
    policy: Policy
    fidelity: float
    depth: int

    def __post_init__(self):
        if not 0.0 <= self.fidelity <= 1.0 + 1e-12:
            raise ValueError(f"fidelity label {self.fidelity} outside [0, 1]")


def _split_counts(count: int, ratio: tuple[int, ...]) -> list[int]:
    total = sum(ratio)
    if count * min(ratio) < total:
        raise ValueError(
            f"count={count} cannot represent the {':'.join(map(str, ratio))} mix"
        )
    quotas = [count * r / total for r in ratio]
    base = [int(math.floor(q)) for q in quotas]
    remainder = count - sum(base)
    order = sorted(range(len(ratio)), key=lambda i: quotas[i] - base[i], reverse=True)
    for i in order[:remainder]:
        base[i] += 1
    return base


def log_uniform(stream: Stream, low: float, high: float) -> float:
    return float(np.exp(stream.uniform(np.log(low), np.log(high))))


def random_policy(num_terms: int, stream: Stream, max_groups: int = MAX_GROUPS) -> Policy:
    """Policy prior: K ~ U{1..min(M, max_groups)}, uniform grouping and
    orders, flat-Dirichlet time weights."""
    k = int(stream.integers(1, min(num_terms, max_groups) + 1))
    grouping = stream.integers(0, k, size=num_terms)
    orders = stream.choice([1, 2, 4], size=k)
    tau = stream.dirichlet(np.ones(k))
    return normalize_policy(grouping, orders, tau)


def _label_row(h: Hamiltonian, policy: Policy) -> CorpusRow:
    circuit = compile_policy(h, policy)
    return CorpusRow(h, policy, policy_fidelity(h, policy), depth(circuit))


def gen_tfim_corpus(
    count: int,
    seed: int,
    qubit_choices: tuple[int, ...] = QUBIT_MIX,
    t: float = EVOLUTION_TIME,
) -> list[CorpusRow]:
    """Labeled TFIM corpus: n mixed 6:3:1 over (4, 6, 8), J log-uniform on
    [0.5, 2.0], h log-uniform on [0.1, 0.5], fixed evolution time."""
    if qubit_choices == QUBIT_MIX:
        counts = _split_counts(count, QUBIT_RATIO)
    else:
        counts = _split_counts(count, QUBIT_RATIO[: len(qubit_choices)])
    root = Stream(seed)
    rows: list[CorpusRow] = []
    plan = [n for n, c in zip(qubit_choices, counts) for _ in range(c)]
    for n, stream in zip(plan, root.spawn(len(plan))):
        J = log_uniform(stream, *J_RANGE)
        hfield = log_uniform(stream, *H_RANGE)
        h = build_tfim(n, J, hfield, t)
        policy = random_policy(h.num_terms, stream)
        rows.append(_label_row(h, policy))
    return rows


def gen_heisenberg_set(
    per_n: int = 50, seed: int = 0, qubit_choices: tuple[int, ...] = QUBIT_MIX
) -> list[Hamiltonian]:
    """Heisenberg stress instances: coupling triples uniform on [0.2, 2.0],
    periodic chains, per_n instances per qubit count."""
    root = Stream(seed)
    out: list[Hamiltonian] = []
    plan = [n for n in qubit_choices for _ in range(per_n)]
    for n, stream in zip(plan, root.spawn(len(plan))):
        jx, jy, jz = stream.uniform(*HEISENBERG_RANGE, size=3)
        out.append(build_heisenberg(n, float(jx), float(jy), float(jz), EVOLUTION_TIME))
    return out


def row_to_dict(row: CorpusRow) -> dict:
    return {
        "hamiltonian": hamiltonian_to_dict(row.hamiltonian),
        "policy": policy_to_dict(row.policy),
        "fidelity": row.fidelity,
        "depth": row.depth,
    }


def row_from_dict(data: dict) -> CorpusRow:
    return CorpusRow(
        hamiltonian_from_dict(data["hamiltonian"]),
        policy_from_dict(data["policy"]),
        float(data["fidelity"]),
        int(data["depth"]),
    )


def save_corpus(rows: list[CorpusRow], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row_to_dict(row)))
            fh.write("\n")


def load_corpus(path) -> list[CorpusRow]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(row_from_dict(json.loads(line)))
    return rows
