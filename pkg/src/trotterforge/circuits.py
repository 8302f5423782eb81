"""Gate-level circuit IR in the basis {H, CX, Rz, X} with cost accounting.

Depth is the length of the longest dependency chain under the rule that gates
sharing a qubit execute in order (greedy per-qubit frontier scheduling).
Before counting, a light peephole pass removes adjacent mutually-inverse CX
pairs and Rz(0) gates; nothing else is rewritten.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

GATE_KINDS = ("h", "cx", "rz", "x")

_RZ_ZERO_TOL = 1e-12


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    angle: float = 0.0

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.kind == "cx":
            if len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]:
                raise ValueError(f"cx needs two distinct qubits, got {self.qubits}")
        elif len(self.qubits) != 1:
            raise ValueError(f"{self.kind} acts on one qubit, got {self.qubits}")
        if not math.isfinite(self.angle):
            raise ValueError(f"non-finite angle {self.angle}")


def h_gate(q: int) -> Gate:
    return Gate("h", (q,))


def x_gate(q: int) -> Gate:
    return Gate("x", (q,))


def rz_gate(q: int, angle: float) -> Gate:
    return Gate("rz", (q,), angle)


def cx_gate(control: int, target: int) -> Gate:
    return Gate("cx", (control, target))


@dataclass
class CircuitIR:
    n: int
    gates: list[Gate] = field(default_factory=list)

    def __post_init__(self):
        for gate in self.gates:
            if any(q < 0 or q >= self.n for q in gate.qubits):
                raise ValueError(f"gate {gate} outside qubit range [0, {self.n})")

    def __len__(self) -> int:
        return len(self.gates)


def peephole(circuit: CircuitIR) -> CircuitIR:
    """Cancel adjacent inverse CX pairs and drop Rz(0); single linear pass.

    Two CX gates cancel when they are identical and no intervening gate
    touches either of their qubits.
    """
    kept: list[Gate] = []
    last_on_qubit: dict[int, int] = {}
    for gate in circuit.gates:
        if gate.kind == "rz" and abs(gate.angle) < _RZ_ZERO_TOL:
            continue
        if gate.kind == "cx":
            prev = last_on_qubit.get(gate.qubits[0], -1)
            if (
                prev >= 0
                and prev == last_on_qubit.get(gate.qubits[1], -2)
                and kept[prev] is not None
                and kept[prev] == gate
            ):
                kept[prev] = None
                for q in gate.qubits:
                    del last_on_qubit[q]
                continue
        kept.append(gate)
        for q in gate.qubits:
            last_on_qubit[q] = len(kept) - 1
    return CircuitIR(circuit.n, [g for g in kept if g is not None])


def schedule_depth(gates: list[Gate]) -> int:
    """ASAP depth: per-qubit frontier, each gate at 1 + max over its qubits."""
    frontier: dict[int, int] = {}
    depth = 0
    for gate in gates:
        level = 1 + max((frontier.get(q, 0) for q in gate.qubits), default=0)
        for q in gate.qubits:
            frontier[q] = level
        depth = max(depth, level)
    return depth


def depth(circuit: CircuitIR) -> int:
    """Scheduled depth after the peephole pass."""
    return schedule_depth(peephole(circuit).gates)


def cnot_count(circuit: CircuitIR) -> int:
    """Number of CX gates after the peephole pass."""
    return sum(1 for g in peephole(circuit).gates if g.kind == "cx")


def circuit_to_dict(circuit: CircuitIR) -> dict:
    gates = []
    for g in circuit.gates:
        entry: dict = {"kind": g.kind, "qubits": list(g.qubits)}
        if g.kind == "rz":
            entry["angle"] = g.angle
        gates.append(entry)
    return {"n": circuit.n, "gates": gates}


def save_circuit(circuit: CircuitIR, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(circuit_to_dict(circuit), fh)
        fh.write("\n")


def load_circuit(path) -> CircuitIR:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    gates = [
        Gate(e["kind"], tuple(e["qubits"]), float(e.get("angle", 0.0)))
        for e in data["gates"]
    ]
    return CircuitIR(int(data["n"]), gates)
