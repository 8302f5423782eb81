import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trotterforge.circuits import (
    CircuitIR,
    Gate,
    cnot_count,
    cx_gate,
    depth,
    h_gate,
    load_circuit,
    peephole,
    rz_gate,
    save_circuit,
    schedule_depth,
    x_gate,
)


def test_depth_ladder():
    c = CircuitIR(2, [cx_gate(0, 1), rz_gate(1, 0.7), cx_gate(0, 1)])
    assert depth(c) == 3
    assert cnot_count(c) == 2


def test_depth_empty():
    c = CircuitIR(2, [])
    assert depth(c) == 0
    assert cnot_count(c) == 0


def test_depth_parallel_single_qubit_gates():
    c = CircuitIR(2, [h_gate(0), h_gate(1)])
    assert depth(c) == 1


def test_peephole_cancels_adjacent_cx_pair():
    c = CircuitIR(2, [cx_gate(0, 1), cx_gate(0, 1)])
    assert len(peephole(c)) == 0
    assert depth(c) == 0


def test_peephole_respects_intervening_gate():
    c = CircuitIR(2, [cx_gate(0, 1), rz_gate(1, 0.3), cx_gate(0, 1)])
    assert len(peephole(c)) == 3


def test_peephole_drops_zero_rotation():
    c = CircuitIR(1, [rz_gate(0, 0.0), h_gate(0)])
    assert [g.kind for g in peephole(c).gates] == ["h"]


def test_peephole_cascades():
    c = CircuitIR(3, [cx_gate(0, 1), cx_gate(0, 1), cx_gate(0, 1), cx_gate(0, 1)])
    assert len(peephole(c)) == 0


def test_peephole_different_direction_not_cancelled():
    c = CircuitIR(2, [cx_gate(0, 1), cx_gate(1, 0)])
    assert len(peephole(c)) == 2


def test_cx_requires_distinct_qubits():
    with pytest.raises(ValueError):
        Gate("cx", (1, 1))


def test_qubit_range_checked():
    with pytest.raises(ValueError):
        CircuitIR(1, [cx_gate(0, 1)])


@st.composite
def random_circuits(draw):
    n = draw(st.integers(min_value=1, max_value=4))
    size = draw(st.integers(min_value=0, max_value=30))
    gates = []
    for _ in range(size):
        kind = draw(st.sampled_from(["h", "x", "rz", "cx"]))
        if kind == "cx" and n >= 2:
            a = draw(st.integers(min_value=0, max_value=n - 1))
            b = draw(st.integers(min_value=0, max_value=n - 1).filter(lambda q: q != a))
            gates.append(cx_gate(a, b))
        elif kind == "rz":
            q = draw(st.integers(min_value=0, max_value=n - 1))
            gates.append(rz_gate(q, draw(st.floats(min_value=-3, max_value=3))))
        else:
            q = draw(st.integers(min_value=0, max_value=n - 1))
            gates.append(h_gate(q) if kind == "h" else x_gate(q))
    return CircuitIR(n, gates)


@settings(max_examples=100)
@given(random_circuits(), st.data())
def test_removing_a_gate_never_increases_scheduled_depth(circuit, data):
    if not circuit.gates:
        return
    i = data.draw(st.integers(min_value=0, max_value=len(circuit.gates) - 1))
    pruned = circuit.gates[:i] + circuit.gates[i + 1 :]
    assert schedule_depth(pruned) <= schedule_depth(circuit.gates)


@settings(max_examples=50)
@given(random_circuits())
def test_depth_at_least_cnot_bound(circuit):
    # All CX gates touching one fixed qubit must serialize.
    c = peephole(circuit)
    per_qubit = {}
    for g in c.gates:
        if g.kind == "cx":
            for q in g.qubits:
                per_qubit[q] = per_qubit.get(q, 0) + 1
    bound = max(per_qubit.values(), default=0)
    assert schedule_depth(c.gates) >= bound


def test_circuit_json_roundtrip(tmp_path):
    c = CircuitIR(2, [h_gate(0), cx_gate(0, 1), rz_gate(1, 0.25)])
    path = tmp_path / "c.json"
    save_circuit(c, path)
    loaded = load_circuit(path)
    assert loaded.n == c.n
    assert loaded.gates == c.gates
