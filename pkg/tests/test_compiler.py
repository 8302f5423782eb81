import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trotterforge.circuits import cnot_count, depth
from trotterforge.compiler import (
    Policy,
    compile_policy,
    compile_segments,
    compile_uniform_baseline,
    compile_with_tau_info,
    load_policy,
    normalize_policy,
    operator_error,
    pauli_exponential,
    policy_to_dict,
    save_policy,
    uniform_baseline_policy,
)
from trotterforge.pauli import Hamiltonian, PauliString, PauliTerm, build_tfim

from oracles import circuit_matrix, dense_evolution, dense_expm, dense_pauli


def test_normalize_drops_empty_group_and_renormalizes():
    policy = normalize_policy([0, 0, 2, 2], [1, 2, 4], [0.5, 0.2, 0.3])
    assert policy.num_groups == 2
    assert policy.orders == (1, 4)
    assert policy.tau == pytest.approx((0.625, 0.375))
    assert policy.grouping == (0, 0, 1, 1)


def test_normalize_is_idempotent_on_valid_policy():
    policy = normalize_policy([0, 1, 0], [2, 4], [0.25, 0.75])
    again = normalize_policy(policy.grouping, policy.orders, policy.tau)
    assert again == policy


def test_normalize_snaps_orders_with_tie_down():
    policy = normalize_policy([0], [3], [1.0])
    assert policy.orders == (2,)
    assert normalize_policy([0], [1.4], [1.0]).orders == (1,)
    assert normalize_policy([0], [5.0], [1.0]).orders == (4,)


def test_normalize_rejects_all_zero_tau():
    with pytest.raises(ValueError):
        normalize_policy([0, 1], [1, 1], [0.0, -0.5])


def test_normalize_clips_negative_tau():
    policy = normalize_policy([0, 1], [1, 1], [-1.0, 0.5])
    assert policy.tau == pytest.approx((0.0, 1.0))


def test_policy_validate_rejects_bad_orders():
    with pytest.raises(ValueError):
        Policy((0,), (3,), (1.0,)).validate()


def test_pauli_exponential_zz_ladder():
    gates = pauli_exponential(PauliString("ZZ"), 0.3)
    kinds = [g.kind for g in gates]
    assert kinds == ["cx", "rz", "cx"]
    assert gates[1].angle == pytest.approx(0.6)


def test_pauli_exponential_single_x():
    gates = pauli_exponential(PauliString("X"), 0.4)
    assert [g.kind for g in gates] == ["h", "rz", "h"]


def test_pauli_exponential_identity_empty():
    assert pauli_exponential(PauliString("II"), 0.7) == []


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_pauli_exponential_matches_dense_exponential(data):
    n = data.draw(st.integers(min_value=1, max_value=3))
    label = data.draw(st.text(alphabet="IXYZ", min_size=n, max_size=n))
    theta = data.draw(st.floats(min_value=-2.0, max_value=2.0))
    gates = pauli_exponential(PauliString(label), theta)
    got = circuit_matrix(gates, n)
    want = dense_expm(-1j * theta * dense_pauli(label))
    if label == "I" * n:
        # Identity strings compile to nothing; exp(-i theta I) is a phase.
        want = np.eye(2**n, dtype=complex)
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_commuting_hamiltonian_single_block_is_exact():
    terms = [
        PauliTerm(PauliString("ZZ"), 0.7),
        PauliTerm(PauliString("ZI"), -0.4),
        PauliTerm(PauliString("IZ"), 0.2),
    ]
    h = Hamiltonian(2, terms, 1.3)
    policy = Policy((0, 0, 0), (1,), (1.0,))
    circuit = compile_policy(h, policy)
    got = circuit_matrix(circuit.gates, 2)
    want = dense_evolution([(t.string.ops, t.coeff) for t in terms], 1.3)
    # Global phase free: align on the largest entry.
    k = np.unravel_index(np.argmax(abs(want)), want.shape)
    got = got * (want[k] / got[k])
    np.testing.assert_allclose(got, want, atol=1e-10)


def test_single_segment_policy_is_plain_product_formula():
    h = build_tfim(2, 1.0, 0.5, 0.3)
    policy = Policy(tuple(range(h.num_terms)), (2,) * h.num_terms, (1.0 / h.num_terms,) * h.num_terms)
    # K groups -> K segments; compare against one-per-term uniform baseline
    # compiled segment by segment.
    segments = compile_segments(h, policy)
    assert len(segments) == h.num_terms
    full = compile_policy(h, policy)
    assert sum(len(s) for s in segments) == len(full)


def test_second_order_segment_error_scales_cubically():
    base = build_tfim(2, 1.0, 0.5, 1.0)
    errors = []
    for t in (0.2, 0.1):
        h = Hamiltonian(base.n, base.terms, t)
        # Single segment, one term per block: isolates one S2 step.
        policy = uniform_baseline_policy(h, 2)
        errors.append(operator_error(h, compile_policy(h, policy), t))
    assert errors[0] / errors[1] == pytest.approx(8.0, rel=0.35)


def test_operator_error_zero_for_exact_circuit():
    terms = [PauliTerm(PauliString("Z"), 1.0)]
    h = Hamiltonian(1, terms, 0.9)
    policy = Policy((0,), (1,), (1.0,))
    circuit = compile_policy(h, policy)
    assert operator_error(h, circuit, 0.9) < 1e-10


def test_operator_error_ignores_global_sign():
    # exp(-i pi Z) = -I differs from the empty circuit only by phase.
    h = Hamiltonian(1, [PauliTerm(PauliString("Z"), 1.0)], math.pi)
    policy = Policy((0,), (1,), (1.0,))
    circuit = compile_policy(h, policy)
    assert operator_error(h, circuit, math.pi) < 1e-9


def test_first_order_error_ratio_four_when_time_doubles():
    h1 = build_tfim(2, 1.0, 0.5, 0.1)
    h2 = build_tfim(2, 1.0, 0.5, 0.2)
    policy1 = uniform_baseline_policy(h1, 1)
    single1 = Policy(tuple(0 for _ in h1.terms), (1,), (1.0,))
    err1 = operator_error(h1, compile_policy(h1, single1), 0.1)
    err2 = operator_error(h2, compile_policy(h2, single1), 0.2)
    assert err2 / err1 == pytest.approx(4.0, rel=0.25)


def test_error_decreases_under_segment_refinement():
    h = build_tfim(2, 1.0, 0.5, 1.0)
    errors = [
        operator_error(h, compile_uniform_baseline(h, 1, reps), h.t)
        for reps in (1, 2, 4)
    ]
    assert errors[0] > errors[1] > errors[2]


@pytest.mark.parametrize("order,expected_slope,tol", [(1, 2.0, 0.3), (2, 3.0, 0.3), (4, 5.0, 0.5)])
def test_order_scaling_slopes(order, expected_slope, tol):
    base = build_tfim(3, 1.0, 0.5, 1.0)
    ts = np.geomspace(0.05, 0.4, 6)
    errs = []
    for t in ts:
        h = Hamiltonian(base.n, base.terms, float(t))
        policy = uniform_baseline_policy(h, order)
        errs.append(operator_error(h, compile_policy(h, policy), float(t)))
    slope = np.polyfit(np.log(ts), np.log(errs), 1)[0]
    assert abs(slope - expected_slope) < tol


def test_uniform_baseline_reps_refinement():
    h = build_tfim(2, 1.0, 0.5, 1.0)
    err1 = operator_error(h, compile_uniform_baseline(h, 2, 1), h.t)
    err2 = operator_error(h, compile_uniform_baseline(h, 2, 2), h.t)
    assert err2 < err1


def test_compile_with_tau_info_marks_match_angles():
    h = build_tfim(2, 1.0, 0.5, 0.7)
    policy = normalize_policy([0, 1, 0], [2, 4], [0.3, 0.7])
    circuit, info = compile_with_tau_info(h, policy)
    assert info, "expected tau-sensitive rotations"
    for mark in info:
        gate = circuit.gates[mark.gate_index]
        assert gate.kind == "rz"
        assert gate.angle == pytest.approx(mark.coeff * policy.tau[mark.segment])


def test_compile_with_tau_info_covers_y_strings():
    h = Hamiltonian(
        2,
        [PauliTerm(PauliString("YY"), 0.5), PauliTerm(PauliString("XI"), 0.25)],
        1.0,
    )
    policy = normalize_policy([0, 1], [1, 1], [0.5, 0.5])
    circuit, info = compile_with_tau_info(h, policy)
    # One tau-carrying rotation per term application (2 terms x 2 segments);
    # Y basis changes carry fixed +-pi/2 angles and are excluded.
    assert len(info) == 4
    for mark in info:
        assert circuit.gates[mark.gate_index].angle == pytest.approx(
            mark.coeff * policy.tau[mark.segment]
        )


def test_policy_json_roundtrip(tmp_path):
    policy = normalize_policy([0, 1, 1, 0], [1, 4], [0.4, 0.6])
    path = tmp_path / "p.json"
    save_policy(policy, path)
    assert load_policy(path) == policy


def test_depth_and_cnots_of_known_ladder():
    h = Hamiltonian(2, [PauliTerm(PauliString("ZZ"), 1.0)], 1.0)
    policy = Policy((0,), (1,), (1.0,))
    circuit = compile_policy(h, policy)
    assert depth(circuit) == 3
    assert cnot_count(circuit) == 2
