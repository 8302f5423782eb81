import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trotterforge.pauli import (
    Hamiltonian,
    PauliString,
    PauliTerm,
    apply_hamiltonian,
    apply_term,
    build_heisenberg,
    build_tfim,
    commutator_edge_weight,
    commutes,
    hamiltonian_to_dict,
    l1_coefficient_norm,
    load_hamiltonian,
    save_hamiltonian,
)

from oracles import dense_commutator_norm, dense_commutes, dense_hamiltonian, dense_pauli

pauli_strings = st.text(alphabet="IXYZ", min_size=1, max_size=6)


def test_commutes_identity_with_anything():
    assert commutes(PauliString("II"), PauliString("XY"))


def test_commutes_matches_dense_oracle_on_all_two_qubit_pairs():
    labels = ["".join(p) for p in itertools.product("IXYZ", repeat=2)]
    for a in labels:
        for b in labels:
            assert commutes(PauliString(a), PauliString(b)) == dense_commutes(a, b), (a, b)


def test_commutes_known_cases():
    assert not commutes(PauliString("XI"), PauliString("ZI"))
    assert commutes(PauliString("XX"), PauliString("YY"))


def test_commutes_length_mismatch():
    with pytest.raises(ValueError):
        commutes(PauliString("X"), PauliString("XX"))


@settings(max_examples=200)
@given(st.data())
def test_commutes_matches_dense_oracle_random(data):
    n = data.draw(st.integers(min_value=1, max_value=4))
    a = data.draw(st.text(alphabet="IXYZ", min_size=n, max_size=n))
    b = data.draw(st.text(alphabet="IXYZ", min_size=n, max_size=n))
    assert commutes(PauliString(a), PauliString(b)) == dense_commutes(a, b)


def test_edge_weight_values():
    assert commutator_edge_weight(PauliString("XI"), PauliString("ZI")) == 2.0
    assert commutator_edge_weight(PauliString("II"), PauliString("ZZ")) == 0.0
    p = PauliString("XYZ")
    assert commutator_edge_weight(p, p) == 0.0


@settings(max_examples=100)
@given(st.data())
def test_edge_weight_matches_dense_norm(data):
    n = data.draw(st.integers(min_value=1, max_value=3))
    a = data.draw(st.text(alphabet="IXYZ", min_size=n, max_size=n))
    b = data.draw(st.text(alphabet="IXYZ", min_size=n, max_size=n))
    w = commutator_edge_weight(PauliString(a), PauliString(b))
    assert w == pytest.approx(dense_commutator_norm(a, b), abs=1e-12)


def test_apply_term_z_eigenstate():
    state = np.array([1.0, 0.0], dtype=complex)
    out = apply_term(PauliTerm(PauliString("Z"), 1.0), state)
    np.testing.assert_allclose(out, state)


def test_apply_term_bit_flip():
    state = np.array([1.0, 0.0], dtype=complex)
    out = apply_term(PauliTerm(PauliString("X"), 1.0), state)
    np.testing.assert_allclose(out, [0.0, 1.0])


def test_apply_term_y_phase():
    state = np.array([1.0, 0.0], dtype=complex)
    out = apply_term(PauliTerm(PauliString("Y"), 0.5), state)
    np.testing.assert_allclose(out, [0.0, 0.5j])


def test_apply_term_dimension_mismatch():
    with pytest.raises(ValueError):
        apply_term(PauliTerm(PauliString("XX"), 1.0), np.ones(2, dtype=complex))


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_apply_term_matches_dense_matvec(data):
    n = data.draw(st.integers(min_value=1, max_value=4))
    label = data.draw(st.text(alphabet="IXYZ", min_size=n, max_size=n))
    coeff = data.draw(
        st.floats(min_value=-2, max_value=2).filter(lambda c: abs(c) > 1e-3)
    )
    seed = data.draw(st.integers(min_value=0, max_value=2**31))
    rng = np.random.default_rng(seed)
    state = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    got = apply_term(PauliTerm(PauliString(label), coeff), state)
    want = coeff * dense_pauli(label) @ state
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_apply_hamiltonian_single_z():
    h = Hamiltonian(1, [PauliTerm(PauliString("Z"), 1.0)], 1.0)
    state = np.array([0.0, 1.0], dtype=complex)
    np.testing.assert_allclose(apply_hamiltonian(h, state), [0.0, -1.0])


def test_apply_hamiltonian_linearity_on_zero():
    h = build_tfim(3, 1.0, 0.5, 1.0)
    out = apply_hamiltonian(h, np.zeros(8, dtype=complex))
    np.testing.assert_allclose(out, 0.0)


def test_apply_hamiltonian_matches_dense_tfim():
    h = build_tfim(2, 1.0, 0.5, 1.0)
    state = np.zeros(4, dtype=complex)
    state[0] = 1.0
    dense = dense_hamiltonian([(t.string.ops, t.coeff) for t in h.terms])
    np.testing.assert_allclose(apply_hamiltonian(h, state), dense @ state, atol=1e-12)


def test_apply_hamiltonian_matches_dense_random():
    rng = np.random.default_rng(7)
    for n in (2, 3, 4):
        h = build_tfim(n, 1.3, 0.4, 1.0)
        dense = dense_hamiltonian([(t.string.ops, t.coeff) for t in h.terms])
        state = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
        np.testing.assert_allclose(
            apply_hamiltonian(h, state), dense @ state, atol=1e-12
        )


def test_tfim_term_count():
    assert build_tfim(4, 1.0, 0.5, 1.0).num_terms == 8
    assert build_tfim(6, 1.0, 0.5, 1.0).num_terms == 12


def test_tfim_n2_collapses_duplicate_edge():
    h = build_tfim(2, 1.0, 0.5, 1.0)
    labels = [(t.string.ops, t.coeff) for t in h.terms]
    assert labels == [("ZZ", -1.0), ("XI", -0.5), ("IX", -0.5)]


def test_tfim_coefficients_finite_nonzero():
    h = build_tfim(5, 0.7, 0.2, 2.0)
    for term in h.terms:
        assert np.isfinite(term.coeff) and term.coeff != 0.0


def test_tfim_rejects_small_n():
    with pytest.raises(ValueError):
        build_tfim(1, 1.0, 0.5, 1.0)


def test_heisenberg_term_count_and_signs():
    h = build_heisenberg(4, 0.5, 0.7, 0.9, 1.0)
    assert h.num_terms == 12
    for term in h.terms:
        assert term.coeff < 0


def test_heisenberg_isotropic_matches_formula():
    h = build_heisenberg(3, 1.2, 1.2, 1.2, 1.0)
    dense = dense_hamiltonian([(t.string.ops, t.coeff) for t in h.terms])
    explicit = []
    for i in range(3):
        j = (i + 1) % 3
        for letter in "XYZ":
            ops = ["I"] * 3
            ops[i] = letter
            ops[j] = letter
            explicit.append(("".join(ops), -1.2))
    np.testing.assert_allclose(dense, dense_hamiltonian(explicit), atol=1e-12)


def test_term_permutations_describe_same_operator():
    rng = np.random.default_rng(3)
    h = build_tfim(3, 1.0, 0.5, 1.0)
    base = dense_hamiltonian([(t.string.ops, t.coeff) for t in h.terms])
    for _ in range(5):
        perm = rng.permutation(h.num_terms)
        shuffled = [h.terms[i] for i in perm]
        dense = dense_hamiltonian([(t.string.ops, t.coeff) for t in shuffled])
        np.testing.assert_allclose(dense, base, atol=1e-12)


def test_l1_norm():
    single = Hamiltonian(1, [PauliTerm(PauliString("X"), 0.5)], 1.0)
    assert l1_coefficient_norm(single) == 0.5
    assert l1_coefficient_norm(build_tfim(2, 1.0, 0.5, 1.0)) == pytest.approx(2.0)


def test_hamiltonian_requires_terms():
    with pytest.raises(ValueError):
        Hamiltonian(2, [], 1.0)


def test_hamiltonian_requires_positive_time():
    with pytest.raises(ValueError):
        Hamiltonian(1, [PauliTerm(PauliString("X"), 1.0)], 0.0)


def test_zero_coefficient_rejected():
    with pytest.raises(ValueError):
        PauliTerm(PauliString("X"), 0.0)


def test_roundtrip_tfim(tmp_path):
    h = build_tfim(4, 1.3, 0.25, 2.0)
    path = tmp_path / "h.json"
    save_hamiltonian(h, path)
    loaded = load_hamiltonian(path)
    assert hamiltonian_to_dict(loaded) == hamiltonian_to_dict(h)


def test_load_rejects_length_mismatch(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(
        json.dumps({"n": 2, "t": 1.0, "terms": [{"pauli": "XXX", "coeff": 1.0}]})
    )
    with pytest.raises(ValueError):
        load_hamiltonian(path)


def test_load_rejects_unknown_letter(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(
        json.dumps({"n": 1, "t": 1.0, "terms": [{"pauli": "W", "coeff": 1.0}]})
    )
    with pytest.raises(ValueError):
        load_hamiltonian(path)


def test_load_rejects_malformed_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ValueError):
        load_hamiltonian(path)
