"""Pauli string algebra, Hamiltonian assembly, and sparse state application.

Pauli strings are stored as plain labels over ``{I, X, Y, Z}`` where the
character at position ``i`` acts on qubit ``i``.  Statevector indices use the
matching convention: bit ``q`` of a basis index is the state of qubit ``q``,
so ``|0...0>`` is index 0.

Two strings commute iff the number of positions where both letters are
non-identity and differ is even (the symplectic rule); for Pauli strings the
spectral norm of a nonzero commutator is always 2.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

PAULI_LETTERS = "IXYZ"


@dataclass(frozen=True)
class PauliString:
    """A tensor product of single-qubit Paulis, e.g. ``"XZIY"``.

    ``ops[i]`` is the letter acting on qubit ``i``.
    """

    ops: str

    def __post_init__(self):
        bad = set(self.ops) - set(PAULI_LETTERS)
        if bad:
            raise ValueError(f"invalid Pauli letters {sorted(bad)} in {self.ops!r}")
        if not self.ops:
            raise ValueError("empty Pauli string")

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self):
        return iter(self.ops)

    def support(self) -> tuple[int, ...]:
        """Qubits where the string acts non-trivially."""
        return tuple(q for q, op in enumerate(self.ops) if op != "I")

    def weight(self) -> int:
        return len(self.support())


@dataclass(frozen=True)
class PauliTerm:
    """A Pauli string with a real coefficient."""

    string: PauliString
    coeff: float

    def __post_init__(self):
        if not math.isfinite(self.coeff):
            raise ValueError(f"non-finite coefficient {self.coeff}")
        if self.coeff == 0.0:
            raise ValueError("zero-coefficient terms must be dropped")


@dataclass
class Hamiltonian:
    """A weighted sum of Pauli strings on ``n`` qubits with evolution time ``t``."""

    n: int
    terms: list[PauliTerm]
    t: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"need at least one qubit, got n={self.n}")
        if not self.terms:
            raise ValueError("Hamiltonian needs at least one term")
        if not (math.isfinite(self.t) and self.t > 0):
            raise ValueError(f"evolution time must be positive, got {self.t}")
        for term in self.terms:
            if len(term.string) != self.n:
                raise ValueError(
                    f"term {term.string.ops!r} has length {len(term.string)}, "
                    f"expected {self.n}"
                )

    @property
    def num_terms(self) -> int:
        return len(self.terms)


def commutes(p: PauliString, q: PauliString) -> bool:
    """Check whether two Pauli strings commute (symplectic rule).

    Counts positions where both letters are non-identity and different;
    the strings commute iff that count is even.

    Raises:
        ValueError: If the strings have different lengths.
    """
    if len(p) != len(q):
        raise ValueError(f"length mismatch: {len(p)} vs {len(q)}")
    anti = sum(1 for a, b in zip(p.ops, q.ops) if a != "I" and b != "I" and a != b)
    return anti % 2 == 0


def commutator_edge_weight(p: PauliString, q: PauliString) -> float:
    """Spectral norm of ``[P, Q]``: 2 for non-commuting Pauli strings, else 0."""
    return 0.0 if commutes(p, q) else 2.0


def _masks(string: PauliString) -> tuple[int, int, int]:
    """Return (x_mask, z_mask, y_count) for sparse application.

    ``x_mask`` has bit q set where the letter flips qubit q (X or Y);
    ``z_mask`` where it applies a sign (Z or Y).
    """
    xm = zm = ny = 0
    for q, op in enumerate(string.ops):
        if op in ("X", "Y"):
            xm |= 1 << q
        if op in ("Z", "Y"):
            zm |= 1 << q
        if op == "Y":
            ny += 1
    return xm, zm, ny


def _parity(values: np.ndarray) -> np.ndarray:
    """Bit parity of each entry of an integer array (vectorized fold)."""
    v = values.copy()
    for shift in (32, 16, 8, 4, 2, 1):
        v ^= v >> shift
    return v & 1


def apply_term(term: PauliTerm, state: np.ndarray) -> np.ndarray:
    """Apply ``coeff * P`` to a statevector without materializing a matrix.

    X flips the qubit's bit, Z applies a sign, Y does both with a +/- i phase.
    Runs in O(2^n) time and memory.

    Raises:
        ValueError: If the state dimension is not 2**len(P).
    """
    n = len(term.string)
    state = np.asarray(state, dtype=complex)
    if state.shape != (2**n,):
        raise ValueError(f"state has shape {state.shape}, expected ({2**n},)")
    xm, zm, ny = _masks(term.string)
    idx = np.arange(2**n, dtype=np.int64)
    phase = (1j**ny) * np.where(_parity(idx & zm) == 1, -1.0, 1.0)
    out = np.empty_like(state)
    out[idx ^ xm] = term.coeff * phase * state
    return out


def apply_hamiltonian(h: Hamiltonian, state: np.ndarray) -> np.ndarray:
    """Apply ``H = sum_j c_j P_j`` to a statevector (sum of sparse term actions)."""
    state = np.asarray(state, dtype=complex)
    if state.shape != (2**h.n,):
        raise ValueError(f"state has shape {state.shape}, expected ({2**h.n},)")
    out = np.zeros_like(state)
    for term in h.terms:
        out += apply_term(term, state)
    return out


def _ring_edges(n: int) -> list[tuple[int, int]]:
    """Nearest-neighbour edges of a periodic chain; duplicates collapsed.

    For n=2 the edges (0,1) and (1,0) coincide, so a single edge is kept.
    """
    edges = []
    seen = set()
    for i in range(n):
        edge = tuple(sorted((i, (i + 1) % n)))
        if edge not in seen:
            seen.add(edge)
            edges.append(edge)
    return edges


def _two_site_string(n: int, i: int, j: int, letter: str) -> PauliString:
    ops = ["I"] * n
    ops[i] = letter
    ops[j] = letter
    return PauliString("".join(ops))


def _one_site_string(n: int, i: int, letter: str) -> PauliString:
    ops = ["I"] * n
    ops[i] = letter
    return PauliString("".join(ops))


def build_tfim(n: int, J: float, h: float, t: float) -> Hamiltonian:
    """Transverse-field Ising chain ``H = -J sum ZZ - h sum X`` (periodic).

    Produces n ZZ terms and n X terms (2n total) for n >= 3; at n=2 the two
    periodic edges coincide and collapse to a single ZZ term with
    coefficient -J.
    """
    if n < 2:
        raise ValueError(f"TFIM needs n >= 2, got {n}")
    if J <= 0 or h <= 0:
        raise ValueError("couplings J and h must be positive")
    terms = [PauliTerm(_two_site_string(n, i, j, "Z"), -J) for i, j in _ring_edges(n)]
    terms += [PauliTerm(_one_site_string(n, i, "X"), -h) for i in range(n)]
    return Hamiltonian(n, terms, t)


def build_heisenberg(
    n: int, Jx: float, Jy: float, Jz: float, t: float
) -> Hamiltonian:
    """Heisenberg chain ``H = -sum_edges (Jx XX + Jy YY + Jz ZZ)`` (periodic).

    3n terms for n >= 3; at n=2 the duplicate periodic edge collapses,
    giving 3 terms.
    """
    if n < 2:
        raise ValueError(f"Heisenberg chain needs n >= 2, got {n}")
    edges = _ring_edges(n)
    terms = []
    for letter, coupling in (("X", Jx), ("Y", Jy), ("Z", Jz)):
        for i, j in edges:
            terms.append(PauliTerm(_two_site_string(n, i, j, letter), -coupling))
    return Hamiltonian(n, terms, t)


def l1_coefficient_norm(h: Hamiltonian) -> float:
    """``sum_j |c_j|``; a cheap upper bound on the spectral norm of H."""
    if not h.terms:
        raise ValueError("Hamiltonian has no terms")
    return float(sum(abs(term.coeff) for term in h.terms))


def hamiltonian_to_dict(h: Hamiltonian) -> dict:
    return {
        "n": h.n,
        "t": h.t,
        "terms": [{"pauli": term.string.ops, "coeff": term.coeff} for term in h.terms],
    }


def hamiltonian_from_dict(data: dict) -> Hamiltonian:
    try:
        n = int(data["n"])
        t = float(data["t"])
        raw_terms = data["terms"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed Hamiltonian record: {exc}") from exc
    terms = []
    for entry in raw_terms:
        try:
            string = PauliString(str(entry["pauli"]))
            coeff = float(entry["coeff"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed term record {entry!r}: {exc}") from exc
        terms.append(PauliTerm(string, coeff))
    return Hamiltonian(n, terms, t)


def save_hamiltonian(h: Hamiltonian, path) -> None:
    """Write a Hamiltonian as one JSON object (UTF-8)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(hamiltonian_to_dict(h), fh, indent=2)
        fh.write("\n")


def load_hamiltonian(path) -> Hamiltonian:
    """Load a Hamiltonian JSON file; validates letters, lengths, and time."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"not valid JSON: {path}") from exc
    return hamiltonian_from_dict(data)
