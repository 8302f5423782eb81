"""Exact small-n references: dense evolution, circuit execution, fidelity,
analytic tau gradients, and gate-noise survival accounting.

Dense paths are capped at n <= 10 qubits.  The default initial state is
|0...0>.  Fidelity and operator-error metrics are global-phase invariant by
construction so gate phase conventions cannot leak into results.
"""

from __future__ import annotations

import math

import numpy as np

from .circuits import CircuitIR, Gate
from .compiler import Policy, compile_policy, compile_segments, compile_with_tau_info
from .pauli import Hamiltonian, _masks, _parity

DENSE_QUBIT_LIMIT = 10

_SQRT_HALF = 1.0 / math.sqrt(2.0)


def zero_state(n: int) -> np.ndarray:
    state = np.zeros(2**n, dtype=complex)
    state[0] = 1.0
    return state


def dense_matrix(h: Hamiltonian) -> np.ndarray:
    """Assemble the dense Hamiltonian matrix from the sparse term action.

    Shares the mask/phase rules with ``apply_term`` so the dense and sparse
    paths cannot drift apart.  Capped at n <= 10.
    """
    if h.n > DENSE_QUBIT_LIMIT:
        raise ValueError(f"dense matrix limited to n <= {DENSE_QUBIT_LIMIT}")
    dim = 2**h.n
    mat = np.zeros((dim, dim), dtype=complex)
    idx = np.arange(dim, dtype=np.int64)
    for term in h.terms:
        xm, zm, ny = _masks(term.string)
        phase = (1j**ny) * np.where(_parity(idx & zm) == 1, -1.0, 1.0)
        mat[idx ^ xm, idx] += term.coeff * phase
    return mat


class ExactEvolver:
    """Caches the eigendecomposition of one Hamiltonian for repeated use."""

    def __init__(self, h: Hamiltonian):
        if h.n > DENSE_QUBIT_LIMIT:
            raise ValueError(f"exact evolution limited to n <= {DENSE_QUBIT_LIMIT}")
        mat = dense_matrix(h)
        herm_defect = np.linalg.norm(mat - mat.conj().T)
        if herm_defect > 1e-10:
            raise ValueError(f"assembled matrix is not Hermitian ({herm_defect:.2e})")
        self.eigenvalues, self.eigenvectors = np.linalg.eigh(mat)

    def evolve(self, psi0: np.ndarray, s: float) -> np.ndarray:
        psi0 = np.asarray(psi0, dtype=complex)
        coeffs = self.eigenvectors.conj().T @ psi0
        return self.eigenvectors @ (np.exp(-1j * self.eigenvalues * s) * coeffs)


def evolve_exact(h: Hamiltonian, psi0: np.ndarray, s: float) -> np.ndarray:
    """exp(-i H s)|psi0> via Hermitian eigendecomposition."""
    return ExactEvolver(h).evolve(psi0, s)


def _apply_single(state: np.ndarray, n: int, q: int, mat: np.ndarray) -> np.ndarray:
    """Apply a 2x2 matrix on qubit q.  Axis layout: bit q varies fastest at q=0."""
    view = state.reshape(2 ** (n - 1 - q), 2, 2**q)
    return np.einsum("ab,ibj->iaj", mat, view).reshape(-1)


def apply_gate(state: np.ndarray, n: int, gate: Gate) -> np.ndarray:
    if gate.kind == "h":
        mat = np.array([[_SQRT_HALF, _SQRT_HALF], [_SQRT_HALF, -_SQRT_HALF]], dtype=complex)
        return _apply_single(state, n, gate.qubits[0], mat)
    if gate.kind == "x":
        return _apply_single(state, n, gate.qubits[0], np.array([[0, 1], [1, 0]], dtype=complex))
    if gate.kind == "rz":
        half = gate.angle / 2.0
        mat = np.array([[np.exp(-1j * half), 0], [0, np.exp(1j * half)]])
        return _apply_single(state, n, gate.qubits[0], mat)
    if gate.kind == "cx":
        control, target = gate.qubits
        idx = np.arange(state.size)
        controlled = (idx >> control) & 1 == 1
        out = state.copy()
        out[idx[controlled] ^ (1 << target)] = state[controlled]
        return out
    raise ValueError(f"unknown gate kind {gate.kind!r}")


def run_circuit(circuit: CircuitIR, psi0: np.ndarray) -> np.ndarray:
    """Apply the circuit's gates in order by sparse action."""
    state = np.asarray(psi0, dtype=complex)
    if state.shape != (2**circuit.n,):
        raise ValueError(f"state has shape {state.shape}, expected ({2**circuit.n},)")
    for gate in circuit.gates:
        state = apply_gate(state, circuit.n, gate)
    return state


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """|<a|b>|^2; invariant to the global phase of either argument."""
    return float(abs(np.vdot(a, b)) ** 2)


def policy_fidelity(
    h: Hamiltonian, policy: Policy, psi0: np.ndarray | None = None
) -> float:
    """Exact fidelity of the compiled policy circuit against exp(-iHt)|psi0>."""
    if psi0 is None:
        psi0 = zero_state(h.n)
    exact = evolve_exact(h, psi0, h.t)
    approx = run_circuit(compile_policy(h, policy), psi0)
    return fidelity(exact, approx)


def trotter_checkpoint_states(
    h: Hamiltonian, policy: Policy, psi0: np.ndarray | None = None
) -> list[tuple[float, np.ndarray]]:
    """Circuit states at cumulative segment boundaries s_i = t * sum_{j<=i} tau_j."""
    if psi0 is None:
        psi0 = zero_state(h.n)
    state = np.asarray(psi0, dtype=complex)
    out: list[tuple[float, np.ndarray]] = []
    cumulative = 0.0
    for weight, segment in zip(policy.tau, compile_segments(h, policy)):
        cumulative += weight * h.t
        state = run_circuit(segment, state)
        out.append((cumulative, state.copy()))
    return out


def _apply_gate_inverse(state: np.ndarray, n: int, gate: Gate) -> np.ndarray:
    if gate.kind == "rz":
        return apply_gate(state, n, Gate("rz", gate.qubits, -gate.angle))
    return apply_gate(state, n, gate)  # h, x, cx are involutions


def _raw_policy_fidelity(
    h: Hamiltonian, grouping, orders, tau, psi0: np.ndarray
) -> float:
    """Fidelity for an arbitrary nonnegative tau vector (no simplex check).

    Used by the analytic-gradient machinery and its finite-difference
    checks, which need to perturb tau off the simplex.
    """
    policy = Policy(tuple(grouping), tuple(orders), tuple(float(w) for w in tau))
    exact = evolve_exact(h, psi0, h.t)
    approx = run_circuit(compile_policy(h, policy, validate=False), psi0)
    return fidelity(exact, approx)


def fidelity_grad_tau(
    h: Hamiltonian, policy: Policy, psi0: np.ndarray | None = None
) -> np.ndarray:
    """Analytic gradient of policy fidelity w.r.t. tau (adjoint method),
    projected onto the simplex tangent so the components sum to zero.

    Each tau-dependent Rz(angle) contributes via its generator insertion
    (-i Z/2) * dangle/dtau; one forward pass and one backward sweep cover
    all insertions.
    """
    if psi0 is None:
        psi0 = zero_state(h.n)
    circuit, info = compile_with_tau_info(h, policy)
    by_gate = {mark.gate_index: mark for mark in info}

    exact = evolve_exact(h, psi0, h.t)
    forward = run_circuit(circuit, psi0)
    overlap = np.vdot(exact, forward)

    grad_overlap = np.zeros(policy.num_groups, dtype=complex)
    phi = forward.copy()  # state after gate g during the backward sweep
    chi = exact.copy()  # (U_{>g})^dagger |psi_exact>
    n = circuit.n
    for index in range(len(circuit.gates) - 1, -1, -1):
        gate = circuit.gates[index]
        mark = by_gate.get(index)
        if mark is not None:
            q = gate.qubits[0]
            signs = np.where((np.arange(phi.size) >> q) & 1 == 1, -1.0, 1.0)
            inserted = (-0.5j) * signs * phi
            grad_overlap[mark.segment] += mark.coeff * np.vdot(chi, inserted)
        phi = _apply_gate_inverse(phi, n, gate)
        chi = _apply_gate_inverse(chi, n, gate)

    grad = 2.0 * np.real(np.conj(overlap) * grad_overlap)
    return grad - grad.mean()


def noise_survival(count: float, eps: float) -> float:
    """Crude depolarizing survival factor (1 - eps)**count."""
    if count < 0:
        raise ValueError("gate count must be nonnegative")
    if not 0 <= eps < 1:
        raise ValueError("error rate must lie in [0, 1)")
    return float((1.0 - eps) ** count)
