"""Compile (grouping, orders, time-step) policies into basis-gate circuits.

A policy splits the Hamiltonian's terms into K blocks and the evolution time
into K segments of length tau_i * t.  Segment i applies the Suzuki formula of
order k_i over all blocks.  Block exponentials are ordered products of
per-term exponentials, so they are exact whenever the block commutes
internally; reversed sweeps inside the symmetric formulas mirror the
within-block term order to keep the construction time-symmetric.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.optimize

from .circuits import CircuitIR, Gate, cx_gate, h_gate, rz_gate
from .pauli import Hamiltonian, PauliString, PauliTerm

VALID_ORDERS = (1, 2, 4)

# Suzuki fourth-order recursion weight.
SUZUKI_U4 = 1.0 / (4.0 - 4.0 ** (1.0 / 3.0))

_TAU_SUM_TOL = 1e-9


@dataclass(frozen=True)
class Policy:
    """Grouping vector, per-segment Suzuki orders, and simplex time weights."""

    grouping: tuple[int, ...]
    orders: tuple[int, ...]
    tau: tuple[float, ...]

    @property
    def num_groups(self) -> int:
        return len(self.orders)

    def validate(self) -> None:
        k = self.num_groups
        if len(self.tau) != k:
            raise ValueError("orders and tau must have equal length")
        if not self.grouping:
            raise ValueError("empty grouping")
        if sorted(set(self.grouping)) != list(range(k)):
            raise ValueError(f"group ids must be dense in [0, {k})")
        if any(o not in VALID_ORDERS for o in self.orders):
            raise ValueError(f"orders must be in {VALID_ORDERS}, got {self.orders}")
        if any(w < 0 for w in self.tau):
            raise ValueError("tau weights must be nonnegative")
        if abs(sum(self.tau) - 1.0) > _TAU_SUM_TOL:
            raise ValueError(f"tau must sum to 1, got {sum(self.tau)}")


def _snap_order(raw: float) -> int:
    """Round to the nearest valid order; ties round down (3 -> 2)."""
    return min(VALID_ORDERS, key=lambda o: (abs(raw - o), o))


def normalize_policy(grouping, orders, tau) -> Policy:
    """Canonicalize a raw policy triple.

    Empty groups are removed (their tau mass renormalized over survivors),
    group ids compacted, tau clipped at zero and renormalized, and orders
    snapped to the nearest of {1, 2, 4}.  Already-valid policies pass
    through unchanged.
    """
    grouping = [int(g) for g in grouping]
    orders = list(orders)
    tau = np.asarray(tau, dtype=float)
    if len(orders) != len(tau):
        raise ValueError("orders and tau must have equal length")
    if not grouping:
        raise ValueError("empty grouping")
    k_raw = len(orders)
    if any(g < 0 or g >= k_raw for g in grouping):
        raise ValueError(f"group ids must lie in [0, {k_raw})")

    candidate = Policy(
        tuple(grouping),
        tuple(int(o) if o in VALID_ORDERS else -1 for o in orders),
        tuple(float(w) for w in tau),
    )
    try:
        candidate.validate()
        return candidate  # already valid: exact idempotence
    except ValueError:
        pass

    tau = np.clip(tau, 0.0, None)
    used = sorted(set(grouping))
    remap = {old: new for new, old in enumerate(used)}
    new_grouping = tuple(remap[g] for g in grouping)
    new_orders = tuple(_snap_order(orders[g]) for g in used)
    new_tau = tau[used]
    total = new_tau.sum()
    if total <= 0:
        raise ValueError("all tau weights vanish after clipping")
    new_tau = new_tau / total
    return Policy(new_grouping, new_orders, tuple(float(w) for w in new_tau))


def policy_to_dict(policy: Policy) -> dict:
    return {
        "grouping": list(policy.grouping),
        "orders": list(policy.orders),
        "tau": list(policy.tau),
    }


def policy_from_dict(data: dict) -> Policy:
    try:
        return normalize_policy(data["grouping"], data["orders"], data["tau"])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed policy record: {exc}") from exc


def save_policy(policy: Policy, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(policy_to_dict(policy), fh)
        fh.write("\n")


def load_policy(path) -> Policy:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"not valid JSON: {path}") from exc
    return policy_from_dict(data)


def _pauli_exp_marked(
    pauli: PauliString, theta: float
) -> tuple[list[Gate], int | None]:
    """Gates for exp(-i theta P) plus the offset of the theta-carrying Rz."""
    support = pauli.support()
    if not support:
        return [], None
    enter: list[Gate] = []
    leave: list[Gate] = []
    for q in support:
        op = pauli.ops[q]
        if op == "X":
            enter.append(h_gate(q))
            leave.append(h_gate(q))
        elif op == "Y":
            enter += [rz_gate(q, -math.pi / 2), h_gate(q)]
            leave += [h_gate(q), rz_gate(q, math.pi / 2)]
    last = support[-1]
    ladder = [cx_gate(q, last) for q in support[:-1]]
    rotation_offset = len(enter) + len(ladder)
    gates = enter + ladder + [rz_gate(last, 2.0 * theta)] + ladder[::-1] + leave
    return gates, rotation_offset


def pauli_exponential(pauli: PauliString, theta: float) -> list[Gate]:
    """Synthesize exp(-i theta P) as basis gates (exact, no global phase).

    X sites enter the Z basis with H; Y sites with Rz(-pi/2) then H (undone in
    reverse).  A CNOT ladder folds the support parity onto the last support
    qubit, which takes Rz(2 theta).  Identity-only strings compile to nothing.
    """
    return _pauli_exp_marked(pauli, theta)[0]


def _suzuki_applications(
    num_blocks: int, order: int
) -> list[tuple[int, float, bool]]:
    """(block, weight, reversed) applications realizing S_order(delta).

    Each application contributes exp(-i H_block * weight * delta) with the
    block's terms taken in forward or reversed order.
    """
    if order == 1:
        return [(b, 1.0, False) for b in range(num_blocks)]
    if order == 2:
        forward = [(b, 0.5, False) for b in range(num_blocks)]
        backward = [(b, 0.5, True) for b in reversed(range(num_blocks))]
        return forward + backward
    if order == 4:
        u = SUZUKI_U4
        inner = _suzuki_applications(num_blocks, 2)
        outer = [(b, w * u, r) for b, w, r in inner]
        middle = [(b, w * (1.0 - 4.0 * u), r) for b, w, r in inner]
        return outer + outer + middle + outer + outer
    raise ValueError(f"unsupported order {order}")


@dataclass(frozen=True)
class TauSensitivity:
    """Marks an Rz gate whose angle is ``coeff * tau[segment]``."""

    gate_index: int
    segment: int
    coeff: float


def blocks_of(h: Hamiltonian, policy: Policy) -> list[list[PauliTerm]]:
    """Partition the Hamiltonian's terms by the policy grouping."""
    if len(policy.grouping) != h.num_terms:
        raise ValueError(
            f"grouping length {len(policy.grouping)} != term count {h.num_terms}"
        )
    blocks: list[list[PauliTerm]] = [[] for _ in range(policy.num_groups)]
    for term, group in zip(h.terms, policy.grouping):
        blocks[group].append(term)
    return blocks


def _segment_gates(
    blocks: list[list[PauliTerm]], order: int, seg_time: float
) -> tuple[list[Gate], list[tuple[int, float]]]:
    """Gates of S_order(seg_time) plus (index, dangle/dseg_time) marks."""
    gates: list[Gate] = []
    marks: list[tuple[int, float]] = []
    for block_idx, weight, reverse in _suzuki_applications(len(blocks), order):
        terms = blocks[block_idx][::-1] if reverse else blocks[block_idx]
        for term in terms:
            term_gates, rot = _pauli_exp_marked(
                term.string, term.coeff * weight * seg_time
            )
            if rot is not None:
                marks.append((len(gates) + rot, 2.0 * term.coeff * weight))
            gates += term_gates
    return gates, marks


def compile_segments(
    h: Hamiltonian, policy: Policy, validate: bool = True
) -> list[CircuitIR]:
    """Per-segment circuits; their concatenation equals ``compile_policy``."""
    if validate:
        policy.validate()
    blocks = blocks_of(h, policy)
    return [
        CircuitIR(h.n, _segment_gates(blocks, order, weight * h.t)[0])
        for order, weight in zip(policy.orders, policy.tau)
    ]


def compile_policy(h: Hamiltonian, policy: Policy, validate: bool = True) -> CircuitIR:
    """Compile U(t) = prod_i S_{k_i}(blocks, tau_i * t), segment 1 first."""
    segments = compile_segments(h, policy, validate=validate)
    gates: list[Gate] = []
    for segment in segments:
        gates += segment.gates
    return CircuitIR(h.n, gates)


def compile_with_tau_info(
    h: Hamiltonian, policy: Policy, validate: bool = True
) -> tuple[CircuitIR, list[TauSensitivity]]:
    """Compile and mark every Rz whose angle is linear in a tau component.

    For each marked gate, ``angle = coeff * tau[segment]`` exactly; the
    Y-basis-change rotations carry fixed angles and are not marked.
    """
    if validate:
        policy.validate()
    blocks = blocks_of(h, policy)
    gates: list[Gate] = []
    info: list[TauSensitivity] = []
    for seg_index, (order, weight) in enumerate(zip(policy.orders, policy.tau)):
        seg_gates, marks = _segment_gates(blocks, order, weight * h.t)
        for offset, dangle_dt in marks:
            info.append(TauSensitivity(len(gates) + offset, seg_index, dangle_dt * h.t))
        gates += seg_gates
    return CircuitIR(h.n, gates), info


def uniform_baseline_policy(h: Hamiltonian, order: int) -> Policy:
    """One group per term, the given order everywhere, uniform tau."""
    m = h.num_terms
    return Policy(tuple(range(m)), tuple([order] * m), tuple([1.0 / m] * m))


def compile_uniform_baseline(h: Hamiltonian, order: int, reps: int) -> CircuitIR:
    """Plain product-formula reference: reps repetitions of S_order(t/reps)
    with one block per term."""
    if order not in VALID_ORDERS:
        raise ValueError(f"order must be in {VALID_ORDERS}")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    blocks = [[term] for term in h.terms]
    step, _ = _segment_gates(blocks, order, h.t / reps)
    return CircuitIR(h.n, step * reps)


def circuit_unitary(circuit: CircuitIR) -> np.ndarray:
    """Dense unitary of a circuit (first gate applied first); n <= 10."""
    if circuit.n > 10:
        raise ValueError("dense unitary limited to n <= 10")
    from .exact import run_circuit  # circular at module level

    dim = 2**circuit.n
    mat = np.empty((dim, dim), dtype=complex)
    for col in range(dim):
        basis = np.zeros(dim, dtype=complex)
        basis[col] = 1.0
        mat[:, col] = run_circuit(circuit, basis)
    return mat


def operator_error(h: Hamiltonian, circuit: CircuitIR, t: float) -> float:
    """Global-phase-aligned spectral distance min_phi ||exp(-iHt) - e^{i phi} U||."""
    if h.n > 6:
        raise ValueError("operator_error is dense-only (n <= 6)")
    from .exact import dense_matrix

    exact = scipy.linalg.expm(-1j * t * dense_matrix(h))
    approx = circuit_unitary(circuit)

    def distance(phi: float) -> float:
        return float(np.linalg.norm(exact - np.exp(1j * phi) * approx, ord=2))

    trace = np.trace(approx.conj().T @ exact)
    candidates = [float(np.angle(trace))] if abs(trace) > 1e-12 else []
    candidates += list(np.linspace(-math.pi, math.pi, 33))
    best = min(candidates, key=distance)
    result = scipy.optimize.minimize_scalar(
        distance,
        bounds=(best - 0.25, best + 0.25),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return float(min(distance(best), result.fun))
