"""Physics-informed surrogate for the evolving state |psi(s)>, s in [0, t].

The model maps a scalar time through frozen Gaussian Fourier features and a
small tanh/layer-norm MLP to the real and imaginary parts of the state.
Training balances four penalties: the initial condition, the Schrodinger
residual on fresh uniform collocation points, optional circuit-state anchors
at segment boundaries, and a soft norm constraint.

Time derivatives are exact: a forward-mode (dual) sweep in the scalar input
runs alongside the value computation with tangents built from graph ops, so
reverse mode through the residual reaches every parameter (the second-order
contract needed to train on the PDE loss).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .compiler import Policy
from .exact import dense_matrix, run_circuit, trotter_checkpoint_states, zero_state
from .nn.layers import (
    LayerNorm,
    Linear,
    Module,
    fourier_features,
    fourier_features_tangent,
)
from .nn.optim import AdamW
from .nn.tensor import Tensor, narrow, no_grad
from .pauli import Hamiltonian, l1_coefficient_norm
from .streams import Stream

PDE_RESIDUAL_GATE = 1e-4
DEFAULT_COLLOCATION = 128


class PinnDivergenceError(RuntimeError):
    """Raised when the training loss stops being finite."""


@dataclass(frozen=True)
class PinnLossWeights:
    ic: float = 10.0
    pde: float = 1.0
    circuit: float = 5.0
    norm: float = 0.1

    def __post_init__(self):
        if min(self.ic, self.pde, self.circuit, self.norm) < 0:
            raise ValueError("loss weights must be nonnegative")


def hamiltonian_parts(h: Hamiltonian) -> tuple[np.ndarray, np.ndarray]:
    """(Re H, Im H) as float64 matrices for graph-side application."""
    dense = dense_matrix(h)
    return np.real(dense).copy(), np.imag(dense).copy()


class PinnModel(Module):
    """Fourier features + 3-layer MLP emitting 2 * 2^n reals (re then im)."""

    def __init__(
        self,
        n_qubits: int,
        h_norm: float,
        stream: Stream,
        fourier_m: int = 256,
        width: int = 512,
    ):
        super().__init__()
        self.n_qubits = n_qubits
        self.dim = 2**n_qubits
        sigma = h_norm / (2.0 * np.pi)
        s_b, s1, s2, s3 = stream.spawn(4)
        self.register_buffer("b_matrix", s_b.normal((fourier_m, 1), sigma))
        self.lin1 = Linear(2 * fourier_m, width, s1)
        self.lin2 = Linear(width, width, s2)
        self.lin3 = Linear(width, 2 * self.dim, s3)
        self.norm1 = LayerNorm(width)
        self.norm2 = LayerNorm(width)

    # -- plain forward ---------------------------------------------------------

    def forward(self, s) -> tuple[Tensor, Tensor]:
        """Returns (re, im), each (batch, 2^n)."""
        feats = Tensor(fourier_features(s, self.b_matrix))
        x = self.norm1(self.lin1(feats)).tanh()
        x = self.norm2(self.lin2(x)).tanh()
        out = self.lin3(x)
        return narrow(out, -1, 0, self.dim), narrow(out, -1, self.dim, self.dim)

    # -- dual (value, d/ds) forward ---------------------------------------------

    def forward_dual(self, s) -> tuple[tuple[Tensor, Tensor], tuple[Tensor, Tensor]]:
        feats = Tensor(fourier_features(s, self.b_matrix))
        tangent = Tensor(fourier_features_tangent(s, self.b_matrix))
        x, tx = _dual_linear(self.lin1, feats, tangent)
        x, tx = _dual_layernorm(self.norm1, x, tx)
        x, tx = _dual_tanh(x, tx)
        x, tx = _dual_linear(self.lin2, x, tx)
        x, tx = _dual_layernorm(self.norm2, x, tx)
        x, tx = _dual_tanh(x, tx)
        x, tx = _dual_linear(self.lin3, x, tx)
        value = (narrow(x, -1, 0, self.dim), narrow(x, -1, self.dim, self.dim))
        grad = (narrow(tx, -1, 0, self.dim), narrow(tx, -1, self.dim, self.dim))
        return value, grad

    def psi(self, s: float) -> np.ndarray:
        """Complex state at one time (no graph, not normalized)."""
        with no_grad():
            re, im = self.forward(np.array([s]))
        return re.value[0] + 1j * im.value[0]


def _dual_linear(lin: Linear, x: Tensor, tx: Tensor) -> tuple[Tensor, Tensor]:
    return lin(x), tx @ lin.weight


def _dual_tanh(x: Tensor, tx: Tensor) -> tuple[Tensor, Tensor]:
    y = x.tanh()
    return y, tx * (1.0 - y * y)


def _dual_layernorm(ln: LayerNorm, x: Tensor, tx: Tensor) -> tuple[Tensor, Tensor]:
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = (var + ln.eps) ** -0.5
    y = centered * inv * ln.gamma + ln.beta
    t_centered = tx - tx.mean(axis=-1, keepdims=True)
    t_var = (centered * t_centered).mean(axis=-1, keepdims=True) * 2.0
    t_inv = (var + ln.eps) ** -1.5 * (-0.5) * t_var
    ty = (t_centered * inv + centered * t_inv) * ln.gamma
    return y, ty


def time_derivative(model: PinnModel, s) -> np.ndarray:
    """Exact d/ds of the complex network output at the given times."""
    with no_grad():
        _, (dre, dim) = model.forward_dual(np.atleast_1d(s))
    return dre.value + 1j * dim.value


# -- losses ---------------------------------------------------------------------


def ic_loss(model: PinnModel, psi0: np.ndarray) -> Tensor:
    re, im = model.forward(np.array([0.0]))
    dr = re - np.real(psi0)[None, :]
    di = im - np.imag(psi0)[None, :]
    return (dr * dr + di * di).sum()


def pde_residual_terms(
    dual: tuple[tuple[Tensor, Tensor], tuple[Tensor, Tensor]],
    h_parts: tuple[np.ndarray, np.ndarray],
) -> Tensor:
    """Mean over samples of || i d/ds psi - H psi ||^2 from a dual sweep."""
    (re, im), (dre, dim) = dual
    a, b = h_parts  # H = a + i b
    h_re = re @ a.T - im @ b.T
    h_im = im @ a.T + re @ b.T
    rr = (-1.0 * dim) - h_re
    ri = dre - h_im
    return (rr * rr + ri * ri).sum(axis=-1).mean()


def pde_loss(
    model: PinnModel, h_parts: tuple[np.ndarray, np.ndarray], s_samples: np.ndarray
) -> Tensor:
    return pde_residual_terms(model.forward_dual(s_samples), h_parts)


def circuit_loss(model: PinnModel, anchors: list[tuple[float, np.ndarray]]) -> Tensor:
    if not anchors:
        return Tensor(0.0)
    times = np.array([s for s, _ in anchors])
    targets = np.stack([state for _, state in anchors])
    re, im = model.forward(times)
    dr = re - np.real(targets)
    di = im - np.imag(targets)
    return (dr * dr + di * di).sum(axis=-1).mean()


def norm_loss(model: PinnModel, s_samples: np.ndarray) -> Tensor:
    re, im = model.forward(s_samples)
    norms = (re * re + im * im).sum(axis=-1).sqrt()
    dev = norms - 1.0
    return (dev * dev).mean()


def evaluate_pde_residual(
    model: PinnModel, h: Hamiltonian, grid_points: int = 256
) -> float:
    """Deterministic residual on a uniform grid over [0, t] (gate metric)."""
    h_parts = hamiltonian_parts(h)
    grid = np.linspace(0.0, h.t, grid_points)
    with no_grad():
        value = pde_loss(model, h_parts, grid)
    return value.item()


@dataclass
class PinnTrainResult:
    losses: dict[str, float]
    residual: float
    steps: int

    @property
    def passed_gate(self) -> bool:
        return self.residual < PDE_RESIDUAL_GATE


def train_pinn(
    model: PinnModel,
    h: Hamiltonian,
    psi0: np.ndarray | None = None,
    steps: int = 2000,
    stream: Stream | None = None,
    checkpoints: list[tuple[float, np.ndarray]] | None = None,
    weights: PinnLossWeights = PinnLossWeights(),
    collocation: int = DEFAULT_COLLOCATION,
    lr: float = 3e-3,
    lr_floor: float = 1e-5,
) -> PinnTrainResult:
    """Minimize the weighted physics loss; cosine learning-rate decay.

    Fresh uniform collocation points are drawn every step.  Divergence
    (non-finite loss) raises instead of being swallowed.
    """
    if psi0 is None:
        psi0 = zero_state(h.n)
    if stream is None:
        stream = Stream(0)
    h_parts = hamiltonian_parts(h)
    opt = AdamW(model.parameters(), lr=lr)
    parts: dict[str, float] = {"ic": 0.0, "pde": 0.0, "circuit": 0.0, "norm": 0.0}
    for step in range(steps):
        opt.lr = lr_floor + 0.5 * (lr - lr_floor) * (
            1.0 + np.cos(np.pi * step / max(steps, 1))
        )
        s_batch = stream.uniform(0.0, h.t, size=collocation)
        opt.zero_grad()
        term_ic = ic_loss(model, psi0)
        term_pde = pde_loss(model, h_parts, s_batch)
        term_circ = (
            circuit_loss(model, checkpoints) if checkpoints else Tensor(0.0)
        )
        term_norm = norm_loss(model, s_batch)
        loss = (
            weights.ic * term_ic
            + weights.pde * term_pde
            + weights.circuit * term_circ
            + weights.norm * term_norm
        )
        if not np.isfinite(loss.value):
            raise PinnDivergenceError(f"loss became non-finite at step {step}")
        loss.backward()
        opt.step()
        parts = {
            "ic": term_ic.item(),
            "pde": term_pde.item(),
            "circuit": term_circ.item(),
            "norm": term_norm.item(),
        }
    residual = evaluate_pde_residual(model, h)
    return PinnTrainResult(parts, residual, steps)


def warm_start(
    model: PinnModel,
    h: Hamiltonian,
    policy: Policy | list[Policy],
    steps: int = 200,
    psi0: np.ndarray | None = None,
    stream: Stream | None = None,
    weights: PinnLossWeights = PinnLossWeights(),
    lr: float = 3e-4,
) -> PinnTrainResult:
    """Continue training with circuit anchors from the given policy's
    (or policies') segment-boundary states."""
    if psi0 is None:
        psi0 = zero_state(h.n)
    policies = policy if isinstance(policy, list) else [policy]
    anchors: list[tuple[float, np.ndarray]] = []
    for pol in policies:
        anchors.extend(trotter_checkpoint_states(h, pol, psi0))
    if steps == 0:
        return PinnTrainResult({}, evaluate_pde_residual(model, h), 0)
    return train_pinn(
        model,
        h,
        psi0=psi0,
        steps=steps,
        stream=stream,
        checkpoints=anchors,
        weights=weights,
        lr=lr,
        lr_floor=lr * 0.1,
    )


def surrogate_fidelity(
    model: PinnModel,
    h: Hamiltonian,
    policy: Policy,
    psi0: np.ndarray | None = None,
) -> float:
    """|<psi_theta(t) | psi_pi(t)>|^2 with psi_theta normalized first."""
    from .compiler import compile_policy

    if psi0 is None:
        psi0 = zero_state(h.n)
    predicted = model.psi(h.t)
    norm = np.linalg.norm(predicted)
    if norm == 0:
        return 0.0
    predicted = predicted / norm
    circuit_state = run_circuit(compile_policy(h, policy), psi0)
    return float(abs(np.vdot(predicted, circuit_state)) ** 2)


def surrogate_fidelity_tensor(
    model: PinnModel,
    h: Hamiltonian,
    policy: Policy,
    psi0: np.ndarray | None = None,
) -> Tensor:
    """Graph-mode surrogate fidelity (differentiable w.r.t. model params)."""
    from .compiler import compile_policy

    if psi0 is None:
        psi0 = zero_state(h.n)
    target = run_circuit(compile_policy(h, policy), psi0)
    re, im = model.forward(np.array([h.t]))
    re = re.reshape(-1)
    im = im.reshape(-1)
    tr, ti = np.real(target), np.imag(target)
    # <psi_theta|target> with the conjugate on the network side.
    inner_re = (re * tr + im * ti).sum()
    inner_im = (re * ti - im * tr).sum()
    magnitude = inner_re * inner_re + inner_im * inner_im
    norm_sq = (re * re + im * im).sum()
    return magnitude / norm_sq