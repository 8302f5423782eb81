"""Hybrid conditional diffusion over policies.

Three coupled branches share time and condition embeddings: uniform-kernel
categorical diffusion for the grouping vector (sequence length M, K labels)
and for the per-segment orders (length K, labels {1, 2, 4}), plus Gaussian
diffusion for a pre-softmax time-step latent in R^K.  Classifier-free
guidance mixes conditional and unconditional predictions: epsilon-space for
the continuous branch, logit-space for the discrete branches.

Sampling runs the three reverse chains jointly from pure noise, records the
trajectory, and accumulates its log-probability (categorical transition
terms plus Gaussian transition densities; the parameter-independent initial
state terms are omitted).  ``trajectory_log_prob`` replays a recorded
trajectory in graph mode so REINFORCE can differentiate the same quantity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .compiler import Policy, normalize_policy
from .nn.layers import MLP, Embedding, Linear, Module, TransformerBlock, sinusoidal_embedding
from .nn.optim import Ema
from .nn.tensor import Tensor, concat, log_softmax, narrow, no_grad, softmax, take_along_last
from .streams import Stream

ORDER_VALUES = (1, 2, 4)
BETA_MIN = 1e-4
BETA_MAX = 0.02
TAU_FLOOR = 1e-3
TIME_EMBED_DIM = 32

GROUP_LOSS_WEIGHT = 1.0
TIME_LOSS_WEIGHT = 0.5
ORDER_LOSS_WEIGHT = 0.3


# -- schedule ---------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseSchedule:
    """betas[i] is beta_{i+1}; alpha_bar has a leading exact 1 (length T+1)."""

    betas: np.ndarray
    alpha_bar: np.ndarray

    @property
    def num_steps(self) -> int:
        return len(self.betas)

    def beta(self, t: int) -> float:
        return float(self.betas[t - 1])

    def abar(self, t) -> np.ndarray | float:
        return self.alpha_bar[t]


def cosine_schedule(
    num_steps: int, beta_min: float = BETA_MIN, beta_max: float = BETA_MAX
) -> NoiseSchedule:
    """Cosine alpha-bar profile with per-step beta clamped into [beta_min,
    beta_max]; alpha_bar is recomputed from the clamped betas."""
    if num_steps < 1:
        raise ValueError("schedule needs at least one step")
    s = 0.008
    steps = np.arange(num_steps + 1)
    f = np.cos(((steps / num_steps) + s) / (1 + s) * np.pi / 2) ** 2
    betas = np.clip(1.0 - f[1:] / f[:-1], beta_min, beta_max)
    alpha_bar = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
    return NoiseSchedule(betas, alpha_bar)


# -- forward processes ---------------------------------------------------------------


def d3pm_forward(
    labels: np.ndarray, t, schedule: NoiseSchedule, num_classes: int, stream: Stream
) -> np.ndarray:
    """Sample q(x_t | x_0) for the uniform kernel: keep with probability
    alpha_bar_t, otherwise resample uniformly (closed-form composition)."""
    labels = np.asarray(labels)
    abar = np.asarray(schedule.abar(t))
    if abar.ndim:  # per-row t
        abar = abar.reshape((-1,) + (1,) * (labels.ndim - 1))
    keep = stream.uniform(size=labels.shape) < abar
    resampled = stream.integers(0, num_classes, size=labels.shape)
    return np.where(keep, labels, resampled)


def d3pm_marginal(
    labels: np.ndarray, t: int, schedule: NoiseSchedule, num_classes: int
) -> np.ndarray:
    """Closed-form q(x_t | x_0) rows: abar * onehot + (1 - abar)/K."""
    abar = float(schedule.abar(t))
    base = np.full(labels.shape + (num_classes,), (1.0 - abar) / num_classes)
    np.put_along_axis(base, np.asarray(labels)[..., None], (1.0 - abar) / num_classes + abar, axis=-1)
    return base


def d3pm_posterior(
    g_t: np.ndarray,
    x0_probs,
    t: int,
    schedule: NoiseSchedule,
    num_classes: int,
):
    """q(x_{t-1} | x_t, x0-distribution), rows normalized.

    Works on numpy arrays or graph tensors for ``x0_probs`` (the transition
    factor is a constant).  t is 1-indexed; at t=1 the posterior collapses
    onto the x0 distribution weighted by the single-step kernel.
    """
    beta = schedule.beta(t)
    abar_prev = float(schedule.abar(t - 1))
    onehot = np.zeros(np.asarray(g_t).shape + (num_classes,))
    np.put_along_axis(onehot, np.asarray(g_t)[..., None], 1.0, axis=-1)
    transition = (1.0 - beta) * onehot + beta / num_classes
    prior = x0_probs * abar_prev + (1.0 - abar_prev) / num_classes
    unnormalized = prior * transition
    return unnormalized / unnormalized.sum(axis=-1, keepdims=True)


def ddpm_forward(tau0: np.ndarray, t, schedule: NoiseSchedule, noise: np.ndarray) -> np.ndarray:
    """tau_t = sqrt(abar_t) tau_0 + sqrt(1 - abar_t) eps."""
    abar = np.asarray(schedule.abar(t))
    if abar.ndim:
        abar = abar.reshape((-1,) + (1,) * (np.asarray(tau0).ndim - 1))
    return np.sqrt(abar) * tau0 + np.sqrt(1.0 - abar) * noise


def cfg_mix(cond_out, uncond_out, w: float):
    """(1 + w) * conditional - w * unconditional (identity at w=0)."""
    return (1.0 + w) * cond_out - w * uncond_out


# -- label/latent codecs ---------------------------------------------------------------


def orders_to_labels(orders) -> np.ndarray:
    lookup = {order: i for i, order in enumerate(ORDER_VALUES)}
    return np.array([lookup[int(o)] for o in orders], dtype=np.int64)


def labels_to_orders(labels) -> np.ndarray:
    return np.array([ORDER_VALUES[int(label)] for label in labels], dtype=np.int64)


def latent_from_tau(tau: np.ndarray, num_slots: int) -> np.ndarray:
    """Centered log of floor-smoothed tau, zero-padded to the slot count.

    ``softmax(latent)`` recovers the smoothed weights, so the codec inverts
    the sampler's final softmax up to the smoothing floor.
    """
    padded = np.zeros(num_slots)
    padded[: len(tau)] = tau
    z = np.log(padded + TAU_FLOOR)
    return z - z.mean()


def tau_from_latent(latent: np.ndarray) -> np.ndarray:
    shifted = latent - latent.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


# -- model ---------------------------------------------------------------------


@dataclass(frozen=True)
class DiffusionConfig:
    num_terms: int  # M: grouping sequence length
    num_groups: int  # K: group slots = order/tau length
    cond_dim: int
    width: int = 64
    group_layers: int = 2
    order_layers: int = 2
    tau_layers: int = 3
    heads: int = 4
    p_drop: float = 0.1
    guidance: float = 3.0
    ema_decay: float = 0.9999


class TransformerDenoiser(Module):
    """Token + position + time + condition embeddings into prenorm blocks,
    emitting per-position x0 logits."""

    def __init__(
        self,
        vocab: int,
        length: int,
        out_labels: int,
        width: int,
        layers: int,
        heads: int,
        stream: Stream,
    ):
        super().__init__()
        s_tok, s_blocks, s_head = stream.spawn(3)
        self.token = Embedding(vocab, width, s_tok)
        self.position = Tensor(
            s_tok.normal((length, width), 0.02), requires_grad=True
        )
        self.blocks = [
            TransformerBlock(width, heads, s) for s in s_blocks.spawn(layers)
        ]
        self.head = Linear(width, out_labels, s_head)

    def __call__(self, labels: np.ndarray, t_emb: Tensor, cond_emb: Tensor) -> Tensor:
        x = self.token(labels) + self.position
        x = x + t_emb.reshape(t_emb.shape[0], 1, t_emb.shape[1])
        x = x + cond_emb.reshape(cond_emb.shape[0], 1, cond_emb.shape[1])
        for block in self.blocks:
            x = block(x)
        return self.head(x)


class TauDenoiser(Module):
    """MLP noise predictor for the continuous branch."""

    def __init__(self, num_groups: int, width: int, layers: int, stream: Stream):
        super().__init__()
        widths = [num_groups + 2 * width] + [width] * (layers - 1) + [num_groups]
        self.body = MLP(widths, stream, activation="gelu")

    def __call__(self, tau_t: np.ndarray, t_emb: Tensor, cond_emb: Tensor) -> Tensor:
        return self.body(concat([Tensor(np.atleast_2d(tau_t)), t_emb, cond_emb], axis=-1))


class DiffusionModel(Module):
    def __init__(self, config: DiffusionConfig, stream: Stream):
        super().__init__()
        self.config = config
        s_time, s_cond, s_group, s_order, s_tau = stream.spawn(5)
        width = config.width
        self.time_proj = MLP([TIME_EMBED_DIM, width, width], s_time, activation="gelu")
        self.cond_proj = Linear(config.cond_dim, width, s_cond)
        self.grouping_net = TransformerDenoiser(
            vocab=config.num_groups,
            length=config.num_terms,
            out_labels=config.num_groups,
            width=width,
            layers=config.group_layers,
            heads=config.heads,
            stream=s_group,
        )
        self.order_net = TransformerDenoiser(
            vocab=len(ORDER_VALUES),
            length=config.num_groups,
            out_labels=len(ORDER_VALUES),
            width=width,
            layers=config.order_layers,
            heads=config.heads,
            stream=s_order,
        )
        self.tau_net = TauDenoiser(config.num_groups, width, config.tau_layers, s_tau)

    def embeddings(self, t: np.ndarray, cond) -> tuple[Tensor, Tensor]:
        """Shared time/condition embeddings; cond may be numpy, Tensor, or
        None (treated as the zero vector = unconditional)."""
        t_emb = self.time_proj(Tensor(sinusoidal_embedding(t, TIME_EMBED_DIM)))
        batch = t_emb.shape[0]
        if cond is None:
            cond = np.zeros((batch, self.config.cond_dim))
        if isinstance(cond, np.ndarray) and cond.ndim == 1:
            cond = np.tile(cond, (batch, 1))
        if isinstance(cond, Tensor) and cond.ndim == 1:
            cond = cond.reshape(1, -1)
        cond_emb = self.cond_proj(cond if isinstance(cond, Tensor) else Tensor(cond))
        return t_emb, cond_emb

    def grouping_logits(self, g_t: np.ndarray, t: np.ndarray, cond) -> Tensor:
        t_emb, cond_emb = self.embeddings(t, cond)
        return self.grouping_net(g_t, t_emb, cond_emb)

    def order_logits(self, k_t: np.ndarray, t: np.ndarray, cond) -> Tensor:
        t_emb, cond_emb = self.embeddings(t, cond)
        return self.order_net(k_t, t_emb, cond_emb)

    def tau_eps(self, tau_t: np.ndarray, t: np.ndarray, cond) -> Tensor:
        t_emb, cond_emb = self.embeddings(t, cond)
        return self.tau_net(tau_t, t_emb, cond_emb)

    def make_ema(self) -> Ema:
        return Ema(self.parameters(), self.config.ema_decay)


# -- training ---------------------------------------------------------------------


@dataclass
class TrainingBatch:
    grouping: np.ndarray  # (B, M) int labels in [0, K)
    order_labels: np.ndarray  # (B, K) int labels in [0, 3)
    tau_latent: np.ndarray  # (B, K) float
    cond: np.ndarray  # (B, C)


def policy_to_training_row(
    policy: Policy, num_terms: int, num_groups: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Embed a (possibly smaller-K) policy into the model's fixed slots.

    Grouping labels pass through; missing order slots pad with order 1;
    missing tau slots carry zero mass through the latent codec.
    """
    if len(policy.grouping) != num_terms:
        raise ValueError(
            f"policy grouping length {len(policy.grouping)} != model M={num_terms}"
        )
    if policy.num_groups > num_groups:
        raise ValueError(
            f"policy uses {policy.num_groups} groups > model K={num_groups}"
        )
    grouping = np.asarray(policy.grouping, dtype=np.int64)
    orders = np.zeros(num_groups, dtype=np.int64)
    orders[: policy.num_groups] = orders_to_labels(policy.orders)
    latent = latent_from_tau(np.asarray(policy.tau), num_groups)
    return grouping, orders, latent


def batch_from_policies(
    policies: list[Policy], conds: np.ndarray, num_terms: int, num_groups: int
) -> TrainingBatch:
    rows = [policy_to_training_row(p, num_terms, num_groups) for p in policies]
    return TrainingBatch(
        grouping=np.stack([r[0] for r in rows]),
        order_labels=np.stack([r[1] for r in rows]),
        tau_latent=np.stack([r[2] for r in rows]),
        cond=np.asarray(conds, dtype=float),
    )


def _cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    return -take_along_last(log_softmax(logits, axis=-1), labels).mean()


def training_loss(
    model: DiffusionModel,
    batch: TrainingBatch,
    schedule: NoiseSchedule,
    stream: Stream,
    p_drop: float | None = None,
) -> tuple[Tensor, dict[str, float]]:
    """Weighted branch losses at per-example uniform timesteps.

    Categorical branches use cross-entropy to x0; the continuous branch uses
    squared error to the injected noise.  The condition vector is zeroed per
    example with probability p_drop (classifier-free guidance training).
    """
    if p_drop is None:
        p_drop = model.config.p_drop
    batch_size = batch.grouping.shape[0]
    config = model.config
    t = stream.integers(1, schedule.num_steps + 1, size=batch_size)
    cond = batch.cond.copy()
    if p_drop > 0:
        drop = stream.uniform(size=batch_size) < p_drop
        cond[drop] = 0.0

    g_t = d3pm_forward(batch.grouping, t, schedule, config.num_groups, stream)
    k_t = d3pm_forward(batch.order_labels, t, schedule, len(ORDER_VALUES), stream)
    noise = stream.normal(size=batch.tau_latent.shape)
    tau_t = ddpm_forward(batch.tau_latent, t, schedule, noise)

    group_loss = _cross_entropy(model.grouping_logits(g_t, t, cond), batch.grouping)
    order_loss = _cross_entropy(model.order_logits(k_t, t, cond), batch.order_labels)
    eps_hat = model.tau_eps(tau_t, t, cond)
    diff = eps_hat - noise
    time_loss = (diff * diff).mean()

    total = (
        GROUP_LOSS_WEIGHT * group_loss
        + TIME_LOSS_WEIGHT * time_loss
        + ORDER_LOSS_WEIGHT * order_loss
    )
    parts = {
        "group": group_loss.item(),
        "time": time_loss.item(),
        "order": order_loss.item(),
    }
    return total, parts


# -- sampling ---------------------------------------------------------------------


@dataclass
class Trajectory:
    """Recorded reverse-chain states; index 0 is the terminal noise state."""

    group_states: np.ndarray  # (T+1, B, M)
    order_states: np.ndarray  # (T+1, B, K)
    tau_states: np.ndarray  # (T+1, B, K)


@dataclass
class PolicySample:
    policy: Policy
    log_prob: float


def _guided_x0_probs(
    net_call, states: np.ndarray, t_array: np.ndarray, cond, w: float
):
    cond_logits = net_call(states, t_array, cond)
    if w == 0.0:
        return softmax(cond_logits, axis=-1)
    uncond_logits = net_call(states, t_array, None)
    return softmax(cfg_mix(cond_logits, uncond_logits, w), axis=-1)


def _guided_eps(net_call, states: np.ndarray, t_array: np.ndarray, cond, w: float):
    cond_eps = net_call(states, t_array, cond)
    if w == 0.0:
        return cond_eps
    return cfg_mix(cond_eps, net_call(states, t_array, None), w)


def _categorical_sample(probs: np.ndarray, stream: Stream) -> np.ndarray:
    """Vectorized inverse-CDF draw along the last axis."""
    cdf = probs.cumsum(axis=-1)
    u = stream.uniform(size=probs.shape[:-1] + (1,))
    return np.minimum(
        (cdf < u).sum(axis=-1), probs.shape[-1] - 1
    ).astype(np.int64)


def _gaussian_log_prob(x: np.ndarray, mean, var: float):
    diff = x - mean
    return -0.5 * ((diff * diff).sum(axis=-1) / var) - 0.5 * x.shape[-1] * math.log(
        2.0 * math.pi * var
    )


def _ddpm_mean(tau_t: np.ndarray, eps_hat, t: int, schedule: NoiseSchedule):
    beta = schedule.beta(t)
    abar = float(schedule.abar(t))
    return (tau_t - (beta / math.sqrt(1.0 - abar)) * eps_hat) * (
        1.0 / math.sqrt(1.0 - beta)
    )


def sample_policies(
    model: DiffusionModel,
    conditions: np.ndarray,
    schedule: NoiseSchedule,
    stream: Stream,
    guidance: float | None = None,
    ema: Ema | None = None,
) -> tuple[list[PolicySample], Trajectory]:
    """Run the joint reverse chains for a batch of conditions.

    Returns normalized policies with their trajectory log-probabilities and
    the recorded trajectory (for REINFORCE replay).  Sampling reads EMA
    shadow weights when an ``ema`` is supplied; the live weights are
    untouched either way.
    """
    if ema is not None:
        with ema.swapped_in(model.parameters()):
            return sample_policies(
                model, conditions, schedule, stream, guidance=guidance, ema=None
            )
    config = model.config
    w = config.guidance if guidance is None else guidance
    conditions = np.atleast_2d(np.asarray(conditions, dtype=float))
    batch = conditions.shape[0]
    num_steps = schedule.num_steps

    was_training = model.training
    model.eval()
    try:
        with no_grad():
            g = stream.integers(0, config.num_groups, size=(batch, config.num_terms))
            k = stream.integers(0, len(ORDER_VALUES), size=(batch, config.num_groups))
            z = stream.normal(size=(batch, config.num_groups))
            group_states = np.empty((num_steps + 1, batch, config.num_terms), dtype=np.int64)
            order_states = np.empty((num_steps + 1, batch, config.num_groups), dtype=np.int64)
            tau_states = np.empty((num_steps + 1, batch, config.num_groups))
            group_states[0], order_states[0], tau_states[0] = g, k, z
            log_probs = np.zeros(batch)

            for i, t in enumerate(range(num_steps, 0, -1)):
                t_array = np.full(batch, t)
                g_probs = _guided_x0_probs(
                    model.grouping_logits, g, t_array, conditions, w
                ).value
                g_post = d3pm_posterior(g, g_probs, t, schedule, config.num_groups)
                g = _categorical_sample(g_post, stream)
                log_probs += np.log(
                    np.take_along_axis(g_post, g[..., None], axis=-1)[..., 0]
                ).sum(axis=-1)

                k_probs = _guided_x0_probs(
                    model.order_logits, k, t_array, conditions, w
                ).value
                k_post = d3pm_posterior(k, k_probs, t, schedule, len(ORDER_VALUES))
                k = _categorical_sample(k_post, stream)
                log_probs += np.log(
                    np.take_along_axis(k_post, k[..., None], axis=-1)[..., 0]
                ).sum(axis=-1)

                eps_hat = _guided_eps(model.tau_eps, z, t_array, conditions, w).value
                mean = _ddpm_mean(z, eps_hat, t, schedule)
                var = schedule.beta(t)
                z = mean + math.sqrt(var) * stream.normal(size=z.shape)
                log_probs += _gaussian_log_prob(z, mean, var)

                group_states[i + 1], order_states[i + 1], tau_states[i + 1] = g, k, z
    finally:
        model.train(was_training)

    samples = []
    for b in range(batch):
        tau = tau_from_latent(z[b])
        policy = normalize_policy(g[b], labels_to_orders(k[b]), tau)
        samples.append(PolicySample(policy, float(log_probs[b])))
    trajectory = Trajectory(group_states, order_states, tau_states)
    return samples, trajectory


def sample_policy(
    model: DiffusionModel,
    condition: np.ndarray,
    schedule: NoiseSchedule,
    seed: int,
    guidance: float | None = None,
    ema: Ema | None = None,
) -> PolicySample:
    """Single-policy convenience wrapper (fresh stream from the seed)."""
    samples, _ = sample_policies(
        model,
        np.atleast_2d(condition),
        schedule,
        Stream(seed),
        guidance=guidance,
        ema=ema,
    )
    return samples[0]


def trajectory_log_prob(
    model: DiffusionModel,
    trajectory: Trajectory,
    conditions,
    schedule: NoiseSchedule,
    guidance: float | None = None,
) -> Tensor:
    """Graph-mode log-probability of a recorded trajectory, one scalar per
    sample (shape (B,)); matches the values recorded during sampling."""
    config = model.config
    w = config.guidance if guidance is None else guidance
    num_steps = schedule.num_steps
    batch = trajectory.group_states.shape[1]
    total: Tensor | None = None
    for i, t in enumerate(range(num_steps, 0, -1)):
        t_array = np.full(batch, t)
        g_prev, g_next = trajectory.group_states[i], trajectory.group_states[i + 1]
        k_prev, k_next = trajectory.order_states[i], trajectory.order_states[i + 1]
        z_prev, z_next = trajectory.tau_states[i], trajectory.tau_states[i + 1]

        g_probs = _guided_x0_probs(model.grouping_logits, g_prev, t_array, conditions, w)
        g_post = d3pm_posterior(g_prev, g_probs, t, schedule, config.num_groups)
        step = take_along_last(g_post.maximum(1e-300).log(), g_next).sum(axis=-1)

        k_probs = _guided_x0_probs(model.order_logits, k_prev, t_array, conditions, w)
        k_post = d3pm_posterior(k_prev, k_probs, t, schedule, len(ORDER_VALUES))
        step = step + take_along_last(k_post.maximum(1e-300).log(), k_next).sum(axis=-1)

        eps_hat = _guided_eps(model.tau_eps, z_prev, t_array, conditions, w)
        mean = _ddpm_mean(z_prev, eps_hat, t, schedule)
        var = schedule.beta(t)
        diff = Tensor(z_next) - mean
        gauss = (
            (diff * diff).sum(axis=-1) * (-0.5 / var)
            - 0.5 * z_next.shape[-1] * math.log(2.0 * math.pi * var)
        )
        step = step + gauss
        total = step if total is None else total + step
    return total


def ema_sampling_weights(model: DiffusionModel, ema: Ema):
    """Context manager: run the model on EMA shadow weights."""
    return ema.swapped_in(model.parameters())
