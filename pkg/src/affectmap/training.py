"""Triplet sampling, margin loss, and the optimization loop.

The loss pulls anchor-positive pairs together (mean squared distance) and
pins anchor-negative distances to the prescribed margins (mean squared
mismatch).  One shared parameter vector is evaluated on all three triplet
roles, so gradients from every role accumulate into the same weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, TrainingDivergedError
from .inference import TrainedManifold, mean_embeddings_by_state
from .network import backward, forward, validate_layers

__all__ = [
    "Triplet",
    "MiniBatch",
    "TrainConfig",
    "EpochLoss",
    "OptimizerState",
    "sample_triplets",
    "positive_loss",
    "negative_loss",
    "total_loss",
    "loss_gradient",
    "make_triplet_loss_closure",
    "train",
    "continue_train",
    "dataset_loss",
    "write_loss_csv",
]


@dataclass(frozen=True)
class Triplet:
    """Anchor and positive share a state; the negative comes from another."""

    anchor: np.ndarray
    positive: np.ndarray
    negative: np.ndarray
    anchor_state: int
    negative_state: int

    def __post_init__(self):
        if self.anchor_state == self.negative_state:
            raise ValueError("negative must come from a different state than the anchor")


@dataclass
class MiniBatch:
    """b triplets stored as stacked (b, d) arrays for one training step."""

    anchors: np.ndarray
    positives: np.ndarray
    negatives: np.ndarray
    anchor_states: np.ndarray
    negative_states: np.ndarray

    def __post_init__(self):
        b, d = np.asarray(self.anchors).shape
        for name in ("positives", "negatives"):
            if getattr(self, name).shape != (b, d):
                raise ValueError(f"{name} must have shape {(b, d)}")
        for name in ("anchor_states", "negative_states"):
            if getattr(self, name).shape != (b,):
                raise ValueError(f"{name} must have shape {(b,)}")
        if np.any(self.anchor_states == self.negative_states):
            raise ValueError("every negative must come from a different state")

    def __len__(self):
        return self.anchors.shape[0]

    @classmethod
    def from_triplets(cls, triplets):
        return cls(
            np.stack([t.anchor for t in triplets]),
            np.stack([t.positive for t in triplets]),
            np.stack([t.negative for t in triplets]),
            np.array([t.anchor_state for t in triplets], dtype=int),
            np.array([t.negative_state for t in triplets], dtype=int),
        )

    def triplets(self):
        for j in range(len(self)):
            yield Triplet(
                self.anchors[j],
                self.positives[j],
                self.negatives[j],
                int(self.anchor_states[j]),
                int(self.negative_states[j]),
            )


@dataclass(frozen=True)
class TrainConfig:
    """Knobs of one training run; defaults follow the reference experiment
    settings (batch 32, equal loss weights, ten epochs)."""

    batch_size: int = 32
    lambda_p: float = 1.0
    lambda_n: float = 1.0
    epochs: int = 10
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    distance_epsilon: float = 1e-12

    def __post_init__(self):
        if self.lambda_p <= 0 or self.lambda_n <= 0:
            raise ValueError("lambda_p and lambda_n must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")

    @classmethod
    def from_dict(cls, doc):
        return cls(**doc)


@dataclass
class EpochLoss:
    epoch: int
    total: float
    positive: float
    negative: float


@dataclass
class OptimizerState:
    """Adam moment accumulators; SGD leaves them untouched."""

    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0

    @classmethod
    def zeros(cls, n_params):
        return cls(np.zeros(n_params), np.zeros(n_params), 0)


def _optimizer_step(params, grad, state, config):
    state.step_count += 1
    if config.optimizer == "sgd":
        return params - config.learning_rate * grad
    state.first_moment = (
        config.adam_beta1 * state.first_moment + (1 - config.adam_beta1) * grad
    )
    state.second_moment = (
        config.adam_beta2 * state.second_moment + (1 - config.adam_beta2) * grad ** 2
    )
    m_hat = state.first_moment / (1 - config.adam_beta1 ** state.step_count)
    v_hat = state.second_moment / (1 - config.adam_beta2 ** state.step_count)
    return params - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)


def sample_triplets(dataset, b, seed):
    """Draw b anchor-positive-negative triplets, deterministic given the seed.

    The anchor state is uniform over states with at least two samples, the
    positive is a distinct sample of the same state, and the negative state
    is uniform over the remaining states.
    """
    if dataset.state_count < 2:
        raise InsufficientDataError("triplets need at least 2 states")
    by_state = dataset.state_indices()
    eligible = [s for s in range(dataset.state_count) if by_state[s].size >= 2]
    if not eligible:
        raise InsufficientDataError(
            "no state has the 2+ samples needed for an anchor-positive pair"
        )
    rng = np.random.default_rng(seed)
    a_idx = np.empty(b, dtype=int)
    p_idx = np.empty(b, dtype=int)
    n_idx = np.empty(b, dtype=int)
    a_states = np.empty(b, dtype=int)
    n_states = np.empty(b, dtype=int)
    for j in range(b):
        sa = eligible[rng.integers(len(eligible))]
        pair = rng.choice(by_state[sa], size=2, replace=False)
        others = [s for s in range(dataset.state_count) if s != sa]
        sn = others[rng.integers(len(others))]
        a_idx[j], p_idx[j] = pair
        n_idx[j] = by_state[sn][rng.integers(by_state[sn].size)]
        a_states[j], n_states[j] = sa, sn
    return MiniBatch(
        dataset.signals[a_idx],
        dataset.signals[p_idx],
        dataset.signals[n_idx],
        a_states,
        n_states,
    )


def _check_state_labels(states, size):
    states = np.asarray(states, dtype=int)
    if states.size and (states.min() < 0 or states.max() >= size):
        raise ValueError(
            f"state labels must lie in [0, {size}), got range "
            f"[{states.min()}, {states.max()}]"
        )
    return states


def positive_loss(anchor_embeddings, positive_embeddings):
    """Mean squared anchor-positive distance: (1/b) sum ||f(a) - f(p)||^2."""
    diff = np.asarray(anchor_embeddings) - np.asarray(positive_embeddings)
    return float((diff ** 2).sum(axis=1).mean())


def negative_loss(anchor_embeddings, negative_embeddings, margins,
                  anchor_states, negative_states):
    """Mean squared margin mismatch: (1/b) sum (||f(a) - f(n)|| - m)^2."""
    a_states = _check_state_labels(anchor_states, margins.size)
    n_states = _check_state_labels(negative_states, margins.size)
    diff = np.asarray(anchor_embeddings) - np.asarray(negative_embeddings)
    dist = np.sqrt((diff ** 2).sum(axis=1))
    m = margins.entries[a_states, n_states]
    return float(((dist - m) ** 2).mean())


def _embedding_loss_and_grad(a_emb, p_emb, n_emb, margins, a_states, n_states, config):
    """Loss pieces and d(loss)/d(embeddings) for the three stacked roles."""
    b = a_emb.shape[0]
    dap = a_emb - p_emb
    lp = float((dap ** 2).sum(axis=1).mean())
    dan = a_emb - n_emb
    dist = np.sqrt((dan ** 2).sum(axis=1))
    m = margins.entries[a_states, n_states]
    ln = float(((dist - m) ** 2).mean())
    total = config.lambda_p * lp + config.lambda_n * ln

    g_pos = (2.0 / b) * dap
    # below distance_epsilon the margin term's gradient is defined as zero
    # (the subgradient set there contains it); this avoids 0/0
    safe = np.where(dist >= config.distance_epsilon, dist, 1.0)
    coef = np.where(dist >= config.distance_epsilon, (2.0 / b) * (dist - m) / safe, 0.0)
    g_neg = coef[:, None] * dan

    grad_a = config.lambda_p * g_pos + config.lambda_n * g_neg
    grad_p = -config.lambda_p * g_pos
    grad_n = -config.lambda_n * g_neg
    return total, lp, ln, np.vstack([grad_a, grad_p, grad_n])


def _batch_step(batch, net, margins, config, mode, step_seed):
    """One forward/backward pass over a mini-batch of triplets."""
    a_states = _check_state_labels(batch.anchor_states, margins.size)
    n_states = _check_state_labels(batch.negative_states, margins.size)
    stacked = np.vstack([batch.anchors, batch.positives, batch.negatives])
    emb, trace = forward(net, stacked, mode=mode, step_seed=step_seed)
    b = len(batch)
    total, lp, ln, emb_grad = _embedding_loss_and_grad(
        emb[:b], emb[b:2 * b], emb[2 * b:], margins, a_states, n_states, config
    )
    return total, lp, ln, backward(net, trace, emb_grad)


def total_loss(batch, net, margins, config, mode="eval", step_seed=0):
    """lambda_p * Lp + lambda_n * Ln for one mini-batch."""
    total, _, _, _ = _batch_step(batch, net, margins, config, mode, step_seed)
    return total


def loss_gradient(batch, net, margins, config, mode="eval", step_seed=0):
    """Flat parameter gradient of the total loss for one mini-batch."""
    _, _, _, grad = _batch_step(batch, net, margins, config, mode, step_seed)
    return grad


def make_triplet_loss_closure(margins, anchor_states, negative_states, config):
    """Embedding-level loss closure for gradient_check: takes the stacked
    (3b, p) embeddings and returns (loss, d loss / d embeddings)."""
    a_states = _check_state_labels(anchor_states, margins.size)
    n_states = _check_state_labels(negative_states, margins.size)
    b = a_states.shape[0]

    def closure(emb):
        total, _, _, grad = _embedding_loss_and_grad(
            emb[:b], emb[b:2 * b], emb[2 * b:], margins, a_states, n_states, config
        )
        return total, grad

    return closure


def _validate_for_training(dataset, spec, net):
    if dataset.dim != spec.input_dim:
        raise ValueError(
            f"dataset width {dataset.dim} != manifold input_dim {spec.input_dim}"
        )
    d, p = validate_layers(net.layers)
    if d != spec.input_dim or p != spec.embedding_dim:
        raise ValueError(
            f"network maps {d}->{p} but the manifold needs "
            f"{spec.input_dim}->{spec.embedding_dim}"
        )


def _state_statistics(net, dataset, state_count):
    """Per-state mean and sample covariance of eval-mode embeddings."""
    emb, _ = forward(net, dataset.signals, mode="eval")
    means = mean_embeddings_by_state(emb, dataset.state_labels, state_count)
    p = emb.shape[1]
    covs = np.zeros((state_count, p, p))
    for s in range(state_count):
        rows = emb[dataset.state_labels == s]
        if rows.shape[0] >= 2:
            covs[s] = np.cov(rows, rowvar=False)
    return means, covs


def _run_epochs(dataset, margins, config, net, epoch_offset=0):
    """Returns (trained network, per-epoch history, steps taken)."""
    params = net.params.copy()
    opt = OptimizerState.zeros(params.shape[0])
    steps_per_epoch = len(dataset) // config.batch_size
    history = []
    global_step = 0
    current = net
    for epoch in range(1, config.epochs + 1):
        sums = np.zeros(3)
        for k in range(steps_per_epoch):
            batch = sample_triplets(
                dataset, config.batch_size, (config.seed, epoch_offset + epoch, k)
            )
            total, lp, ln, grad = _batch_step(
                batch, current, margins, config, "train", global_step
            )
            if not np.isfinite(total):
                raise TrainingDivergedError(global_step)
            params = _optimizer_step(params, grad, opt, config)
            if not np.all(np.isfinite(params)):
                raise TrainingDivergedError(global_step)
            current = current.with_params(params)
            sums += (total, lp, ln)
            global_step += 1
        if steps_per_epoch:
            mean = sums / steps_per_epoch
            history.append(
                EpochLoss(epoch_offset + epoch, float(mean[0]), float(mean[1]),
                          float(mean[2]))
            )
    return current, history, global_step


def train(dataset, spec, config, net_init):
    """Train a manifold from scratch and return it with per-state statistics.

    Runs epochs x (n // batch_size) optimizer steps over freshly sampled
    triplet batches, then computes each state's mean embedding (and sample
    covariance) over the full dataset in eval mode.  Deterministic given the
    seeds; epochs=0 returns the initialized network with statistics attached.
    """
    _validate_for_training(dataset, spec, net_init)
    s = len(spec.states)
    if dataset.state_count != s:
        raise ValueError(
            f"dataset has {dataset.state_count} states but the manifold has {s}"
        )
    if np.any(dataset.state_counts() < 2):
        raise InsufficientDataError("training needs at least 2 samples per state")
    net, history, steps = _run_epochs(dataset, spec.margins, config, net_init)
    means, covs = _state_statistics(net, dataset, s)
    if not np.all(np.isfinite(means)):
        # parameters grew until eval-mode embeddings overflowed
        raise TrainingDivergedError(max(steps - 1, 0))
    return TrainedManifold(spec, net, means, covs, history=tuple(history))


def continue_train(model, new_dataset, config):
    """Resume training an existing manifold on new signals (fresh optimizer).

    The new dataset's states must be a subset of the manifold's (labels keep
    their spec meaning).  State statistics are recomputed from the new data;
    states it does not cover keep their previous means and covariances.
    """
    spec = model.spec
    _validate_for_training(new_dataset, spec, model.network)
    s = len(spec.states)
    if new_dataset.state_count > s:
        raise ValueError(
            f"dataset labels name {new_dataset.state_count} states but the "
            f"manifold has only {s}"
        )
    prior_epochs = model.history[-1].epoch if model.history else 0
    net, history, steps = _run_epochs(
        new_dataset, spec.margins, config, model.network, epoch_offset=prior_epochs
    )
    means, covs = _state_statistics(net, new_dataset, new_dataset.state_count)
    if not np.all(np.isfinite(means)):
        raise TrainingDivergedError(max(steps - 1, 0))
    full_means = model.state_means.copy()
    full_means[:new_dataset.state_count] = means
    if model.state_covariances is not None:
        full_covs = model.state_covariances.copy()
        full_covs[:new_dataset.state_count] = covs
    else:
        full_covs = None
        if new_dataset.state_count == s:
            full_covs = covs
    return TrainedManifold(
        spec, net, full_means, full_covs,
        history=tuple(model.history) + tuple(history),
    )


def dataset_loss(model, dataset, config, n_batches=16, seed=0):
    """Deterministic eval-mode loss over seeded triplet batches.

    A fixed yardstick for comparing models on the same dataset, e.g. before
    and after continued training.
    """
    totals = []
    for k in range(n_batches):
        batch = sample_triplets(dataset, config.batch_size, (seed, k))
        totals.append(total_loss(batch, model.network, model.spec.margins, config))
    return float(np.mean(totals))


def write_loss_csv(history, path):
    """One line per epoch: epoch,<k>,<total_loss>,<Lp>,<Ln>."""
    with open(path, "w") as f:
        for row in history:
            f.write(
                f"epoch,{row.epoch},{row.total!r},{row.positive!r},{row.negative!r}\n"
            )
