"""Per-trait binary training: stable BCE on logits, AdamW, graph mini-batches."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, backward, zero_grads
from .corpus import TRAITS
from .errors import ConfigurationError, DimensionError, NumericError
from .hiergraph import HierGraph, LevelConfig
from .model import (
    GraphBatch,
    ModelConfig,
    ModelParams,
    batch_graphs,
    forward,
    forward_batch,
    init_params,
)
from .rng import RngStream


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 8
    learning_rate: float = 3e-4
    weight_decay: float = 3e-4
    dropout: float = 0.2
    tau_start: float = 1.0
    tau_end: float | None = None  # None = constant temperature
    seed: int = 0
    level_config: LevelConfig = LevelConfig.FULL
    edge_weight_mode: str = "scale-message"
    hidden_dims: tuple[int, int] = (128, 64)
    head_dim: int = 16
    grad_clip_norm: float | None = None  # numerical safety valve, off by default

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        for name in ("learning_rate", "weight_decay", "tau_start"):
            if getattr(self, name) < 0 or (name != "weight_decay" and getattr(self, name) == 0):
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        if not (0.0 <= self.dropout < 1.0):
            raise ConfigurationError(f"dropout must lie in [0,1), got {self.dropout}")
        if isinstance(self.level_config, str):
            self.level_config = LevelConfig.from_string(self.level_config)

    def tau_at(self, epoch: int) -> float:
        """Exponential interpolation from tau_start to tau_end across epochs."""
        if self.tau_end is None or self.epochs == 1:
            return self.tau_start
        t = epoch / (self.epochs - 1)
        return self.tau_start * (self.tau_end / self.tau_start) ** t


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    eval_accuracy: list[float] | None = None
    wall_clock: list[float] = field(default_factory=list)


class AdamW:
    """Decoupled weight decay plus bias-corrected adaptive moments."""

    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        grads = []
        for p in self.params:
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if g.shape != p.data.shape:
                raise DimensionError(f"gradient shape {g.shape} != parameter {p.data.shape}")
            if not np.all(np.isfinite(g)):
                raise NumericError("NaN/Inf in gradients; step aborted")
            grads.append(g)

        self.step_count += 1
        bc1 = 1.0 - self.beta1**self.step_count
        bc2 = 1.0 - self.beta2**self.step_count
        for p, g, m, v in zip(self.params, grads, self._m, self._v):
            if self.weight_decay:
                p.data *= 1.0 - self.lr * self.weight_decay
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def bce_loss(logits: Tensor, labels) -> Tensor:
    """Mean binary cross-entropy computed directly on logits.

    Uses max(x,0) - x*y + log(1+exp(-|x|)), the overflow-free equivalent of
    applying the sigmoid and the textbook cross-entropy; the gradient per
    logit is (sigmoid(x) - y) / N.
    """
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    x = logits.data.reshape(-1)
    if x.shape != y.shape:
        raise DimensionError(f"{x.shape[0]} logits vs {y.shape[0]} labels")
    if x.size == 0:
        raise ConfigurationError("bce_loss needs at least one sample")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ConfigurationError("labels must be 0 or 1")

    loss = np.maximum(x, 0.0) - x * y + np.log1p(np.exp(-np.abs(x)))

    def bw(g):
        if logits.requires_grad:
            s = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                         np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
            logits.accumulate((float(g) * (s - y) / x.size).reshape(logits.shape))

    return ad.lift(np.asarray(loss.mean()), (logits,), bw, "bce_loss")


def make_batches(
    graphs: Sequence[HierGraph],
    labels: Sequence[bool] | np.ndarray,
    batch_size: int,
    rng: RngStream,
) -> list[tuple[GraphBatch, np.ndarray]]:
    """Shuffle, then merge consecutive graphs into disjoint unions."""
    if len(graphs) == 0:
        raise ConfigurationError("cannot batch an empty graph list")
    if len(graphs) != len(labels):
        raise DimensionError(f"{len(graphs)} graphs vs {len(labels)} labels")
    y = np.asarray(labels, dtype=np.float64)
    order = rng.permutation(len(graphs))
    batches = []
    for start in range(0, len(graphs), batch_size):
        idx = order[start : start + batch_size]
        batches.append((batch_graphs([graphs[i] for i in idx]), y[idx]))
    return batches


def _clip_grads(params: Sequence[Tensor], max_norm: float) -> None:
    total = math.sqrt(
        sum(float((p.grad * p.grad).sum()) for p in params if p.grad is not None)
    )
    if total > max_norm and total > 0:
        factor = max_norm / total
        for p in params:
            if p.grad is not None:
                p.grad *= factor


def evaluate_accuracy(params: ModelParams, graphs: Sequence[HierGraph], labels) -> float:
    """Fraction of correct eval-mode predictions over a graph set."""
    y = np.asarray(labels, dtype=np.float64)
    batch = batch_graphs(list(graphs))
    logits = forward_batch(batch, params, RngStream(0), "eval").data.reshape(-1)
    preds = logits >= 0.0  # sigmoid(logit) >= 0.5, ties positive
    return float((preds == (y == 1.0)).mean())


def train_trait(
    train_graphs: Sequence[HierGraph],
    train_labels,
    config: TrainConfig,
    trait: str,
    eval_graphs: Sequence[HierGraph] | None = None,
    eval_labels=None,
) -> tuple[ModelParams, TrainHistory]:
    """Full training run for one trait; reproducible from (data, config, seed)."""
    if trait not in TRAITS:
        raise ConfigurationError(f"unknown trait {trait!r}")
    y = np.asarray(train_labels, dtype=np.float64)
    if len(train_graphs) < 2:
        raise ConfigurationError("need at least 2 training examples")
    if len(train_graphs) != y.size:
        raise DimensionError(f"{len(train_graphs)} graphs vs {y.size} labels")
    if y.min() == y.max():
        raise ConfigurationError(f"trait {trait!r}: training set has a single class")

    feature_dim = train_graphs[0].feature_matrix().shape[1]
    model_config = ModelConfig(
        feature_dim=feature_dim,
        hidden_dims=config.hidden_dims,
        head_dim=config.head_dim,
        tau=config.tau_start,
        dropout=config.dropout,
        edge_weight_mode=config.edge_weight_mode,
    )

    root = RngStream(config.seed).split(1000 + TRAITS.index(trait))
    params = init_params(model_config, root.split(1))
    shuffle_root = root.split(2)
    noise_root = root.split(3)
    optimizer = AdamW(
        params.parameters(),
        lr=config.learning_rate,
        weight_decay=config.weight_decay,
    )

    history = TrainHistory()
    if eval_graphs is not None:
        history.eval_accuracy = []

    n = len(train_graphs)
    for epoch in range(config.epochs):
        started = time.perf_counter()
        params.mask.tau = config.tau_at(epoch)
        noise = noise_root.split(epoch)
        epoch_loss = 0.0
        for batch, batch_labels in make_batches(
            train_graphs, y, config.batch_size, shuffle_root.split(epoch)
        ):
            logits = forward_batch(batch, params, noise, "train")
            loss = bce_loss(logits, batch_labels)
            zero_grads(params.parameters())
            backward(loss)
            if config.grad_clip_norm is not None:
                _clip_grads(params.parameters(), config.grad_clip_norm)
            optimizer.step()
            epoch_loss += loss.item() * batch_labels.size
        history.train_loss.append(epoch_loss / n)
        if eval_graphs is not None:
            history.eval_accuracy.append(evaluate_accuracy(params, eval_graphs, eval_labels))
        history.wall_clock.append(time.perf_counter() - started)
    return params, history


def predict(params: ModelParams, graph: HierGraph) -> tuple[float, bool]:
    """Eval-mode probability of the positive class; ties at 0.5 are positive."""
    logit = forward(graph, params, RngStream(0), "eval").item()
    prob = 1.0 / (1.0 + math.exp(-logit)) if logit >= 0 else math.exp(logit) / (1.0 + math.exp(logit))
    return prob, prob >= 0.5
