"""Full-batch node-classification training loop."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..energy import EnergyReport, modified_framelet_energies
from ..graph import Graph
from .model import GraphContext, ModelConfig, ModelState, backward, init_state, model_forward, prepare_context
from .optim import adam_step, cross_entropy_loss


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.01
    epochs: int = 300
    weight_decay: float = 5e-3
    eval_every: int = 10
    betas: tuple = (0.9, 0.999)


@dataclass
class TrainResult:
    state: ModelState
    history: list = field(default_factory=list)
    energy_history: list = field(default_factory=list)
    best_epoch: int = 0

    def final_metrics(self) -> dict:
        return next(h for h in self.history if h["epoch"] == self.best_epoch)


def accuracy(logits: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    if not mask.any():
        return float("nan")
    return float(np.mean(np.argmax(logits[mask], axis=1) == labels[mask]))


def layer_energies(ctx: GraphContext, hidden: list, epsilon: float) -> list[EnergyReport]:
    return [modified_framelet_energies(ctx.system, ctx.gm, h, epsilon) for h in hidden]


def evaluate(state, config, ctx, g: Graph) -> tuple[dict, list]:
    logits, trace = model_forward(state, config, ctx, g.features, return_trace=True)
    out = {}
    for name in ("train", "val", "test"):
        mask = g.mask(name)
        out[f"{name}_acc"] = accuracy(logits, g.labels, mask)
    out["val_loss"] = cross_entropy_loss(logits, g.labels, g.mask("val"))[0] if g.mask("val").any() else float("nan")
    return out, trace.hidden


def train(g: Graph, config: ModelConfig, train_cfg: TrainConfig = TrainConfig(),
          ctx: GraphContext | None = None, track_energy: bool = True) -> TrainResult:
    """Adam on the masked cross-entropy; the best-validation-accuracy state is kept."""
    if g.labels is None or g.split is None:
        raise ValueError("training needs labels and a train/val/test split")
    train_mask = g.mask("train")
    if not train_mask.any():
        raise ValueError("split has no training nodes")
    ctx = ctx or prepare_context(g, config)
    state = init_state(config, g.feature_dim, g.num_classes)
    rng = np.random.default_rng(config.seed + 1)
    eps = config.epsilon if config.layer_kind == "eeconv" else 0.0
    result = TrainResult(state=state.copy())
    best_val = -np.inf

    for epoch in range(train_cfg.epochs + 1):
        if epoch % train_cfg.eval_every == 0 or epoch == train_cfg.epochs:
            metrics, hidden = evaluate(state, config, ctx, g)
            metrics["epoch"] = epoch
            result.history.append(metrics)
            if track_energy:
                result.energy_history.append((epoch, layer_energies(ctx, hidden, eps)))
            if metrics["val_acc"] > best_val:
                best_val = metrics["val_acc"]
                result.state = state.copy()
                result.best_epoch = epoch
        if epoch == train_cfg.epochs:
            break
        logits, trace = model_forward(state, config, ctx, g.features, training=True,
                                      rng=rng, return_trace=True)
        loss, d_logits = cross_entropy_loss(logits, g.labels, train_mask)
        grads = backward(state, config, ctx, trace, d_logits)
        state = adam_step(state, grads, lr=train_cfg.lr, betas=train_cfg.betas,
                          weight_decay=train_cfg.weight_decay)
        result.history[-1].setdefault("train_loss", loss)
    return result
