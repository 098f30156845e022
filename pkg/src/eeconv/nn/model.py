"""Stacked propagation model with an input projection, a linear readout and manual backprop."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..framelet import FrameletSystem, build_system
from ..graph import Graph, GraphMatrices, build_matrices
from .layers import (
    AugmentedPair,
    build_augmented_pair,
    get_activation,
    multipass_backward,
    multipass_forward,
    pass_adjacencies,
)

LAYER_KINDS = ("gcn", "framelet", "eeconv")


@dataclass(frozen=True)
class ModelConfig:
    layer_kind: str = "eeconv"
    num_layers: int = 2
    hidden_dim: int = 16
    epsilon: float = 0.05
    activation: str = "relu"
    dropout_rate: float = 0.0
    framelet_mode: str = "exact"
    chebyshev_degree: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.layer_kind not in LAYER_KINDS:
            raise ValueError(f"layer_kind must be one of {LAYER_KINDS}, got {self.layer_kind!r}")
        if self.num_layers < 1 or self.hidden_dim < 1:
            raise ValueError("num_layers and hidden_dim must be >= 1")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        get_activation(self.activation)

    @property
    def passes_per_layer(self) -> int:
        return 1 if self.layer_kind == "gcn" else 3

    def replace(self, **changes) -> "ModelConfig":
        return ModelConfig(**{**asdict(self), **changes})


@dataclass
class ModelState:
    """Parameters keyed ``input``, ``layer{l}.pass{i}``, ``readout`` plus Adam moments."""

    params: dict
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0

    def copy(self) -> "ModelState":
        cp = lambda d: {k: a.copy() for k, a in d.items()}
        return ModelState(cp(self.params), cp(self.m), cp(self.v), self.step)

    def layer_weights(self, layer: int) -> list[np.ndarray]:
        out, i = [], 0
        while f"layer{layer}.pass{i}" in self.params:
            out.append(self.params[f"layer{layer}.pass{i}"])
            i += 1
        return out


@dataclass(frozen=True)
class GraphContext:
    """Everything a forward pass needs from the graph, built once per graph."""

    gm: GraphMatrices
    system: FrameletSystem
    pair: AugmentedPair
    adjs: tuple


def prepare_context(g: Graph | GraphMatrices, config: ModelConfig) -> GraphContext:
    gm = g if isinstance(g, GraphMatrices) else build_matrices(g)
    sys = build_system(gm, mode=config.framelet_mode, degree=config.chebyshev_degree)
    eps = config.epsilon if config.layer_kind == "eeconv" else 0.0
    pair = build_augmented_pair(gm, eps)
    if config.layer_kind == "gcn":
        adjs = (gm.a_hat,)
    elif config.layer_kind == "framelet":
        adjs = tuple([gm.a_hat] * sys.num_passes)
    else:
        adjs = tuple(pass_adjacencies(sys, pair))
    return GraphContext(gm=gm, system=sys, pair=pair, adjs=adjs)


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_state(config: ModelConfig, in_dim: int, num_classes: int) -> ModelState:
    rng = np.random.default_rng(config.seed)
    h = config.hidden_dim
    params = {"input": glorot(rng, in_dim, h)}
    for layer in range(config.num_layers):
        for i in range(config.passes_per_layer):
            params[f"layer{layer}.pass{i}"] = glorot(rng, h, h)
    params["readout"] = glorot(rng, h, num_classes)
    return ModelState(params=params)


@dataclass
class ForwardTrace:
    step: int
    x: np.ndarray
    hidden: list                       # H^(0) .. H^(L)
    layer_inputs: list = field(default_factory=list)
    masks: list = field(default_factory=list)
    caches: list = field(default_factory=list)
    logits: Optional[np.ndarray] = None


def _check_chain(state: ModelState, config: ModelConfig, x: np.ndarray):
    w_in = state.params.get("input")
    if w_in is None or w_in.shape[0] != x.shape[1]:
        raise ValueError("input projection does not match the feature width")
    h = w_in.shape[1]
    for layer in range(config.num_layers):
        ws = state.layer_weights(layer)
        if len(ws) != config.passes_per_layer or any(w.shape != (h, h) for w in ws):
            raise ValueError(f"layer {layer} weights do not match config {config.layer_kind}")
    if state.params["readout"].shape[0] != h:
        raise ValueError("readout does not match the hidden width")


def model_forward(state: ModelState, config: ModelConfig, ctx: GraphContext, x,
                  training: bool = False, rng: np.random.Generator | None = None,
                  return_trace: bool = False):
    """Logits for every node; with ``return_trace`` also the cached intermediates."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != ctx.gm.num_nodes:
        raise ValueError(f"features have {x.shape[0]} rows, graph has {ctx.gm.num_nodes}")
    _check_chain(state, config, x)
    act, _ = get_activation(config.activation)
    p = config.dropout_rate if training else 0.0
    if p > 0 and rng is None:
        raise ValueError("training-mode dropout needs an rng")

    h = x @ state.params["input"]
    trace = ForwardTrace(step=state.step, x=x, hidden=[h])
    for layer in range(config.num_layers):
        mask = None
        if p > 0:
            mask = (rng.random(h.shape) >= p) / (1.0 - p)
            h = h * mask
        ws = state.layer_weights(layer)
        cache: dict = {}
        if config.layer_kind == "gcn":
            prop = ctx.gm.a_hat @ h
            pre = prop @ ws[0]
            out = act(pre)
            cache.update(props=[prop], pre=[pre])
        else:
            out = multipass_forward(ctx.system, ctx.adjs, h, ws, config.activation, cache)
        trace.layer_inputs.append(h)
        trace.masks.append(mask)
        trace.caches.append(cache)
        h = out
        trace.hidden.append(h)
    logits = h @ state.params["readout"]
    trace.logits = logits
    return (logits, trace) if return_trace else logits


def backward(state: ModelState, config: ModelConfig, ctx: GraphContext, trace: ForwardTrace,
             d_logits) -> dict:
    """Exact gradients of the loss w.r.t. every parameter, given ``dL/dlogits``."""
    if trace.step != state.step:
        raise RuntimeError(
            f"stale forward trace: recorded at step {trace.step}, state is at step {state.step}"
        )
    d_logits = np.asarray(d_logits, dtype=float)
    if d_logits.shape != trace.logits.shape:
        raise ValueError("d_logits shape does not match the traced logits")
    _, dact = get_activation(config.activation)
    grads = {"readout": trace.hidden[-1].T @ d_logits}
    dh = d_logits @ state.params["readout"].T
    for layer in reversed(range(config.num_layers)):
        ws = state.layer_weights(layer)
        cache = trace.caches[layer]
        if config.layer_kind == "gcn":
            dz = dh * dact(cache["pre"][0])
            d_ws = [cache["props"][0].T @ dz]
            dh = ctx.gm.a_hat.T @ (dz @ ws[0].T)
        else:
            d_ws, dh = multipass_backward(ctx.system, ctx.adjs, ws, config.activation, cache, dh)
        for i, dw in enumerate(d_ws):
            grads[f"layer{layer}.pass{i}"] = dw
        if trace.masks[layer] is not None:
            dh = dh * trace.masks[layer]
    grads["input"] = trace.x.T @ dh
    return grads


def save_checkpoint(state: ModelState, config: ModelConfig, path) -> None:
    obj = {
        "config": asdict(config),
        "step": state.step,
        "params": {k: {"shape": list(a.shape), "data": a.ravel().tolist()} for k, a in state.params.items()},
        "adam_m": {k: a.ravel().tolist() for k, a in state.m.items()},
        "adam_v": {k: a.ravel().tolist() for k, a in state.v.items()},
    }
    Path(path).write_text(json.dumps(obj, allow_nan=False))


def load_checkpoint(path) -> tuple[ModelState, ModelConfig]:
    obj = json.loads(Path(path).read_text())
    config = ModelConfig(**obj["config"])
    params = {k: np.array(v["data"], dtype=float).reshape(v["shape"]) for k, v in obj["params"].items()}
    shapes = {k: a.shape for k, a in params.items()}
    m = {k: np.array(v, dtype=float).reshape(shapes[k]) for k, v in obj["adam_m"].items()}
    v = {k: np.array(x, dtype=float).reshape(shapes[k]) for k, x in obj["adam_v"].items()}
    return ModelState(params=params, m=m, v=v, step=obj["step"]), config
