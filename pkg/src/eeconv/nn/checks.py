"""Structural checks on the propagation model: equivariance, gradients, depth dynamics."""

from __future__ import annotations

import numpy as np

from ..energy import dirichlet_energy
from ..graph import Graph, GraphMatrices, permute_graph, permute_rows
from ..spectral import eigendecompose
from .layers import build_augmented_pair
from .model import (
    GraphContext,
    ModelConfig,
    ModelState,
    backward,
    init_state,
    model_forward,
    prepare_context,
)
from .optim import cross_entropy_loss


def equivariance_check(config: ModelConfig, g: Graph, perm, state: ModelState | None = None,
                       num_classes: int | None = None) -> float:
    """``max |f(Px, PG) - P f(x, G)|`` with the framelet system rebuilt on the permuted graph."""
    c = num_classes or g.num_classes or 2
    state = state or init_state(config, g.feature_dim, c)
    out = model_forward(state, config, prepare_context(g, config), g.features)
    gp = permute_graph(g, perm)
    out_p = model_forward(state, config, prepare_context(gp, config), gp.features)
    return float(np.max(np.abs(out_p - permute_rows(out, perm))))


def eigenvalue_sandwich(gm: GraphMatrices, epsilon: float) -> dict:
    """Worst violation of ``lam_k(A_low) <= lam_k(A_hat) <= lam_k(A_high)`` over all k.

    Eigenvalues are compared in ascending order; a positive ``violation``
    means some k breaks the ordering by that much.
    """
    pair = build_augmented_pair(gm, epsilon)
    lo = eigendecompose(pair.a_low).eigenvalues
    mid = eigendecompose(gm.a_hat).eigenvalues
    hi = eigendecompose(pair.a_high).eigenvalues
    violation = max(float(np.max(lo - mid)), float(np.max(mid - hi)), 0.0)
    return {"low": lo, "mid": mid, "high": hi, "violation": violation}


def gradcheck(config: ModelConfig, g: Graph, state: ModelState | None = None,
              step: float = 1e-5, floor: float = 1e-6) -> dict:
    """Analytic gradients against central differences on every parameter entry.

    Relative error per entry is ``|a - f| / max(|a|, |f|, floor)``; the result
    holds the worst entry per parameter and overall.
    """
    config = config.replace(dropout_rate=0.0)
    ctx = prepare_context(g, config)
    labels = g.labels if g.labels is not None else np.arange(g.num_nodes) % 2
    c = int(labels.max()) + 1
    state = state or init_state(config, g.feature_dim, c)

    def loss_of(st):
        return cross_entropy_loss(model_forward(st, config, ctx, g.features), labels)[0]

    logits, trace = model_forward(state, config, ctx, g.features, return_trace=True)
    _, d_logits = cross_entropy_loss(logits, labels)
    grads = backward(state, config, ctx, trace, d_logits)
    per_param = {}
    for name, w in state.params.items():
        fd = np.zeros_like(w)
        for idx in np.ndindex(w.shape):
            orig = w[idx]
            w[idx] = orig + step
            lp = loss_of(state)
            w[idx] = orig - step
            lm = loss_of(state)
            w[idx] = orig
            fd[idx] = (lp - lm) / (2 * step)
        a = grads[name]
        rel = np.abs(a - fd) / np.maximum(np.maximum(np.abs(a), np.abs(fd)), floor)
        per_param[name] = float(rel.max())
    return {"max_rel_error": max(per_param.values()), "per_param": per_param}


def random_orthogonal(rng: np.random.Generator, d: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))[None, :]


def dynamics_state(config: ModelConfig, dim: int, seed: int) -> ModelState:
    """Untrained weights for depth experiments: identity projections, orthogonal layers.

    Every layer weight has unit spectral norm, so any decay of the energy is
    due to propagation rather than to the weights.
    """
    rng = np.random.default_rng(seed)
    params = {"input": np.eye(dim), "readout": np.eye(dim)}
    for layer in range(config.num_layers):
        for i in range(config.passes_per_layer):
            params[f"layer{layer}.pass{i}"] = random_orthogonal(rng, dim)
    return ModelState(params=params)


def energy_trajectory(config: ModelConfig, g: Graph, seed: int = 0,
                      ctx: GraphContext | None = None) -> tuple[list, list]:
    """Dirichlet energy of ``H^(0) .. H^(L)`` under untrained dynamics weights."""
    ctx = ctx or prepare_context(g, config)
    state = dynamics_state(config, g.feature_dim, seed)
    _, trace = model_forward(state, config, ctx, g.features, return_trace=True)
    return [dirichlet_energy(ctx.gm, h) for h in trace.hidden], trace.hidden
