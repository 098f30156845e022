"""Cross-entropy objective and the Adam update."""

from __future__ import annotations

import numpy as np

from .model import ModelState


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def cross_entropy_loss(logits, labels, mask=None) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood over masked nodes and its gradient w.r.t. ``logits``."""
    logits = np.asarray(logits, dtype=float)
    labels = np.asarray(labels)
    n = logits.shape[0]
    mask = np.ones(n, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    count = int(mask.sum())
    if count == 0:
        raise ValueError("loss mask selects no nodes")
    logp = log_softmax(logits)
    idx = np.flatnonzero(mask)
    loss = -float(np.mean(logp[idx, labels[idx]]))
    grad = np.zeros_like(logits)
    p = np.exp(logp[idx])
    p[np.arange(count), labels[idx]] -= 1.0
    grad[idx] = p / count
    return loss, grad


def adam_step(state: ModelState, grads: dict, lr: float = 0.01, betas=(0.9, 0.999),
              weight_decay: float = 0.0, eps: float = 1e-8) -> ModelState:
    """One Adam step with decoupled weight decay; returns a new state."""
    b1, b2 = betas
    for name in state.params:
        g = grads.get(name)
        if g is None:
            raise ValueError(f"missing gradient for {name}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient in {name}")
    step = state.step + 1
    params, m_new, v_new = {}, {}, {}
    for name, w in state.params.items():
        g = grads[name]
        m = b1 * state.m.get(name, np.zeros_like(w)) + (1 - b1) * g
        v = b2 * state.v.get(name, np.zeros_like(w)) + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** step)
        v_hat = v / (1 - b2 ** step)
        params[name] = w - lr * (m_hat / (np.sqrt(v_hat) + eps) + weight_decay * w)
        m_new[name], v_new[name] = m, v
    return ModelState(params=params, m=m_new, v=v_new, step=step)
