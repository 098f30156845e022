"""Propagation layers: GCNConv, framelet convolution and EEConv."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..framelet import FrameletCoefficients, FrameletSystem, decompose, reconstruct
from ..graph import GraphMatrices


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(z):
    return (z > 0.0).astype(z.dtype)


def _identity(z):
    return z


def _identity_grad(z):
    return np.ones_like(z)


ACTIVATIONS = {
    "relu": (_relu, _relu_grad),
    "identity": (_identity, _identity_grad),
}


def get_activation(name: str):
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation {name!r}; choose from {sorted(ACTIVATIONS)}") from None


@dataclass(frozen=True)
class AugmentedPair:
    """Low-pass ``A_hat - eps D^-1`` and high-pass ``A_hat + eps D^-1`` adjacencies."""

    a_low: np.ndarray
    a_high: np.ndarray
    epsilon: float

    @property
    def laplacian_low(self) -> np.ndarray:
        return np.eye(self.a_low.shape[0]) - self.a_low

    @property
    def laplacian_high(self) -> np.ndarray:
        return np.eye(self.a_high.shape[0]) - self.a_high


def build_augmented_pair(gm: GraphMatrices, epsilon: float) -> AugmentedPair:
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    if epsilon == 0:
        return AugmentedPair(a_low=gm.a_hat, a_high=gm.a_hat, epsilon=0.0)
    shift = np.diag(epsilon * gm.d_inv)
    a_low, a_high = gm.a_hat - shift, gm.a_hat + shift
    a_low.setflags(write=False)
    a_high.setflags(write=False)
    return AugmentedPair(a_low=a_low, a_high=a_high, epsilon=float(epsilon))


def pass_adjacencies(sys: FrameletSystem, pair: AugmentedPair) -> list[np.ndarray]:
    return [pair.a_low] + [pair.a_high] * (sys.num_passes - 1)


def gcn_forward(gm: GraphMatrices, h, w, activation: str = "relu") -> np.ndarray:
    """``sigma(A_hat h w)``."""
    h, w = np.asarray(h, dtype=float), np.asarray(w, dtype=float)
    if h.shape[0] != gm.num_nodes or h.shape[1] != w.shape[0]:
        raise ValueError(f"cannot chain h {h.shape} with w {w.shape} on {gm.num_nodes} nodes")
    act, _ = get_activation(activation)
    return act(gm.a_hat @ h @ w)


def multipass_forward(sys: FrameletSystem, adjs: Sequence[np.ndarray], h, weights,
                      activation: str = "relu", cache: dict | None = None) -> np.ndarray:
    """Decompose, propagate each pass with its own adjacency and weight, activate, reconstruct.

    When ``cache`` is a dict it is filled with what :func:`multipass_backward` needs.
    """
    h = np.asarray(h, dtype=float)
    if len(weights) != sys.num_passes or len(adjs) != sys.num_passes:
        raise ValueError(f"expected {sys.num_passes} pass weights, got {len(weights)}")
    for w in weights:
        if w.shape[0] != h.shape[1]:
            raise ValueError(f"pass weight {w.shape} does not accept features of width {h.shape[1]}")
    act, _ = get_activation(activation)
    coeffs = decompose(sys, h).blocks
    props = [a @ c for a, c in zip(adjs, coeffs)]
    pre = [t @ w for t, w in zip(props, weights)]
    out = reconstruct(sys, FrameletCoefficients.from_blocks([act(z) for z in pre]))
    if cache is not None:
        cache.update(props=props, pre=pre)
    return out


def multipass_backward(sys: FrameletSystem, adjs, weights, activation: str, cache: dict, d_out):
    """Gradients w.r.t. the pass weights and the layer input."""
    _, dact = get_activation(activation)
    # reconstruct is sum_i W_i^T H_i, so dH_i = W_i d_out, i.e. a decomposition.
    d_blocks = decompose(sys, d_out).blocks
    d_pre = [db * dact(z) for db, z in zip(d_blocks, cache["pre"])]
    d_weights = [t.T @ dz for t, dz in zip(cache["props"], d_pre)]
    d_coeffs = [a.T @ (dz @ w.T) for a, dz, w in zip(adjs, d_pre, weights)]
    d_in = reconstruct(sys, FrameletCoefficients.from_blocks(d_coeffs))
    return d_weights, d_in


def framelet_conv_forward(sys: FrameletSystem, gm: GraphMatrices, h, weights_per_pass,
                          activation: str = "relu") -> np.ndarray:
    adjs = [gm.a_hat] * sys.num_passes
    return multipass_forward(sys, adjs, h, weights_per_pass, activation)


def eeconv_forward(sys: FrameletSystem, pair: AugmentedPair, h, weights_per_pass,
                   activation: str = "relu") -> np.ndarray:
    return multipass_forward(sys, pass_adjacencies(sys, pair), h, weights_per_pass, activation)
