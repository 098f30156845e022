"""Undecimated tight framelet system on a graph: filter banks, transforms, energy gap."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .graph import DENSE_LIMIT, GraphMatrices
from .spectral import (
    EigenDecomposition,
    chebyshev_apply_many,
    chebyshev_fit,
    eigendecompose,
    lambda_max_estimate,
)

Response = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class FilterBank:
    """Refinement mask ``a_hat`` and high-pass masks ``b_hats`` as functions of frequency."""

    a_hat: Response
    b_hats: tuple
    name: str = "haar"

    @property
    def num_high(self) -> int:
        return len(self.b_hats)

    def partition_residual(self, grid=None) -> float:
        grid = np.linspace(0.0, 2 * np.pi, 1000) if grid is None else grid
        total = self.a_hat(grid) ** 2 + sum(b(grid) ** 2 for b in self.b_hats)
        return float(np.max(np.abs(total - 1.0)))


def haar_bank() -> FilterBank:
    return FilterBank(a_hat=lambda x: np.cos(x / 2), b_hats=(lambda x: np.sin(x / 2),), name="haar")


def linear_bank() -> FilterBank:
    """Piecewise-linear spline bank with two high-pass filters."""
    return FilterBank(
        a_hat=lambda x: np.cos(x / 2) ** 2,
        b_hats=(lambda x: np.sin(x) / np.sqrt(2.0), lambda x: np.sin(x / 2) ** 2),
        name="linear",
    )


HAAR = haar_bank()

# The three responses of the default Haar system (one high-pass, two scales).
PINNED_HAAR_RESPONSES = (
    lambda lam: np.cos(lam / 8) * np.cos(lam / 16),
    lambda lam: np.sin(lam / 16),
    lambda lam: np.sin(lam / 8) * np.cos(lam / 16),
)


def dilation_responses(bank: FilterBank, num_scales: int, dilation: int) -> list[Response]:
    """Spectral responses of the dilation chain, low-pass first then (r, j) r-major.

    low:    prod_{k<J} a(2^{k-K} lam)
    (r, j): b_r(2^{j-1-K} lam) * prod_{k<j-1} a(2^{k-K} lam)
    """
    a = bank.a_hat
    J, K = num_scales, dilation

    def low(lam):
        out = np.ones_like(np.asarray(lam, dtype=float))
        for k in range(J):
            out = out * a(2.0 ** (k - K) * lam)
        return out

    def high(b, j):
        def g(lam):
            out = b(2.0 ** (j - 1 - K) * lam)
            for k in range(j - 1):
                out = out * a(2.0 ** (k - K) * lam)
            return out
        return g

    return [low] + [high(b, j) for b in bank.b_hats for j in range(1, J + 1)]


@dataclass(frozen=True)
class FrameletCoefficients:
    low: np.ndarray
    highs: tuple

    @property
    def blocks(self) -> list[np.ndarray]:
        return [self.low, *self.highs]

    @classmethod
    def from_blocks(cls, blocks: Sequence[np.ndarray]) -> "FrameletCoefficients":
        return cls(low=blocks[0], highs=tuple(blocks[1:]))

    def to_dict(self) -> dict:
        names = [f"g{i}" for i in range(len(self.blocks))]
        return {"low": self.low.tolist(), "highs": [h.tolist() for h in self.highs],
                "responses": names}


@dataclass(frozen=True)
class FrameletSystem:
    """Realised transform operators ``W_i = g_i(Delta)`` over one graph.

    In exact mode ``operators`` is a dense ``(P, N, N)`` stack; in chebyshev
    mode it is a tuple of :class:`ChebyshevFilter`, one per response.
    """

    num_high: int
    num_scales: int
    dilation_base: int
    responses: tuple
    mode: str
    operators: object
    graph_ref: GraphMatrices = field(repr=False)
    bank_name: str = "haar"
    eig: Optional[EigenDecomposition] = field(default=None, repr=False)

    @property
    def num_passes(self) -> int:
        return len(self.responses)

    @property
    def num_nodes(self) -> int:
        return self.graph_ref.num_nodes

    @property
    def is_default_haar(self) -> bool:
        return self.bank_name == "haar" and self.num_scales == 2 and self.dilation_base == 3

    def pass_names(self) -> list[str]:
        names = ["low"]
        for r in range(1, self.num_high + 1):
            names += [f"high_r{r}_j{j}" for j in range(1, self.num_scales + 1)]
        return names

    def dense_operators(self) -> np.ndarray:
        """Operators as a dense stack (materialised from the filters in chebyshev mode)."""
        if self.mode == "exact":
            return self.operators
        eye = np.eye(self.num_nodes)
        return np.stack(self._apply_all(eye))

    def _apply_all(self, x: np.ndarray) -> list[np.ndarray]:
        if self.mode == "exact":
            return list(np.matmul(self.operators, x))
        return chebyshev_apply_many(self.operators, self.graph_ref.delta_tilde, x,
                                    check_domain=False)

    def _check_rows(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[0] != self.num_nodes:
            raise ValueError(f"signal has {x.shape[0]} rows, system has {self.num_nodes} nodes")
        return x


def build_system(gm: GraphMatrices, bank: FilterBank | None = None, n: int | None = None,
                 J: int = 2, mode: str = "exact", degree: int = 16, K: int | None = None,
                 eig: EigenDecomposition | None = None) -> FrameletSystem:
    """Build the framelet system over ``gm``.

    With the Haar bank, two scales and the default dilation the three pinned
    Haar responses are used verbatim. Any other configuration follows the
    dilation chain with ``K = max(3, ceil(log2(lambda_max / pi)))`` and is
    checked for tightness before being returned.
    """
    bank = bank or HAAR
    if n is None:
        n = bank.num_high
    if n != bank.num_high:
        raise ValueError(f"bank {bank.name!r} has {bank.num_high} high-pass filters, n={n}")
    if J < 1 or n < 1:
        raise ValueError("J and n must be >= 1")
    if mode not in ("exact", "chebyshev"):
        raise ValueError(f"mode must be 'exact' or 'chebyshev', got {mode!r}")
    N = gm.num_nodes
    if mode == "exact" and N > DENSE_LIMIT:
        raise ValueError(f"exact mode is limited to {DENSE_LIMIT} nodes (got {N}); use mode='chebyshev'")

    if bank.name == "haar" and J == 2 and K in (None, 3):
        K = 3
        responses = list(PINNED_HAAR_RESPONSES)
    else:
        if K is None:
            lmax = lambda_max_estimate(gm.delta_tilde)
            K = max(3, math.ceil(math.log2(max(lmax, 1e-12) / math.pi)))
        responses = dilation_responses(bank, J, K)
    grid = np.linspace(0.0, 2.0, 1000)
    resid = np.max(np.abs(sum(g(grid) ** 2 for g in responses) - 1.0))
    if resid > 1e-12:
        raise ValueError(f"filter bank {bank.name!r} is not tight: max |sum g^2 - 1| = {resid:.3e}")

    if mode == "exact":
        if eig is None:
            eig = eigendecompose(gm.delta_tilde)
        lam = np.clip(eig.eigenvalues, 0.0, None)
        ops = np.stack([eig.apply(lambda _l, g=g: g(lam)) for g in responses])
        ops = 0.5 * (ops + np.transpose(ops, (0, 2, 1)))
        ops.setflags(write=False)
        operators = ops
    else:
        lmax = lambda_max_estimate(gm.delta_tilde, tol=1e-3)
        upper = max(2.0, lmax)
        operators = tuple(chebyshev_fit(g, degree, upper, target=f"g{i}") for i, g in enumerate(responses))
        eig = None

    return FrameletSystem(num_high=n, num_scales=J, dilation_base=K, responses=tuple(responses),
                          mode=mode, operators=operators, graph_ref=gm, bank_name=bank.name, eig=eig)


def decompose(sys: FrameletSystem, x) -> FrameletCoefficients:
    x = sys._check_rows(x)
    return FrameletCoefficients.from_blocks(sys._apply_all(x))


def reconstruct(sys: FrameletSystem, c: FrameletCoefficients) -> np.ndarray:
    """Synthesis ``sum_i W_i^T c_i``."""
    blocks = c.blocks
    if len(blocks) != sys.num_passes:
        raise ValueError(f"expected {sys.num_passes} coefficient blocks, got {len(blocks)}")
    shape = blocks[0].shape
    if shape[0] != sys.num_nodes or any(b.shape != shape for b in blocks):
        raise ValueError("coefficient blocks must all be N x d for the system's N")
    if sys.mode == "exact":
        ops = sys.operators
        out = ops[0].T @ blocks[0]
        for w, b in zip(ops[1:], blocks[1:]):
            out = out + w.T @ b
        return out
    # Chebyshev operators are polynomials in a symmetric matrix, hence symmetric.
    out = None
    for f, b in zip(sys.operators, blocks):
        y = chebyshev_apply_many([f], sys.graph_ref.delta_tilde, b, check_domain=False)[0]
        out = y if out is None else out + y
    return out


def energy_gap_stats(c: FrameletCoefficients) -> dict:
    """Squared norms of the blocks and ``gap = |V0|^2 - sum |W|^2``."""
    low = float(np.sum(c.low ** 2))
    highs = [float(np.sum(h ** 2)) for h in c.highs]
    return {"low_sq_norm": low, "high_sq_norms": highs, "gap": low - sum(highs)}
