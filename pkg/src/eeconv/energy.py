"""Dirichlet energy: classical, per framelet pass, epsilon-modified; null-space distance."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .framelet import FrameletSystem, decompose
from .graph import Graph, GraphMatrices
from .spectral import eigendecompose, power_iteration_norm

RATIO_CLAMP = 1e-12
CSV_COLUMNS = ("layer", "pass_id", "energy", "energy_modified", "ratio", "epsilon")


def _as_matrix(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def _quad(m: np.ndarray, x: np.ndarray) -> float:
    return float(np.sum(x * (m @ x)))


def dirichlet_energy(gm: GraphMatrices, x) -> float:
    """``trace(x^T Delta x)`` with the augmented normalised Laplacian."""
    x = _as_matrix(x)
    if x.shape[0] != gm.num_nodes:
        raise ValueError(f"signal has {x.shape[0]} rows, graph has {gm.num_nodes} nodes")
    return _quad(gm.delta_tilde, x)


def dirichlet_energy_edges(g: Graph, x) -> float:
    """Edge-sum form of the same energy, computed straight from the edge list.

    Each undirected edge appears twice in the ordered sum, which cancels the 1/2.
    """
    x = _as_matrix(x)
    if x.shape[0] != g.num_nodes:
        raise ValueError(f"signal has {x.shape[0]} rows, graph has {g.num_nodes} nodes")
    if g.num_edges == 0:
        return 0.0
    scaled = x / np.sqrt(1.0 + g.degrees())[:, None]
    i, j = g.edges[:, 0], g.edges[:, 1]
    diff = scaled[i] - scaled[j]
    return float(np.sum(g.weights[:, None] * diff ** 2))


@dataclass(frozen=True)
class EnergyReport:
    total: float
    per_pass: tuple
    per_pass_modified: tuple
    total_modified: float
    ratios: tuple
    epsilon: float = 0.0
    degenerate: bool = False
    pass_names: Optional[tuple] = None

    @property
    def framelet_total(self) -> float:
        """Sum of the unmodified per-pass energies (equals ``total`` by conservation)."""
        return float(sum(self.per_pass))

    @property
    def delta(self) -> float:
        """Enhancement: modified minus unmodified framelet total, so exactly 0 at eps = 0."""
        return self.total_modified - self.framelet_total

    @property
    def high_fraction(self) -> float:
        return float(sum(self.ratios[1:]))

    def csv_rows(self, layer: int) -> list[dict]:
        names = self.pass_names or tuple(str(i) for i in range(len(self.per_pass)))
        return [
            {"layer": layer, "pass_id": names[i], "energy": self.per_pass[i],
             "energy_modified": self.per_pass_modified[i], "ratio": self.ratios[i],
             "epsilon": self.epsilon}
            for i in range(len(self.per_pass))
        ]


def write_energy_csv(path, reports: Iterable[EnergyReport], first_layer: int = 0) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        for layer, rep in enumerate(reports, start=first_layer):
            for row in rep.csv_rows(layer):
                w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def _report(total, per_pass, per_mod, epsilon, names) -> EnergyReport:
    degenerate = total < RATIO_CLAMP
    denom = max(total, RATIO_CLAMP)
    return EnergyReport(
        total=total,
        per_pass=tuple(per_pass),
        per_pass_modified=tuple(per_mod),
        total_modified=float(sum(per_mod)),
        ratios=tuple(e / denom for e in per_pass),
        epsilon=float(epsilon),
        degenerate=degenerate,
        pass_names=tuple(names),
    )


def modified_framelet_energies(sys: FrameletSystem, gm: GraphMatrices, x,
                               epsilon: float) -> EnergyReport:
    """Per-pass energies, and their versions under ``Delta + eps D^-1`` (low) / ``Delta - eps D^-1`` (high)."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    x = _as_matrix(x)
    if x.shape[0] != gm.num_nodes:
        raise ValueError(f"signal has {x.shape[0]} rows, graph has {gm.num_nodes} nodes")
    blocks = decompose(sys, x).blocks
    per_pass = [_quad(gm.delta_tilde, b) for b in blocks]
    dinv = gm.d_inv[:, None]
    shift = [float(np.sum(dinv * b * b)) for b in blocks]
    per_mod = [per_pass[0] + epsilon * shift[0]] + [
        e - epsilon * s for e, s in zip(per_pass[1:], shift[1:])
    ]
    return _report(dirichlet_energy(gm, x), per_pass, per_mod, epsilon, sys.pass_names())


def framelet_energies(sys: FrameletSystem, gm: GraphMatrices, x) -> EnergyReport:
    return modified_framelet_energies(sys, gm, x, 0.0)


@dataclass(frozen=True)
class SubspaceBasis:
    basis: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


def null_space_basis(gm: GraphMatrices) -> SubspaceBasis:
    """One normalised ``sqrt(D) 1_C`` column per connected component ``C``."""
    comp = gm.components
    ids = np.unique(comp)
    root = np.sqrt(gm.d_tilde)
    b = np.zeros((gm.num_nodes, len(ids)))
    for k, c in enumerate(ids):
        on = comp == c
        b[on, k] = root[on] / np.linalg.norm(root[on])
    return SubspaceBasis(basis=b)


def subspace_distance(b: SubspaceBasis, x) -> float:
    x = _as_matrix(x)
    if x.shape[0] != b.basis.shape[0]:
        raise ValueError("signal and basis disagree on the number of nodes")
    return float(np.linalg.norm(x - b.basis @ (b.basis.T @ x)))


def contraction_rate(gm: GraphMatrices) -> dict:
    """Eigenvalue factors of ``A_hat`` restricted to the complement of its null space.

    ``second_largest`` is the largest eigenvalue once the M unit eigenvalues
    are removed; ``rate`` is the largest magnitude there, which is what bounds
    the distance contraction when the negative end of the spectrum dominates.
    """
    m = null_space_basis(gm).dim
    w = eigendecompose(gm.a_hat).eigenvalues
    rest = w[: len(w) - m]
    if len(rest) == 0:
        return {"second_largest": 0.0, "rate": 0.0}
    return {"second_largest": float(rest[-1]), "rate": float(np.max(np.abs(rest)))}


def contraction_check(gm: GraphMatrices, weights, h_in, h_out, rate: dict | None = None) -> dict:
    """Compare ``d_M(h_out)`` with ``s * lambda * d_M(h_in)`` for one GCN layer."""
    weights = np.asarray(weights, dtype=float)
    h_in, h_out = _as_matrix(h_in), _as_matrix(h_out)
    if (h_in.shape[0] != gm.num_nodes or h_out.shape[0] != gm.num_nodes
            or weights.shape != (h_in.shape[1], h_out.shape[1])):
        raise ValueError("shapes of weights, h_in and h_out do not chain")
    basis = null_space_basis(gm)
    rate = rate or contraction_rate(gm)
    s = power_iteration_norm(weights)
    lhs = subspace_distance(basis, h_out)
    rhs = s * rate["rate"] * subspace_distance(basis, h_in)
    return {"lhs": lhs, "rhs": rhs, "singular_value": s, "lambda": rate["rate"],
            "second_largest": rate["second_largest"], "satisfied": lhs <= rhs + 1e-9}
