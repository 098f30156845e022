"""Invariant suites run by ``eeconv verify``; each returns measured residuals and a pass flag."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .energy import (
    contraction_check,
    contraction_rate,
    dirichlet_energy_edges,
    modified_framelet_energies,
)
from .framelet import build_system, decompose, energy_gap_stats, reconstruct
from .graph import Graph, GraphMatrices, SbmConfig, build_matrices, circulant_graph, erdos_renyi, sbm_generate
from .nn.checks import eigenvalue_sandwich, equivariance_check, gradcheck
from .nn.layers import gcn_forward
from .nn.model import ModelConfig, init_state

Builder = Callable[[Graph], GraphMatrices]


def verify_corpus(seed: int = 0) -> list[tuple[str, Graph]]:
    """Small mixed corpus: paths, regular graphs, sparse random and SBM graphs."""
    out = [
        ("p2", Graph(2, np.array([[0, 1]]), np.array([[1.0], [0.0]]))),
        ("k3", Graph(3, np.array([[0, 1], [0, 2], [1, 2]]), np.array([[1.0], [-2.0], [0.5]]))),
        ("cycle12", circulant_graph(12, [1], feature_dim=3, seed=seed)),
        ("circ16", circulant_graph(16, [1, 3], feature_dim=3, seed=seed)),
    ]
    for k in range(3):
        out.append((f"er{k}", erdos_renyi(20 + 5 * k, 0.15, feature_dim=4, seed=seed + k)))
    out.append(("sbm", sbm_generate(SbmConfig(nodes_per_block=20, feature_dim=4, seed=seed))))
    return out


def _suite(name: str, residuals: list[float], tol: float, lower_is_better: bool = True,
           cases: list | None = None) -> dict:
    worst = max(residuals) if lower_is_better else min(residuals)
    passed = worst <= tol if lower_is_better else worst >= tol
    return {"suite": name, "passed": bool(passed), "worst": float(worst), "tolerance": tol,
            "num_cases": len(residuals), "cases": cases or []}


def run_suites(seed: int = 0, epsilon: float = 0.1, mode: str = "exact",
               builder: Builder | None = None) -> list[dict]:
    """Run every suite over :func:`verify_corpus`; ``builder`` is swappable for mutation tests."""
    builder = builder or build_matrices
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    rng = np.random.default_rng(seed)
    corpus = verify_corpus(seed)
    tight, recon, conserve, gap, enhance, sandwich, contraction = [], [], [], [], [], [], []
    enh_cases = []
    recon_tol = 1e-10 if mode == "exact" else 1e-6

    for name, g in corpus:
        gm = builder(g)
        sys = build_system(gm, mode=mode)
        ops = sys.dense_operators()
        frame = sum(w.T @ w for w in ops)
        tight.append(float(np.max(np.abs(frame - np.eye(g.num_nodes)))))
        for x in [g.features, rng.standard_normal((g.num_nodes, 3))]:
            c = decompose(sys, x)
            back = reconstruct(sys, c)
            recon.append(float(np.linalg.norm(back - x) / max(np.linalg.norm(x), 1e-300)))
            rep = modified_framelet_energies(sys, gm, x, epsilon)
            # The edge-sum oracle does not touch the matrices, so a bad builder shows up here.
            e_edges = dirichlet_energy_edges(g, x)
            conserve.append(abs(sum(rep.per_pass) - e_edges) / max(e_edges, 1e-12))
            stats = energy_gap_stats(c)
            gap.append(stats["gap"])
            degs = g.degrees()
            if degs.size and np.all(degs == degs[0]):
                expected = epsilon / (1.0 + degs[0]) * stats["gap"]
                enhance.append(abs(rep.delta - expected))
            enh_cases.append({"graph": name, "delta": rep.delta})
        for eps in (0.01, 0.05, 0.1, 0.5):
            sandwich.append(eigenvalue_sandwich(gm, eps)["violation"])
        rate = contraction_rate(gm)
        for _ in range(3):
            d = 3
            w = rng.standard_normal((d, d)) / np.sqrt(d)
            h = rng.standard_normal((g.num_nodes, d))
            out = gcn_forward(gm, h, w, "relu")
            r = contraction_check(gm, w, h, out, rate)
            contraction.append(r["lhs"] - r["rhs"])

    min_delta = min(c["delta"] for c in enh_cases)
    suites = [
        _suite("tightness", tight, 1e-10 if mode == "exact" else 1e-6),
        _suite("reconstruction", recon, recon_tol),
        _suite("conservation", conserve, 1e-8),
        _suite("gap", gap, -1e-12, lower_is_better=False),
        _suite("enhancement_regular", enhance, 1e-10),
        _suite("enhancement_nonnegative", [min_delta], -1e-12, lower_is_better=False, cases=enh_cases),
        _suite("sandwich", sandwich, 1e-9),
        _suite("contraction", contraction, 1e-9),
    ]

    small = erdos_renyi(6, 0.5, feature_dim=3, seed=seed)
    eq, gc = [], []
    for kind in ("gcn", "framelet", "eeconv"):
        mc = ModelConfig(kind, num_layers=2, hidden_dim=4, epsilon=epsilon, framelet_mode=mode, seed=seed)
        g16 = erdos_renyi(16, 0.25, feature_dim=3, seed=seed + 7)
        state = init_state(mc, 3, 2)
        for _ in range(5):
            eq.append(equivariance_check(mc, g16, rng.permutation(16), state=state))
        gc.append(gradcheck(mc.replace(hidden_dim=3), small)["max_rel_error"])
    suites += [_suite("equivariance", eq, 1e-8), _suite("gradcheck", gc, 1e-4)]
    return suites
