"""Experiment commands behind the CLI. Each writes CSV/JSON into ``cfg.out`` and returns its data."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .energy import dirichlet_energy, modified_framelet_energies, write_energy_csv
from .framelet import build_system, decompose
from .graph import Graph, SbmConfig, build_matrices, homophily_level, load_graph, random_split, sbm_generate
from .nn.checks import dynamics_state
from .nn.model import ModelConfig, model_forward, prepare_context
from .nn.train import TrainConfig, layer_energies, train


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


@dataclass
class ExperimentConfig:
    out: str = "out"
    graph: Optional[str] = None
    sbm: dict = field(default_factory=dict)
    seeds: Optional[list] = None      # None: per-command default count
    default_seed_count: int = 5
    sweep_seed_count: int = 20
    mode: str = "exact"
    epsilon: float = 0.1
    epsilons: list = field(default_factory=lambda: [0.05, 0.1, 0.2])
    num_layers: int = 32
    depths: list = field(default_factory=lambda: [2, 8, 16, 32])
    models: list = field(default_factory=lambda: ["gcn", "eeconv"])
    activation: str = "identity"
    pq_ratios: list = field(default_factory=lambda: [1, 2, 5, 10])
    q: float = 0.05
    sweep_depths: list = field(default_factory=lambda: [3, 8])
    hidden_dim: int = 16
    dropout: float = 0.2
    lr: float = 0.01
    weight_decay: float = 5e-3
    epochs: int = 300
    eval_every: int = 10
    node_counts: list = field(default_factory=lambda: [128, 256, 512, 1024])
    timing_feature_dim: int = 64
    timing_repeats: int = 5

    def __post_init__(self):
        if self.seeds is not None and not self.seeds:
            raise ConfigError("seed list must be non-empty")
        if self.mode not in ("exact", "chebyshev"):
            raise ConfigError(f"mode must be exact or chebyshev, got {self.mode!r}")
        eps = [self.epsilon, *self.epsilons]
        if any(not math.isfinite(e) or e < 0 for e in eps):
            raise ConfigError(f"epsilon values must be finite and >= 0, got {eps}")
        if self.num_layers < 1 or any(d < 1 for d in self.depths):
            raise ConfigError("layer counts must be >= 1")

    @classmethod
    def from_sources(cls, path=None, **overrides) -> "ExperimentConfig":
        data = {}
        if path:
            try:
                data = json.loads(Path(path).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
            if not isinstance(data, dict):
                raise ConfigError("config file must hold a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def seed_list(self, default_count: int | None = None) -> list:
        if self.seeds is not None:
            return sorted(int(s) for s in self.seeds)
        return list(range(default_count or self.default_seed_count))

    def out_dir(self) -> Path:
        p = Path(self.out)
        try:
            p.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"output directory {p} is not writable: {exc}") from exc
        return p

    def load_graph(self, seed: int = 0) -> Graph:
        if self.graph:
            return load_graph(self.graph)
        kw = {"seed": seed, **self.sbm}
        try:
            return sbm_generate(SbmConfig(**kw))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad sbm config: {exc}") from exc


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_csv(path: Path, header: list, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row.get(k)) for k in header})


def write_json(path: Path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n")


def _log10(e: float) -> float:
    return math.log10(e) if e > 0 else float("-inf")


def trajectory_models(cfg: ExperimentConfig) -> list[tuple[str, ModelConfig]]:
    base = dict(num_layers=cfg.num_layers, activation=cfg.activation, framelet_mode=cfg.mode)
    out = [("gcn", ModelConfig("gcn", epsilon=0.0, **base)),
           ("framelet", ModelConfig("framelet", epsilon=0.0, **base))]
    for eps in cfg.epsilons:
        out.append((f"eeconv_eps{eps:g}", ModelConfig("eeconv", epsilon=eps, **base)))
    return out


def untrained_hidden(mc: ModelConfig, g: Graph, seed: int, ctx=None) -> tuple[list, object]:
    """Layer outputs ``H^(0..L)`` under unit-spectral-norm random weights."""
    ctx = ctx or prepare_context(g, mc)
    state = dynamics_state(mc, g.feature_dim, seed)
    _, trace = model_forward(state, mc, ctx, g.features, return_trace=True)
    return trace.hidden, ctx


def cmd_energy_trajectory(cfg: ExperimentConfig) -> dict:
    """Per-layer total energy and per-pass components for each model kind."""
    seed = cfg.seed_list()[0]
    g = cfg.load_graph(seed)
    if g.feature_dim == 0:
        raise ConfigError("graph has no features")
    out = cfg.out_dir()
    results = {}
    for name, mc in trajectory_models(cfg):
        hidden, ctx = untrained_hidden(mc, g, seed)
        reports = layer_energies(ctx, hidden, mc.epsilon)
        rows = [{"layer": l, "total_energy": r.total, "log10_energy": _log10(r.total),
                 "high_fraction": r.high_fraction, "degenerate": int(r.degenerate)}
                for l, r in enumerate(reports)]
        write_csv(out / f"trajectory_{name}.csv",
                  ["layer", "total_energy", "log10_energy", "high_fraction", "degenerate"], rows)
        write_energy_csv(out / f"energy_{name}.csv", reports)
        results[name] = {"energy": [r.total for r in reports],
                         "degenerate": [r.degenerate for r in reports]}
    return results


SWEEP_HEADER = ["pq_ratio", "p", "q", "seed", "homophily", "high_fraction",
                "enhancement_delta", "uninformative"]


def cmd_sbm_sweep(cfg: ExperimentConfig) -> dict:
    """High-pass energy share and deep-layer energies across p/q ratios."""
    out = cfg.out_dir()
    depth_cols = [f"energy_{k}_L{d}" for d in cfg.sweep_depths for k in ("gcn", "eeconv")]
    header = SWEEP_HEADER + depth_cols
    rows = []
    for ratio in sorted(cfg.pq_ratios):
        p = cfg.q * ratio
        for seed in cfg.seed_list(cfg.sweep_seed_count):
            sbm = {"nodes_per_block": 50, "num_blocks": 2, **cfg.sbm,
                   "p_intra": p, "q_inter": cfg.q, "seed": seed}
            g = sbm_generate(SbmConfig(**sbm))
            gm = build_matrices(g)
            sys = build_system(gm, mode=cfg.mode)
            rep = modified_framelet_energies(sys, gm, g.features, cfg.epsilon)
            row = {"pq_ratio": ratio, "p": p, "q": cfg.q, "seed": seed,
                   "homophily": homophily_level(g), "high_fraction": rep.high_fraction,
                   "enhancement_delta": rep.delta, "uninformative": int(p == cfg.q)}
            for depth in cfg.sweep_depths:
                for kind in ("gcn", "eeconv"):
                    mc = ModelConfig(kind, num_layers=depth, epsilon=cfg.epsilon if kind == "eeconv" else 0.0,
                                     activation=cfg.activation, framelet_mode=cfg.mode)
                    hidden, _ = untrained_hidden(mc, g, seed)
                    row[f"energy_{kind}_L{depth}"] = dirichlet_energy(gm, hidden[-1])
            rows.append(row)
    write_csv(out / "sbm_sweep.csv", header, rows)

    summary = []
    numeric = ["homophily", "high_fraction", "enhancement_delta"] + depth_cols
    for ratio in sorted(cfg.pq_ratios):
        sel = [r for r in rows if r["pq_ratio"] == ratio]
        s = {"pq_ratio": ratio, "n": len(sel), "uninformative": sel[0]["uninformative"]}
        for col in numeric:
            vals = np.array([r[col] for r in sel], dtype=float)
            s[f"{col}_mean"] = float(np.mean(vals))
            s[f"{col}_std"] = float(np.std(vals))
        summary.append(s)
    sum_header = ["pq_ratio", "n", "uninformative"] + [f"{c}_{k}" for c in numeric for k in ("mean", "std")]
    write_csv(out / "sbm_sweep_summary.csv", sum_header, summary)
    return {"rows": rows, "summary": summary}


def cmd_train(cfg: ExperimentConfig) -> dict:
    """Test accuracy per depth for each model kind, averaged over seeds."""
    out = cfg.out_dir()
    tc = TrainConfig(lr=cfg.lr, epochs=cfg.epochs, weight_decay=cfg.weight_decay, eval_every=cfg.eval_every)
    per_run, energy_rows = [], []
    for seed in cfg.seed_list():
        g = cfg.load_graph(seed)
        if g.split is None:
            if cfg.graph:
                raise ConfigError(f"{cfg.graph} has no train/val/test split")
            g = random_split(g, (0.6, 0.2, 0.2), seed=seed)
        for kind in cfg.models:
            for depth in sorted(cfg.depths):
                mc = ModelConfig(kind, num_layers=depth, hidden_dim=cfg.hidden_dim,
                                 epsilon=cfg.epsilon if kind == "eeconv" else 0.0,
                                 activation="relu", dropout_rate=cfg.dropout,
                                 framelet_mode=cfg.mode, seed=seed)
                res = train(g, mc, tc)
                best = res.final_metrics()
                per_run.append({"model": kind, "depth": depth, "seed": seed, **best})
                for epoch, reps in res.energy_history:
                    for layer, r in enumerate(reps):
                        energy_rows.append({"model": kind, "depth": depth, "seed": seed, "epoch": epoch,
                                            "layer": layer, "energy": r.total,
                                            "energy_modified": r.total_modified,
                                            "high_fraction": r.high_fraction})
    summary = {}
    for kind in cfg.models:
        for depth in sorted(cfg.depths):
            accs = [r["test_acc"] for r in per_run if r["model"] == kind and r["depth"] == depth]
            summary[f"{kind}_L{depth}"] = {"test_acc_mean": float(np.mean(accs)),
                                          "test_acc_std": float(np.std(accs)), "n": len(accs)}
    write_json(out / "train_metrics.json", {"summary": summary, "runs": per_run})
    write_csv(out / "train_energy.csv",
              ["model", "depth", "seed", "epoch", "layer", "energy", "energy_modified", "high_fraction"],
              energy_rows)
    return {"summary": summary, "runs": per_run}


def first_principal_component(x, max_iter: int = 5000, tol: float = 1e-14, seed: int = 0):
    """Scores of the centred rows on the leading covariance direction, via power iteration.

    Returns ``(scores, eigenvalue)`` where the eigenvalue uses the ``n - 1``
    normalisation. The direction is signed so its largest-magnitude loading is positive.
    """
    x = np.asarray(x, dtype=float)
    xc = x - x.mean(axis=0, keepdims=True)
    n = max(x.shape[0] - 1, 1)
    cov = xc.T @ xc / n
    if not np.any(cov):
        return np.zeros(x.shape[0]), 0.0
    v = np.random.default_rng(seed).standard_normal(cov.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = cov @ v
        lam_new = float(v @ w)
        v_new = w / np.linalg.norm(w)
        done = np.linalg.norm(v_new - v) < 1e-13 or abs(lam_new - lam) <= tol * abs(lam_new)
        v, lam = v_new, lam_new
        if done:
            break
    v = v * np.sign(v[np.argmax(np.abs(v))])
    return xc @ v, float(v @ cov @ v)


def cmd_transform(cfg: ExperimentConfig) -> dict:
    """Framelet coefficient dump plus first-principal-component projections per pass."""
    g = cfg.load_graph(cfg.seed_list()[0])
    out = cfg.out_dir()
    gm = build_matrices(g)
    sys = build_system(gm, mode=cfg.mode)
    coeffs = decompose(sys, g.features)
    write_json(out / "coefficients.json", coeffs.to_dict())
    names = ["input"] + sys.pass_names()
    rows = []
    proj = {}
    for name, block in zip(names, [g.features, *coeffs.blocks]):
        scores, _ = first_principal_component(block)
        proj[name] = scores
        rows += [{"node": i, "pass_id": name, "pc1": s} for i, s in enumerate(scores)]
    write_csv(out / "projection.csv", ["node", "pass_id", "pc1"], rows)
    return {"coefficients": coeffs, "projection": proj}


def cmd_timing(cfg: ExperimentConfig) -> dict:
    """Wall-clock decompose and one-layer forward time against the node count."""
    out = cfg.out_dir()
    rows = []
    for n in sorted(cfg.node_counts):
        sbm = {"nodes_per_block": n // 2, "num_blocks": 2, "p_intra": min(1.0, 10.0 / n),
               "q_inter": 1.0 / n, "feature_dim": cfg.timing_feature_dim, "seed": cfg.seed_list()[0]}
        g = sbm_generate(SbmConfig(**sbm))
        gm = build_matrices(g)
        sys = build_system(gm, mode=cfg.mode)
        x = g.features
        if cfg.mode == "chebyshev":
            # Sparse Laplacian so the recurrence costs O(nnz) per product.
            sys = replace(sys, graph_ref=_SparseView(gm))
        decompose(sys, x)
        reps = max(3, int(2e8 / (3 * n * n * x.shape[1])))
        samples = []
        for _ in range(cfg.timing_repeats):
            t0 = time.perf_counter()
            for _ in range(reps):
                decompose(sys, x)
            samples.append((time.perf_counter() - t0) / reps)
        mc = ModelConfig("eeconv", num_layers=1, hidden_dim=x.shape[1], framelet_mode=cfg.mode)
        ctx = prepare_context(gm, mc)
        state = dynamics_state(mc, x.shape[1], 0)
        t0 = time.perf_counter()
        model_forward(state, mc, ctx, x)
        fwd = time.perf_counter() - t0
        rows.append({"mode": cfg.mode, "num_nodes": n, "decompose_seconds": float(np.median(samples)),
                     "forward_seconds": fwd})
    write_csv(out / "timing.csv", ["mode", "num_nodes", "decompose_seconds", "forward_seconds"], rows)
    summary = {"mode": cfg.mode, "slope": None, "slope_flag": "single node count; slope omitted"}
    if len(rows) >= 2:
        ns = np.log([r["num_nodes"] for r in rows])
        ts = np.log([r["decompose_seconds"] for r in rows])
        summary = {"mode": cfg.mode, "slope": float(np.polyfit(ns, ts, 1)[0]), "slope_flag": None}
    write_json(out / "timing_summary.json", summary)
    return {"rows": rows, **summary}


class _SparseView:
    """Duck-typed stand-in for GraphMatrices exposing a sparse Laplacian."""

    def __init__(self, gm):
        self._gm = gm
        self.delta_tilde = gm.sparse_laplacian()

    def __getattr__(self, name):
        return getattr(self._gm, name)


def cmd_verify(cfg: ExperimentConfig, builder=None) -> dict:
    """Run the invariant suites; ``ok`` is false when any suite fails."""
    from .verify import run_suites

    kw = {} if builder is None else {"builder": builder}
    suites = run_suites(seed=cfg.seed_list()[0], epsilon=cfg.epsilon, mode=cfg.mode, **kw)
    report = {"ok": all(s["passed"] for s in suites), "suites": suites}
    write_json(cfg.out_dir() / "verify.json", report)
    return report
