"""Graph data model, augmented matrices, SBM generation, homophily and JSON I/O."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

SPLIT_NAMES = ("train", "val", "test")


class GraphFormatError(ValueError):
    """Raised when a graph file or graph construction is malformed."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected weighted graph with node features.

    Edges are stored once per undirected pair, canonicalised to ``i < j`` and
    sorted, so two graphs with the same structure compare equal regardless of
    the order in which edges were supplied.
    """

    num_nodes: int
    edges: np.ndarray
    features: np.ndarray
    weights: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None
    split: Optional[np.ndarray] = None
    num_classes: Optional[int] = None

    def __post_init__(self):
        n = int(self.num_nodes)
        if n < 1:
            raise GraphFormatError(f"num_nodes must be >= 1, got {n}")
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        weights = (
            np.ones(len(edges)) if self.weights is None
            else np.asarray(self.weights, dtype=float).reshape(-1)
        )
        if len(weights) != len(edges):
            raise GraphFormatError(f"{len(weights)} weights for {len(edges)} edges")
        for k, (i, j) in enumerate(edges):
            if not (0 <= i < n and 0 <= j < n):
                raise GraphFormatError(
                    f"edges[{k}] = [{i}, {j}]: node index out of range [0, {n})"
                )
            if i == j:
                raise GraphFormatError(f"edges[{k}] = [{i}, {j}]: self-loops are not stored")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise GraphFormatError("edge weights must be finite and nonnegative")

        lo, hi = np.minimum(edges[:, 0], edges[:, 1]), np.maximum(edges[:, 0], edges[:, 1])
        order = np.lexsort((hi, lo))
        edges = np.stack([lo[order], hi[order]], axis=1) if len(edges) else edges
        weights = weights[order]
        if len(edges) > 1:
            dup = np.all(edges[1:] == edges[:-1], axis=1)
            if dup.any():
                k = int(np.argmax(dup))
                raise GraphFormatError(f"duplicate undirected edge {edges[k].tolist()}")

        features = np.asarray(self.features, dtype=float)
        if features.ndim == 1:
            features = features[:, None]
        if features.ndim != 2 or features.shape[0] != n:
            raise GraphFormatError(
                f"features must have {n} rows, got shape {features.shape}"
            )
        if not np.all(np.isfinite(features)):
            raise GraphFormatError("features contain NaN or Inf")

        labels = self.labels
        num_classes = self.num_classes
        if labels is not None:
            labels = np.asarray(labels, dtype=np.int64).reshape(-1)
            if len(labels) != n:
                raise GraphFormatError(f"labels must have {n} entries, got {len(labels)}")
            if np.any(labels < 0):
                raise GraphFormatError("labels must be nonnegative")
            if num_classes is None:
                num_classes = int(labels.max()) + 1
            elif np.any(labels >= num_classes):
                raise GraphFormatError(f"label >= num_classes={num_classes}")

        split = self.split
        if split is not None:
            split = np.asarray(split, dtype=object).reshape(-1)
            if len(split) != n:
                raise GraphFormatError(f"split must have {n} entries, got {len(split)}")
            bad = [s for s in split if s not in SPLIT_NAMES]
            if bad:
                raise GraphFormatError(f"unknown split name {bad[0]!r}; expected one of {SPLIT_NAMES}")

        object.__setattr__(self, "num_nodes", n)
        object.__setattr__(self, "edges", _frozen(edges))
        object.__setattr__(self, "weights", _frozen(weights))
        object.__setattr__(self, "features", _frozen(features))
        object.__setattr__(self, "labels", None if labels is None else _frozen(labels))
        object.__setattr__(self, "split", None if split is None else _frozen(split))
        object.__setattr__(self, "num_classes", num_classes)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def mask(self, name: str) -> np.ndarray:
        if self.split is None:
            raise ValueError("graph has no split")
        if name == "validation":
            name = "val"
        return np.asarray(self.split == name, dtype=bool)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.num_nodes, self.num_nodes))
        if self.num_edges:
            i, j = self.edges[:, 0], self.edges[:, 1]
            a[i, j] = self.weights
            a[j, i] = self.weights
        return a

    def degrees(self) -> np.ndarray:
        d = np.zeros(self.num_nodes)
        np.add.at(d, self.edges[:, 0], self.weights)
        np.add.at(d, self.edges[:, 1], self.weights)
        return d

    def components(self) -> np.ndarray:
        """Connected-component id per node."""
        n = self.num_nodes
        if self.num_edges == 0:
            return np.arange(n)
        a = csr_matrix((np.ones(self.num_edges), (self.edges[:, 0], self.edges[:, 1])), shape=(n, n))
        _, comp = connected_components(a, directed=False)
        return comp

    def is_connected(self) -> bool:
        return len(np.unique(self.components())) == 1

    def replace(self, **changes) -> "Graph":
        kw = dict(
            num_nodes=self.num_nodes, edges=self.edges, features=self.features,
            weights=self.weights, labels=self.labels, split=self.split,
            num_classes=self.num_classes,
        )
        kw.update(changes)
        return Graph(**kw)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented

        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return a.shape == b.shape and bool(np.all(a == b))

        return (
            self.num_nodes == other.num_nodes
            and same(self.edges, other.edges)
            and same(self.weights, other.weights)
            and same(self.features, other.features)
            and same(self.labels, other.labels)
            and same(self.split, other.split)
        )

    __hash__ = None


@dataclass(frozen=True)
class GraphMatrices:
    """Dense augmented adjacency / Laplacian matrices of a graph.

    ``d_tilde`` holds the diagonal of the augmented degree matrix as a vector.
    """

    a_tilde: np.ndarray
    d_tilde: np.ndarray
    a_hat: np.ndarray
    delta_tilde: np.ndarray
    components: np.ndarray = field(repr=False)

    @property
    def num_nodes(self) -> int:
        return self.a_tilde.shape[0]

    @property
    def d_inv(self) -> np.ndarray:
        return 1.0 / self.d_tilde

    def sparse_laplacian(self) -> csr_matrix:
        return csr_matrix(self.delta_tilde)


# Above this size dense N x N operators are refused; chebyshev mode is required.
DENSE_LIMIT = 5000


def build_matrices(g: Graph) -> GraphMatrices:
    """Augmented adjacency ``A + I``, its degrees, ``D^-1/2 (A+I) D^-1/2`` and ``I - A_hat``."""
    n = g.num_nodes
    if g.num_edges and (g.edges.max() >= n or g.edges.min() < 0):
        raise GraphFormatError("edge index out of range")
    a_tilde = g.adjacency() + np.eye(n)
    d_tilde = a_tilde.sum(axis=1)
    s = 1.0 / np.sqrt(d_tilde)
    a_hat = s[:, None] * a_tilde * s[None, :]
    a_hat = 0.5 * (a_hat + a_hat.T)
    delta = np.eye(n) - a_hat
    return GraphMatrices(
        a_tilde=_frozen(a_tilde),
        d_tilde=_frozen(d_tilde),
        a_hat=_frozen(a_hat),
        delta_tilde=_frozen(delta),
        components=_frozen(g.components()),
    )


@dataclass(frozen=True)
class SbmConfig:
    nodes_per_block: int = 50
    num_blocks: int = 2
    p_intra: float = 0.5
    q_inter: float = 0.05
    feature_dim: int = 16
    feature_means: Optional[Sequence[float]] = None
    seed: int = 0

    def __post_init__(self):
        if self.num_blocks < 2:
            raise ValueError("num_blocks must be >= 2")
        if self.nodes_per_block < 1 or self.feature_dim < 1:
            raise ValueError("nodes_per_block and feature_dim must be >= 1")
        for name in ("p_intra", "q_inter"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.feature_means is not None and len(self.feature_means) != self.num_blocks:
            raise ValueError("feature_means needs one entry per block")

    def means(self) -> np.ndarray:
        if self.feature_means is not None:
            return np.asarray(self.feature_means, dtype=float)
        return np.where(np.arange(self.num_blocks) % 2 == 0, 0.5, -0.5)


def sbm_generate(cfg: SbmConfig) -> Graph:
    """Sample a stochastic block model graph with Gaussian block features."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.nodes_per_block * cfg.num_blocks
    labels = np.repeat(np.arange(cfg.num_blocks), cfg.nodes_per_block)
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], cfg.p_intra, cfg.q_inter)
    keep = rng.random(len(iu)) < prob
    edges = np.stack([iu[keep], ju[keep]], axis=1)
    features = rng.standard_normal((n, cfg.feature_dim)) + cfg.means()[labels][:, None]
    return Graph(num_nodes=n, edges=edges, features=features, labels=labels,
                 num_classes=cfg.num_blocks)


def circulant_graph(n: int, offsets: Sequence[int], feature_dim: int = 1, seed: int = 0) -> Graph:
    """Node ``i`` joined to ``i +- k mod n`` for each offset; regular by construction."""
    pairs = set()
    for k in offsets:
        if not 0 < k <= n // 2:
            raise ValueError(f"offset {k} must lie in (0, n/2]")
        for i in range(n):
            j = (i + k) % n
            pairs.add((min(i, j), max(i, j)))
    rng = np.random.default_rng(seed)
    return Graph(num_nodes=n, edges=np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2),
                 features=rng.standard_normal((n, feature_dim)))


def erdos_renyi(n: int, p: float, feature_dim: int = 1, seed: int = 0) -> Graph:
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    return Graph(num_nodes=n, edges=np.stack([iu[keep], ju[keep]], axis=1),
                 features=rng.standard_normal((n, feature_dim)))


def random_split(g: Graph, fractions=(0.6, 0.2, 0.2), seed: int = 0) -> Graph:
    """Assign a seeded random train/val/test split with the given fractions."""
    if not math.isclose(sum(fractions), 1.0):
        raise ValueError("split fractions must sum to 1")
    rng = np.random.default_rng(seed)
    n = g.num_nodes
    order = rng.permutation(n)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    split = np.empty(n, dtype=object)
    split[order[:n_train]] = "train"
    split[order[n_train:n_train + n_val]] = "val"
    split[order[n_train + n_val:]] = "test"
    return g.replace(split=split)


def homophily_level(g: Graph) -> float:
    """Node-averaged fraction of same-label neighbours; isolated nodes are skipped."""
    if g.labels is None:
        raise ValueError("homophily_level requires every node to be labelled")
    if g.num_edges == 0:
        return float("nan")
    i, j = g.edges[:, 0], g.edges[:, 1]
    same = (g.labels[i] == g.labels[j]).astype(float)
    n = g.num_nodes
    deg = np.bincount(i, minlength=n) + np.bincount(j, minlength=n)
    hits = np.bincount(i, weights=same, minlength=n) + np.bincount(j, weights=same, minlength=n)
    keep = deg > 0
    # fsum is correctly rounded, so the result does not depend on node order.
    return math.fsum(hits[keep] / deg[keep]) / int(keep.sum())


def _check_perm(perm, n: int) -> np.ndarray:
    perm = np.asarray(perm, dtype=np.int64).reshape(-1)
    if len(perm) != n or not np.array_equal(np.sort(perm), np.arange(n)):
        raise ValueError(f"permutation must be a bijection of [0, {n})")
    return perm


def permute_graph(g: Graph, perm) -> Graph:
    """Relabel node ``i`` as ``perm[i]``; features, labels and split move with it."""
    perm = _check_perm(perm, g.num_nodes)
    inv = np.argsort(perm)

    def rows(a):
        return None if a is None else a[inv]

    return Graph(
        num_nodes=g.num_nodes,
        edges=perm[g.edges] if g.num_edges else g.edges,
        weights=g.weights,
        features=g.features[inv],
        labels=rows(g.labels),
        split=rows(g.split),
        num_classes=g.num_classes,
    )


def permute_rows(x: np.ndarray, perm) -> np.ndarray:
    """Apply the node relabelling ``perm`` to the rows of a node-indexed array."""
    perm = _check_perm(perm, x.shape[0])
    out = np.empty_like(x)
    out[perm] = x
    return out


def _reject_constant(name):
    raise GraphFormatError(f"non-finite number {name} is not permitted")


def graph_to_dict(g: Graph) -> dict:
    edges = []
    for (i, j), w in zip(g.edges.tolist(), g.weights.tolist()):
        edges.append([i, j] if w == 1.0 else [i, j, w])
    out = {"num_nodes": g.num_nodes, "edges": edges, "features": g.features.tolist()}
    if g.labels is not None:
        out["labels"] = g.labels.tolist()
    if g.split is not None:
        out["split"] = [str(s) for s in g.split]
    return out


def graph_from_dict(obj: dict) -> Graph:
    if not isinstance(obj, dict):
        raise GraphFormatError("top-level JSON value must be an object")
    for key in ("num_nodes", "edges", "features"):
        if key not in obj:
            raise GraphFormatError(f"missing required field {key!r}")
    n = obj["num_nodes"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise GraphFormatError(f"field 'num_nodes' must be a positive integer, got {n!r}")
    pairs, weights = [], []
    for k, e in enumerate(obj["edges"]):
        if not isinstance(e, list) or len(e) not in (2, 3):
            raise GraphFormatError(f"edges[{k}] must be [i, j] or [i, j, w], got {e!r}")
        i, j = e[0], e[1]
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in (i, j)):
            raise GraphFormatError(f"edges[{k}] = {e!r}: endpoints must be integers")
        if not (0 <= i < n and 0 <= j < n):
            raise GraphFormatError(f"edges[{k}] = {e!r}: node index out of range [0, {n})")
        pairs.append((i, j))
        weights.append(float(e[2]) if len(e) == 3 else 1.0)
    feats = obj["features"]
    if not isinstance(feats, list) or len(feats) != n:
        raise GraphFormatError(f"field 'features' must hold {n} rows")
    widths = {len(r) if isinstance(r, list) else -1 for r in feats}
    if len(widths) != 1 or widths == {-1}:
        raise GraphFormatError("field 'features' rows must be arrays of equal length")
    return Graph(
        num_nodes=n,
        edges=np.array(pairs, dtype=np.int64).reshape(-1, 2),
        weights=np.array(weights, dtype=float),
        features=np.array(feats, dtype=float).reshape(n, -1),
        labels=obj.get("labels"),
        split=obj.get("split"),
    )


def load_graph(path) -> Graph:
    text = Path(path).read_text(encoding="utf-8")
    try:
        obj = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return graph_from_dict(obj)
    except GraphFormatError as exc:
        raise GraphFormatError(f"{path}: {exc}") from exc


def save_graph(g: Graph, path) -> None:
    Path(path).write_text(json.dumps(graph_to_dict(g), allow_nan=False), encoding="utf-8")
