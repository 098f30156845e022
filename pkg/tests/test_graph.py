import math

import numpy as np
import pytest

from eeconv.graph import (
    Graph,
    GraphFormatError,
    SbmConfig,
    build_matrices,
    circulant_graph,
    erdos_renyi,
    graph_from_dict,
    homophily_level,
    load_graph,
    permute_graph,
    permute_rows,
    random_split,
    save_graph,
    sbm_generate,
)

from conftest import path2, random_corpus


def test_isolated_node_matrices():
    gm = build_matrices(Graph(1, [], [[2.0]]))
    assert gm.a_tilde.tolist() == [[1.0]]
    assert gm.d_tilde.tolist() == [1.0]
    assert gm.a_hat.tolist() == [[1.0]]
    assert gm.delta_tilde.tolist() == [[0.0]]


def test_p2_matrices(p2m):
    np.testing.assert_allclose(p2m.a_hat, [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)
    np.testing.assert_allclose(p2m.delta_tilde, [[0.5, -0.5], [-0.5, 0.5]], atol=1e-15)


def test_k3_spectrum(k3m):
    np.testing.assert_allclose(np.linalg.eigvalsh(k3m.delta_tilde), [0, 1, 1], atol=1e-12)


@pytest.mark.parametrize("g", random_corpus(10, seed=3), ids=lambda g: f"n{g.num_nodes}")
def test_matrix_invariants(g):
    gm = build_matrices(g)
    assert np.max(np.abs(gm.a_hat - gm.a_hat.T)) <= 1e-12
    assert np.max(np.abs(gm.delta_tilde - gm.delta_tilde.T)) <= 1e-12
    np.testing.assert_allclose(gm.a_tilde.sum(axis=1), gm.d_tilde)
    w = np.linalg.eigvalsh(gm.delta_tilde)
    assert w.min() >= -1e-9 and w.max() <= 2 + 1e-9
    root = np.sqrt(gm.d_tilde)
    for c in np.unique(gm.components):
        v = np.where(gm.components == c, root, 0.0)
        assert np.max(np.abs(gm.delta_tilde @ v)) <= 1e-9
    xs = np.random.default_rng(0).standard_normal((g.num_nodes, 100))
    assert np.min(np.einsum("ik,ij,jk->k", xs, gm.delta_tilde, xs)) >= -1e-10


def test_graph_canonicalises_and_rejects_bad_edges():
    g = Graph(3, [[2, 0], [1, 0]], np.zeros((3, 1)))
    assert g.edges.tolist() == [[0, 1], [0, 2]]
    with pytest.raises(GraphFormatError, match="self-loop"):
        Graph(2, [[1, 1]], np.zeros((2, 1)))
    with pytest.raises(GraphFormatError, match="duplicate"):
        Graph(2, [[0, 1], [1, 0]], np.zeros((2, 1)))
    with pytest.raises(GraphFormatError, match=r"edges\[0\] = \[0, 2\]"):
        Graph(2, [[0, 2]], np.zeros((2, 1)))
    with pytest.raises(GraphFormatError, match="rows"):
        Graph(3, [], np.zeros((2, 1)))
    with pytest.raises(GraphFormatError, match="num_classes"):
        Graph(2, [], np.zeros((2, 1)), labels=[0, 2], num_classes=2)


def test_graph_is_immutable(p2):
    with pytest.raises(ValueError):
        p2.features[0, 0] = 5.0


def test_sbm_degenerate_probabilities():
    g = sbm_generate(SbmConfig(p_intra=1.0, q_inter=0.0))
    comps = g.components()
    assert len(np.unique(comps)) == 2
    assert g.num_edges == 2 * math.comb(50, 2)
    assert np.all(comps[:50] == comps[0]) and np.all(comps[50:] == comps[50])
    assert sbm_generate(SbmConfig(p_intra=0.0, q_inter=0.0)).num_edges == 0


def test_sbm_edge_count_matches_binomial_expectation():
    counts = np.array([sbm_generate(SbmConfig(feature_dim=1, seed=s)).num_edges for s in range(1000)])
    n_in, n_out = 2 * math.comb(50, 2), 50 * 50
    mean = 0.5 * n_in + 0.05 * n_out
    var = n_in * 0.25 + n_out * 0.05 * 0.95
    # The sample mean of 1000 draws has standard error sqrt(var / 1000).
    assert abs(counts.mean() - mean) <= 3 * math.sqrt(var / 1000)
    assert abs(counts.std() - math.sqrt(var)) <= 0.15 * math.sqrt(var)


def test_sbm_features_and_labels():
    g = sbm_generate(SbmConfig(nodes_per_block=400, feature_dim=5, seed=1))
    assert g.labels.tolist() == [0] * 400 + [1] * 400
    se = 1 / math.sqrt(400 * 5)
    assert abs(g.features[:400].mean() - 0.5) <= 4 * se
    assert abs(g.features[400:].mean() + 0.5) <= 4 * se
    np.testing.assert_allclose(g.features.std(axis=0).mean(), math.sqrt(1 + 0.25), atol=0.05)


def test_sbm_reproducible():
    assert sbm_generate(SbmConfig(seed=9)) == sbm_generate(SbmConfig(seed=9))
    assert sbm_generate(SbmConfig(seed=9)) != sbm_generate(SbmConfig(seed=10))


@pytest.mark.parametrize("kw", [{"p_intra": 1.5}, {"q_inter": -0.1}, {"num_blocks": 1},
                                {"feature_means": [0.0]}])
def test_sbm_config_validation(kw):
    with pytest.raises(ValueError):
        SbmConfig(**kw)


def test_homophily_examples():
    g = Graph(4, [[0, 1], [1, 2], [2, 3]], np.zeros((4, 1)), labels=[1, 1, 1, 1])
    assert homophily_level(g) == 1.0
    assert homophily_level(path2().replace(labels=[0, 1])) == 0.0
    with pytest.raises(ValueError):
        homophily_level(path2())


def test_homophily_oracle_and_isolated_nodes():
    # Star centre 0 with label 0, leaves 1..3 labels 0,1,1; node 4 isolated.
    g = Graph(5, [[0, 1], [0, 2], [0, 3]], np.zeros((5, 1)), labels=[0, 0, 1, 1, 0])
    expected = np.mean([1 / 3, 1.0, 0.0, 0.0])
    assert homophily_level(g) == pytest.approx(expected, abs=1e-15)


def test_homophily_permutation_invariant():
    g = sbm_generate(SbmConfig(seed=2, p_intra=0.2))
    perm = np.random.default_rng(0).permutation(g.num_nodes)
    assert homophily_level(permute_graph(g, perm)) == homophily_level(g)


def test_permute_identity_and_inverse():
    g = random_split(sbm_generate(SbmConfig(nodes_per_block=6, seed=4)), seed=1)
    assert permute_graph(g, np.arange(g.num_nodes)) == g
    perm = np.random.default_rng(1).permutation(g.num_nodes)
    assert permute_graph(permute_graph(g, perm), np.argsort(perm)) == g


def test_permute_p2_swap(p2):
    q = permute_graph(p2, [1, 0])
    assert q.edges.tolist() == [[0, 1]]
    assert q.features[:, 0].tolist() == [0.0, 1.0]


def test_permute_rows_matches_graph_relabel():
    g = erdos_renyi(7, 0.4, feature_dim=2, seed=0)
    perm = np.random.default_rng(5).permutation(7)
    np.testing.assert_array_equal(permute_rows(g.features, perm), permute_graph(g, perm).features)
    with pytest.raises(ValueError):
        permute_graph(g, [0, 0, 1, 2, 3, 4, 5])


def test_circulant_is_regular():
    g = circulant_graph(12, [1, 3])
    assert set(g.degrees().tolist()) == {4.0}


def test_random_split_fractions():
    g = random_split(erdos_renyi(100, 0.1), (0.6, 0.2, 0.2), seed=0)
    assert [int(g.mask(s).sum()) for s in ("train", "validation", "test")] == [60, 20, 20]


def test_json_round_trip(tmp_path):
    g = random_split(sbm_generate(SbmConfig(seed=3)), seed=3)
    save_graph(g, tmp_path / "g.json")
    assert load_graph(tmp_path / "g.json") == g
    w = Graph(3, [[0, 1], [1, 2]], np.eye(3), weights=[0.5, 2.0])
    save_graph(w, tmp_path / "w.json")
    assert load_graph(tmp_path / "w.json") == w


def test_json_single_isolated_node(tmp_path):
    (tmp_path / "g.json").write_text('{"num_nodes": 1, "edges": [], "features": [[0.5]]}')
    g = load_graph(tmp_path / "g.json")
    assert g.num_nodes == 1 and g.num_edges == 0


def test_json_errors_carry_context(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"num_nodes": 2, "edges": [[0, 1], [0, 2]], "features": [[1], [2]]}')
    with pytest.raises(GraphFormatError, match=r"edges\[1\] = \[0, 2\].*out of range"):
        load_graph(p)
    p.write_text('{"num_nodes": 2,\n "edges": [[0, 1]\n "features": []}')
    with pytest.raises(GraphFormatError, match="line 3"):
        load_graph(p)
    p.write_text('{"num_nodes": 1, "edges": [], "features": [[NaN]]}')
    with pytest.raises(GraphFormatError, match="NaN"):
        load_graph(p)
    with pytest.raises(GraphFormatError, match="features"):
        graph_from_dict({"num_nodes": 2, "edges": [], "features": [[1]]})
    with pytest.raises(GraphFormatError, match="num_nodes"):
        graph_from_dict({"edges": [], "features": []})


def test_nonfinite_features_rejected():
    with pytest.raises(GraphFormatError, match="NaN or Inf"):
        Graph(2, [[0, 1]], [[1.0], [float("inf")]])
