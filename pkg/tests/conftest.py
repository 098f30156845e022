import numpy as np
import pytest

from eeconv.graph import Graph, build_matrices, circulant_graph, erdos_renyi


def path2(x=(1.0, 0.0)):
    return Graph(2, np.array([[0, 1]]), np.asarray(x, dtype=float)[:, None])


def triangle(features=None):
    f = np.ones((3, 1)) if features is None else features
    return Graph(3, np.array([[0, 1], [0, 2], [1, 2]]), f)


def edgeless(n, d=2, seed=0):
    return Graph(n, np.zeros((0, 2), dtype=int), np.random.default_rng(seed).standard_normal((n, d)))


def random_corpus(count=20, seed=0, max_nodes=40, feature_dim=3):
    """Random graphs of mixed density and size, some disconnected."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        n = int(rng.integers(2, max_nodes + 1))
        p = float(rng.uniform(0.05, 0.6))
        out.append(erdos_renyi(n, p, feature_dim=feature_dim, seed=seed * 1000 + k))
    return out


@pytest.fixture
def p2():
    return path2()


@pytest.fixture
def k3():
    return triangle()


@pytest.fixture
def p2m():
    return build_matrices(path2())


@pytest.fixture
def k3m():
    return build_matrices(triangle())


@pytest.fixture
def cycle():
    return circulant_graph(10, [1], feature_dim=3, seed=4)


ACCEPTANCE_LINES = []


def record_criterion(number, name, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d} {name}: {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
