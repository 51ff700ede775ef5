import numpy as np
import pytest

from graphsac import Graph, LabelMatrix


@pytest.fixture
def path3():
    """Path graph 0-1-2."""
    return Graph.from_edges([(0, 1, 1.0), (1, 2, 1.0)])


@pytest.fixture
def triangle():
    return Graph.from_edges([(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])


@pytest.fixture
def star5():
    """Star with center 0 and leaves 1..4."""
    return Graph.from_edges([(0, i, 1.0) for i in range(1, 5)])


def random_graph(rng, num_nodes, edge_prob=0.3, weighted=False):
    """Erdos-Renyi helper used across the oracle-equivalence suites."""
    edges = []
    for u in range(num_nodes):
        for v in range(u + 1, num_nodes):
            if rng.random() < edge_prob:
                w = float(rng.integers(1, 4)) if weighted else 1.0
                edges.append((u, v, w))
    return Graph.from_edges(edges, num_nodes=num_nodes)


def random_labels(rng, num_nodes, num_classes):
    return LabelMatrix.from_array(
        rng.integers(0, num_classes, size=num_nodes), num_classes=num_classes
    )


def dense_series(graph, coefficients):
    """Dense h(A) built from explicit matrix powers: the diffusion oracle."""
    n = graph.num_nodes
    d = graph.degrees
    with np.errstate(divide="ignore"):
        inv = np.where(d > 0, 1.0 / np.sqrt(np.where(d > 0, d, 1.0)), 0.0)
    norm = np.diag(inv) @ graph.dense_adjacency() @ np.diag(inv)
    out = coefficients[0] * np.eye(n)
    power = np.eye(n)
    for a in coefficients[1:]:
        power = norm @ power
        out += a * power
    return out
