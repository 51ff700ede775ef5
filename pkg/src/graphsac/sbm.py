"""Stochastic block model generator for offline experiments.

Each community gets one class label, intra-community pairs connect with
probability ``p_in`` and cross-community pairs with ``p_out < p_in``.
Generation is fully determined by the seed.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .graph import Graph, LabelMatrix


def generate_sbm(
    sizes,
    p_in: float,
    p_out: float,
    seed: int = 0,
) -> tuple[Graph, LabelMatrix]:
    """Sample a stochastic block model and community-aligned labels.

    Parameters
    ----------
    sizes : sequence of int
        Community sizes; community ``i`` gets class label ``i``.
    p_in, p_out : float
        Edge probabilities inside and across communities; requires
        ``p_in > p_out >= 0``.
    """
    sizes = [int(s) for s in sizes]
    if any(s < 1 for s in sizes):
        raise ConfigError("community sizes must be >= 1")
    if not (0.0 <= p_out < p_in <= 1.0):
        raise ConfigError(f"need 0 <= p_out < p_in <= 1, got p_in={p_in}, p_out={p_out}")
    n = sum(sizes)
    community = np.repeat(np.arange(len(sizes)), sizes)
    rng = np.random.default_rng(seed)

    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(community[iu] == community[ju], p_in, p_out)
    keep = rng.random(iu.size) < prob
    edges = [(int(u), int(v), 1.0) for u, v in zip(iu[keep], ju[keep])]
    graph = Graph.from_edges(edges, num_nodes=n)
    labels = LabelMatrix.from_array(community, num_classes=len(sizes))
    return graph, labels


def demo_pair(seed: int = 7) -> tuple[Graph, LabelMatrix]:
    """Tiny bundled two-community example used by the CLI's --demo flag."""
    return generate_sbm([8, 8], p_in=0.9, p_out=0.08, seed=seed)
