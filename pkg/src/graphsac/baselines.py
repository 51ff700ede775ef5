"""Connectivity-only egonet baselines.

Each node is scored by a community-quality measure of its egonet (the node,
its neighbors, and all edges among them): average degree, cut ratio, flake
fraction, or conductance.  Scores are oriented so that higher always means
more anomalous: sparse egonets for average degree, leaky egonets for the
other three.  Edge weights are ignored; these are pure connectivity
measures.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph
from .sampler import ScoreVector

METRICS = ("avg-degree", "cut-ratio", "flake", "conductance")


@dataclass(frozen=True)
class Egonet:
    """Edge counts of a node's one-hop induced subgraph."""

    center: int
    members: tuple[int, ...]
    internal_edges: int
    boundary_edges: int

    @property
    def size(self) -> int:
        return len(self.members)


def egonet_stats(graph: Graph, n: int) -> Egonet:
    """Exact internal/boundary edge counts via neighbor-set intersection."""
    members = np.concatenate(([n], graph.neighbors(n)))
    members = np.unique(members)
    inside = np.zeros(graph.num_nodes, dtype=bool)
    inside[members] = True
    twice_internal = 0
    boundary = 0
    for m in members:
        nbrs = graph.neighbors(int(m))
        internal = int(inside[nbrs].sum())
        twice_internal += internal
        boundary += nbrs.size - internal
    return Egonet(
        center=int(n),
        members=tuple(int(m) for m in members),
        internal_edges=twice_internal // 2,
        boundary_edges=boundary,
    )


def _quality(graph: Graph, ego: Egonet, metric: str) -> float:
    size = ego.size
    e_in = ego.internal_edges
    e_out = ego.boundary_edges
    if metric == "avg-degree":
        return 2.0 * e_in / size
    if metric == "cut-ratio":
        outside = graph.num_nodes - size
        return e_out / (size * outside) if outside > 0 else 0.0
    if metric == "flake":
        inside = np.zeros(graph.num_nodes, dtype=bool)
        inside[list(ego.members)] = True
        weak = 0
        for m in ego.members:
            nbrs = graph.neighbors(m)
            internal = int(inside[nbrs].sum())
            if internal < nbrs.size - internal:
                weak += 1
        return weak / size
    if metric == "conductance":
        denom = 2 * e_in + e_out
        return e_out / denom if denom > 0 else 0.0
    raise ValueError(f"unknown metric {metric!r}")


def baseline_scores(graph: Graph, metric: str, invert: bool = False) -> ScoreVector:
    """Anomaly scores from an egonet quality measure.

    ``invert=True`` flips the default orientation, for datasets where the
    opposite convention ranks better.  Degenerate egonets score 0.
    """
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")
    values = np.empty(graph.num_nodes)
    for n in range(graph.num_nodes):
        q = _quality(graph, egonet_stats(graph, n), metric)
        values[n] = -q if metric == "avg-degree" else q
    if invert:
        values = -values
    return ScoreVector(values=values)
