"""Ground-truth anomaly generators.

Three generators cover the usual corruption modes on labeled graphs:

* random-walk label anomalies: a node takes the label of the node a short
  random walk lands on, so its label no longer matches its neighborhood;
* clustered anomalies: a connected cluster is relabeled to the label least
  common inside it, producing a homophilic but implausible region;
* random-walk edge anomalies: a node gains edges to walk landing points,
  distorting its structural role while labels stay put.

All generators are copy-on-write (inputs untouched), sample anomalies
without replacement, and are deterministic for a fixed RNG seed.  Random
walks pick neighbors uniformly, ignoring edge weights.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field

import numpy as np

from .errors import BoundsError, GraphsacError
from .graph import Graph, GraphLoadOptions, LabelMatrix, load_graph, _open_text


@dataclass(frozen=True)
class InjectionResult:
    """A perturbed graph/labeling plus the planted anomaly set."""

    graph: Graph
    labels: LabelMatrix
    anomalies: tuple[int, ...]
    metadata: dict = field(default_factory=dict)

    @property
    def mask(self) -> np.ndarray:
        out = np.zeros(self.graph.num_nodes, dtype=bool)
        out[list(self.anomalies)] = True
        return out


def random_walk(graph: Graph, start: int, length: int, rng: np.random.Generator) -> int:
    """Landing node of a simple random walk (uniform neighbor per step)."""
    node = start
    for _ in range(length):
        nbrs = graph.neighbors(node)
        if nbrs.size == 0:
            return node
        node = int(nbrs[rng.integers(nbrs.size)])
    return node


def _sample_anomalies(graph: Graph, count: int, rng: np.random.Generator) -> np.ndarray:
    if count > graph.num_nodes:
        raise BoundsError(f"cannot plant {count} anomalies in {graph.num_nodes} nodes")
    eligible = np.flatnonzero(graph.degrees > 0)
    if eligible.size < count:
        raise GraphsacError(
            f"only {eligible.size} nodes with positive degree, need {count}"
        )
    picks = rng.choice(eligible, size=count, replace=False)
    picks.sort()
    return picks


def inject_rw_label_anomalies(
    graph: Graph,
    labels: LabelMatrix,
    count: int,
    walk_length: int = 10,
    rng: np.random.Generator | None = None,
) -> InjectionResult:
    """Replace each anomaly's label with the label of its walk landing node.

    The replacement happens even when the landing node carries the same
    label, so some planted anomalies can be undetectable in principle.
    """
    rng = rng if rng is not None else np.random.default_rng()
    anomalies = _sample_anomalies(graph, count, rng)
    replacements = {}
    changed = 0
    for node in anomalies:
        landing = random_walk(graph, int(node), walk_length, rng)
        new_row = labels.rows[landing]
        if new_row != labels.rows[node]:
            changed += 1
        replacements[int(node)] = new_row
    return InjectionResult(
        graph=graph,
        labels=labels.replace_rows(replacements),
        anomalies=tuple(int(a) for a in anomalies),
        metadata={"kind": "rw-labels", "walk_length": walk_length, "changed": changed},
    )


def _semi_sync_label_propagation(
    graph: Graph, rng: np.random.Generator, max_rounds: int = 100
) -> list[set[int]]:
    """Community detection by semi-synchronous label propagation.

    Nodes are greedily colored so that adjacent nodes never update together;
    color classes then update in turn, each node adopting the most frequent
    label among its neighbors (ties broken at random).  The coloring makes
    the sweep convergent.
    """
    n = graph.num_nodes
    order = sorted(range(n), key=lambda v: (-graph.degrees[v], v))
    colors = np.full(n, -1, dtype=np.intp)
    for v in order:
        used = {colors[u] for u in graph.neighbors(v) if colors[u] >= 0}
        c = 0
        while c in used:
            c += 1
        colors[v] = c
    classes = [np.flatnonzero(colors == c) for c in range(colors.max() + 1)]

    comm = np.arange(n, dtype=np.intp)
    for _ in range(max_rounds):
        moved = False
        for group in classes:
            for v in group:
                nbrs = graph.neighbors(v)
                if nbrs.size == 0:
                    continue
                counts = Counter(comm[u] for u in nbrs)
                top = max(counts.values())
                best = sorted(lab for lab, cnt in counts.items() if cnt == top)
                pick = best[rng.integers(len(best))] if len(best) > 1 else best[0]
                if pick != comm[v]:
                    comm[v] = pick
                    moved = True
        if not moved:
            break
    groups: dict[int, set[int]] = {}
    for v in range(n):
        groups.setdefault(int(comm[v]), set()).add(v)
    return list(groups.values())


def _component_sizes(graph: Graph) -> np.ndarray:
    """Size of the connected component of each node."""
    n = graph.num_nodes
    comp = np.full(n, -1, dtype=np.intp)
    cid = 0
    for start in range(n):
        if comp[start] >= 0:
            continue
        queue = deque([start])
        comp[start] = cid
        while queue:
            v = queue.popleft()
            for u in graph.neighbors(v):
                if comp[u] < 0:
                    comp[u] = cid
                    queue.append(int(u))
        cid += 1
    counts = np.bincount(comp)
    return counts[comp]


def _grow_cluster(graph: Graph, community: set[int], core: int, size: int) -> list[int]:
    """BFS from the core, community members first, until ``size`` nodes."""
    seen = {core}
    cluster = [core]
    queue = deque([core])
    while queue and len(cluster) < size:
        v = queue.popleft()
        nbrs = sorted(int(u) for u in graph.neighbors(v))
        inside = [u for u in nbrs if u in community and u not in seen]
        outside = [u for u in nbrs if u not in community and u not in seen]
        for u in inside + outside:
            if len(cluster) >= size:
                break
            seen.add(u)
            cluster.append(u)
            queue.append(u)
    return cluster


def inject_clustered_anomalies(
    graph: Graph,
    labels: LabelMatrix,
    count: int,
    rng: np.random.Generator | None = None,
) -> InjectionResult:
    """Relabel a connected size-``count`` cluster to its least common label.

    The cluster comes from a label-propagation community, grown or trimmed
    to the requested size by BFS from the member with the highest internal
    degree.  Ties on the least common label go to the smallest class id.
    """
    if not labels.is_single_label:
        raise GraphsacError("clustered anomalies are defined for single-label graphs only")
    rng = rng if rng is not None else np.random.default_rng()
    comp_sizes = _component_sizes(graph)
    communities = _semi_sync_label_propagation(graph, rng)
    eligible = [
        c for c in communities if comp_sizes[next(iter(c))] >= count and len(c) > 0
    ]
    if not eligible:
        raise GraphsacError(f"no connected component of size >= {count}")
    eligible.sort(key=min)
    community = eligible[rng.integers(len(eligible))]

    internal_degree = {
        v: sum(1 for u in graph.neighbors(v) if int(u) in community) for v in community
    }
    core = min(community, key=lambda v: (-internal_degree[v], v))
    cluster = _grow_cluster(graph, community, core, count)
    if len(cluster) < count:
        raise GraphsacError(f"no connected component of size >= {count}")

    y = labels.labels_array()
    tally = Counter(int(y[v]) for v in cluster)
    least = min(tally, key=lambda lab: (tally[lab], lab))
    degenerate = all(int(y[v]) == least for v in cluster)
    replacements = {v: (least,) for v in cluster}
    return InjectionResult(
        graph=graph,
        labels=labels.replace_rows(replacements),
        anomalies=tuple(sorted(cluster)),
        metadata={
            "kind": "clustered",
            "core": int(core),
            "target_label": int(least),
            "degenerate": degenerate,
        },
    )


def inject_rw_structural_anomalies(
    graph: Graph,
    labels: LabelMatrix,
    count: int,
    walk_length: int = 10,
    repeats: int = 5,
    rng: np.random.Generator | None = None,
) -> InjectionResult:
    """Connect each anomaly to the landing nodes of ``repeats`` random walks.

    Self-landings are skipped and duplicate edges collapse, so each anomaly
    gains at most ``repeats`` new connections.  Labels are unchanged.
    """
    rng = rng if rng is not None else np.random.default_rng()
    anomalies = _sample_anomalies(graph, count, rng)
    existing = graph.edge_set()
    proposed = set()
    for node in anomalies:
        for _ in range(repeats):
            landing = random_walk(graph, int(node), walk_length, rng)
            if landing == int(node):
                continue
            proposed.add((min(int(node), landing), max(int(node), landing)))
    added = sorted(proposed - existing)
    new_graph = graph.with_extra_edges(proposed) if proposed else graph
    return InjectionResult(
        graph=new_graph,
        labels=labels,
        anomalies=tuple(int(a) for a in anomalies),
        metadata={
            "kind": "rw-edges",
            "walk_length": walk_length,
            "repeats": repeats,
            "added_edges": added,
        },
    )


def ingest_perturbed_graph(
    original: Graph,
    perturbed_source,
    targets_source,
    labels: LabelMatrix | None = None,
    options: GraphLoadOptions | None = None,
) -> InjectionResult:
    """Wrap an externally perturbed edge list plus its target list.

    The target file lists one node id per line; targets become the anomaly
    set.  Labels pass through unchanged (structural perturbations only);
    metadata reports the edge diff against the original graph.
    """
    options = options or GraphLoadOptions(num_nodes=original.num_nodes)
    perturbed = load_graph(perturbed_source, options)
    if labels is None:
        labels = LabelMatrix(
            num_classes=1, rows=tuple((0,) for _ in range(perturbed.num_nodes))
        )
    targets = []
    with _open_text(targets_source) as handle:
        for line in handle:
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            node = int(text)
            if node < 0 or node >= perturbed.num_nodes:
                raise BoundsError(f"target {node} outside [0, {perturbed.num_nodes})")
            targets.append(node)
    before = original.edge_set()
    after = perturbed.edge_set()
    return InjectionResult(
        graph=perturbed,
        labels=labels,
        anomalies=tuple(sorted(set(targets))),
        metadata={
            "kind": "perturbed",
            "edges_added": len(after - before),
            "edges_removed": len(before - after),
        },
    )


def make_injector(kind: str, **params):
    """Factory used by sweeps and the CLI: returns ``f(graph, labels, count, rng)``."""
    if kind == "rw-labels":
        walk_length = params.get("walk_length", 10)
        return lambda g, y, k, rng: inject_rw_label_anomalies(g, y, k, walk_length, rng)
    if kind == "clustered":
        return lambda g, y, k, rng: inject_clustered_anomalies(g, y, k, rng)
    if kind == "rw-edges":
        walk_length = params.get("walk_length", 10)
        repeats = params.get("repeats", 5)
        return lambda g, y, k, rng: inject_rw_structural_anomalies(
            g, y, k, walk_length, repeats, rng
        )
    raise ValueError(f"unknown injector kind {kind!r}")
