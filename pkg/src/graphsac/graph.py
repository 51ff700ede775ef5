"""Immutable sparse graph and label storage.

Graphs are undirected, stored in CSR form with strictly positive weights and
no duplicate entries.  Directed input edges are symmetrized by union, keeping
the larger weight when both directions are present.  Node ids are dense
``0..N-1``; loaders can optionally remap sparse external ids.
"""

from __future__ import annotations

import gzip
import io
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import BoundsError, IncompleteLabelsError, ParseError

DEGREE_RTOL = 1e-12


@dataclass(frozen=True)
class GraphLoadOptions:
    """Options for :func:`load_graph`.

    num_nodes:   declared node count; ids >= this raise :class:`BoundsError`.
                 When ``None`` the count is ``1 + max id`` seen.
    keep_self_loops: keep ``(n, n)`` edges instead of dropping them.
    remap_ids:   accept arbitrary integer ids and compact them to ``0..N-1``
                 in order of first appearance; the mapping is stored on the
                 returned graph.
    """

    num_nodes: int | None = None
    keep_self_loops: bool = False
    remap_ids: bool = False


@dataclass(frozen=True)
class Graph:
    """Undirected weighted graph backed by a symmetric CSR matrix."""

    adjacency: sp.csr_matrix
    degrees: np.ndarray
    num_edges: int
    id_map: tuple[int, ...] | None = None

    @property
    def num_nodes(self) -> int:
        return self.adjacency.shape[0]

    @classmethod
    def from_edges(cls, edges, num_nodes=None, keep_self_loops=False, id_map=None):
        """Build a graph from ``(u, v, weight)`` triples.

        Edges are symmetrized by union; duplicates (in either direction)
        collapse to the maximum weight.  Self-loops are dropped unless
        ``keep_self_loops``.
        """
        best: dict[tuple[int, int], float] = {}
        max_id = -1
        for u, v, w in edges:
            if u < 0 or v < 0:
                raise BoundsError(f"negative node id in edge ({u}, {v})")
            if w <= 0:
                raise ParseError(f"non-positive weight {w} on edge ({u}, {v})")
            max_id = max(max_id, u, v)
            if u == v:
                if not keep_self_loops:
                    continue
                key = (u, v)
            else:
                key = (u, v) if u < v else (v, u)
            if w > best.get(key, 0.0):
                best[key] = float(w)
        n = num_nodes if num_nodes is not None else max_id + 1
        if max_id >= n:
            raise BoundsError(f"node id {max_id} >= declared count {n}")
        rows, cols, vals = [], [], []
        for (u, v), w in best.items():
            rows.append(u)
            cols.append(v)
            vals.append(w)
            if u != v:
                rows.append(v)
                cols.append(u)
                vals.append(w)
        adj = sp.csr_matrix(
            (np.asarray(vals, dtype=np.float64), (rows, cols)), shape=(n, n)
        )
        adj.sort_indices()
        degrees = np.asarray(adj.sum(axis=1)).ravel()
        return cls(
            adjacency=adj,
            degrees=degrees,
            num_edges=len(best),
            id_map=tuple(id_map) if id_map is not None else None,
        )

    def neighbors(self, n: int) -> np.ndarray:
        a = self.adjacency
        return a.indices[a.indptr[n] : a.indptr[n + 1]]

    def edge_set(self) -> set[tuple[int, int]]:
        """Undirected edges as ``(u, v)`` pairs with ``u <= v``."""
        coo = sp.triu(self.adjacency).tocoo()
        return {(int(u), int(v)) for u, v in zip(coo.row, coo.col)}

    def with_extra_edges(self, new_edges) -> "Graph":
        """Copy of the graph with additional unit-weight edges.

        Edges already present are left untouched (duplicates collapse into
        the existing, possibly larger, weight).
        """
        coo = sp.triu(self.adjacency).tocoo()
        edges = [(int(u), int(v), float(w)) for u, v, w in zip(coo.row, coo.col, coo.data)]
        edges.extend((u, v, 1.0) for u, v in new_edges)
        return Graph.from_edges(
            edges, num_nodes=self.num_nodes, keep_self_loops=True, id_map=self.id_map
        )

    def dense_adjacency(self) -> np.ndarray:
        return self.adjacency.toarray()

    @cached_property
    def normalized_operator(self) -> "NormalizedOperator":
        return NormalizedOperator.symmetric(self)

    def validate(self):
        """Check structural invariants; raises AssertionError on violation."""
        a = self.adjacency
        assert (a != a.T).nnz == 0, "adjacency must be symmetric"
        assert np.all(a.data > 0), "weights must be strictly positive"
        expected = np.asarray(a.sum(axis=1)).ravel()
        scale = np.maximum(np.abs(expected), 1.0)
        assert np.all(np.abs(self.degrees - expected) <= DEGREE_RTOL * scale)


@dataclass(frozen=True)
class NormalizedOperator:
    """Symmetrically normalized adjacency ``D^{-1/2} A D^{-1/2}``.

    Rows (and columns) of isolated nodes are all-zero, so repeated
    application never produces NaNs and never amplifies mass.
    """

    graph: Graph
    matrix: sp.csr_matrix = field(repr=False)

    @classmethod
    def symmetric(cls, graph: Graph) -> "NormalizedOperator":
        d = graph.degrees
        with np.errstate(divide="ignore"):
            inv_sqrt = np.where(d > 0, 1.0 / np.sqrt(np.where(d > 0, d, 1.0)), 0.0)
        scale = sp.diags(inv_sqrt)
        mat = (scale @ graph.adjacency @ scale).tocsr()
        return cls(graph=graph, matrix=mat)

    def apply(self, v: np.ndarray) -> np.ndarray:
        if v.shape[0] != self.graph.num_nodes:
            raise ValueError(
                f"operand has {v.shape[0]} rows, graph has {self.graph.num_nodes} nodes"
            )
        return self.matrix @ v

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def normalized_apply(op: NormalizedOperator, v: np.ndarray) -> np.ndarray:
    """Apply ``D^{-1/2} A D^{-1/2}`` to a dense N x C matrix in O(E*C)."""
    return op.apply(v)


@dataclass(frozen=True)
class LabelMatrix:
    """Per-node class assignments, one-hot or multi-hot.

    ``rows[n]`` is a sorted tuple of class ids for node ``n``; every node has
    at least one entry and every id is below ``num_classes``.
    """

    num_classes: int
    rows: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        for n, row in enumerate(self.rows):
            if len(row) == 0:
                raise IncompleteLabelsError([n])
            if min(row) < 0 or max(row) >= self.num_classes:
                raise BoundsError(f"label out of range for node {n}: {row}")

    @property
    def num_nodes(self) -> int:
        return len(self.rows)

    @property
    def is_single_label(self) -> bool:
        return all(len(r) == 1 for r in self.rows)

    @cached_property
    def dense(self) -> np.ndarray:
        """N x C 0/1 indicator matrix (read-only)."""
        y = np.zeros((self.num_nodes, self.num_classes))
        for n, row in enumerate(self.rows):
            y[n, list(row)] = 1.0
        y.setflags(write=False)
        return y

    def masked_dense(self, nodes) -> np.ndarray:
        """Indicator matrix with only the given rows populated."""
        out = np.zeros((self.num_nodes, self.num_classes))
        idx = np.asarray(list(nodes), dtype=np.intp)
        out[idx] = self.dense[idx]
        return out

    def labels_array(self) -> np.ndarray:
        """Single label per node; raises if any node is multilabel."""
        if not self.is_single_label:
            raise ValueError("labels are multilabel")
        return np.asarray([r[0] for r in self.rows], dtype=np.intp)

    def replace_rows(self, replacements: dict[int, tuple[int, ...]]) -> "LabelMatrix":
        rows = list(self.rows)
        for n, row in replacements.items():
            rows[n] = tuple(sorted(set(row)))
        return LabelMatrix(num_classes=self.num_classes, rows=tuple(rows))

    @classmethod
    def from_array(cls, labels, num_classes=None) -> "LabelMatrix":
        labels = [int(v) for v in labels]
        c = num_classes if num_classes is not None else 1 + max(labels)
        return cls(num_classes=c, rows=tuple((v,) for v in labels))


def _open_text(source):
    """Text handle over a path (gzip-transparent by extension) or stream."""
    if isinstance(source, (str, Path)):
        path = Path(source)
        if path.suffix == ".gz":
            return gzip.open(path, "rt", encoding="utf-8")
        return open(path, "r", encoding="utf-8")
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8"))
    if isinstance(source, io.TextIOBase):
        return source
    # binary stream
    return io.TextIOWrapper(source, encoding="utf-8")


def load_graph(source, options: GraphLoadOptions | None = None) -> Graph:
    """Load an undirected graph from whitespace-separated edge lines.

    Parameters
    ----------
    source : path, bytes or file object
        Lines of ``src dst [weight]``; ``#`` starts a comment; ``.gz`` paths
        are decompressed transparently.
    options : GraphLoadOptions, optional

    Returns
    -------
    Graph
        Symmetric graph; directed input is symmetrized by union.
    """
    options = options or GraphLoadOptions()
    edges = []
    remap: dict[int, int] = {}

    def resolve(raw: int) -> int:
        if not options.remap_ids:
            return raw
        if raw not in remap:
            remap[raw] = len(remap)
        return remap[raw]

    with _open_text(source) as handle:
        for lineno, line in enumerate(handle, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) not in (2, 3):
                raise ParseError(f"expected 'src dst [weight]', got {text!r}", lineno)
            try:
                u, v = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if u < 0 or v < 0:
                raise ParseError(f"negative node id in {text!r}", lineno)
            edges.append((resolve(u), resolve(v), w))
    id_map = None
    if options.remap_ids:
        id_map = tuple(sorted(remap, key=remap.get))
    return Graph.from_edges(
        edges,
        num_nodes=options.num_nodes,
        keep_self_loops=options.keep_self_loops,
        id_map=id_map,
    )


def load_labels(source, num_nodes: int) -> LabelMatrix:
    """Load labels from ``node<TAB>label[,label...]`` lines.

    Every node in ``[0, num_nodes)`` must be covered; the class count is
    ``1 + max label id``.
    """
    rows: dict[int, tuple[int, ...]] = {}
    max_label = -1
    with _open_text(source) as handle:
        for lineno, line in enumerate(handle, start=1):
            text = line.split("#", 1)[0].rstrip("\n")
            if not text.strip():
                continue
            parts = text.split("\t")
            if len(parts) != 2:
                raise ParseError(f"expected 'node<TAB>label[,label...]', got {text!r}", lineno)
            try:
                node = int(parts[0])
                labels = tuple(sorted({int(tok) for tok in parts[1].split(",")}))
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if node < 0 or node >= num_nodes:
                raise BoundsError(f"node id {node} outside [0, {num_nodes})")
            if any(lab < 0 for lab in labels):
                raise ParseError(f"negative label id in {text!r}", lineno)
            rows[node] = labels
            max_label = max(max_label, *labels)
    missing = [n for n in range(num_nodes) if n not in rows]
    if missing:
        raise IncompleteLabelsError(missing)
    return LabelMatrix(
        num_classes=max_label + 1,
        rows=tuple(rows[n] for n in range(num_nodes)),
    )


def save_edges(graph: Graph, path):
    """Write the edge list in the loader's format (sorted, deterministic)."""
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    coo = sp.triu(graph.adjacency).tocoo()
    triples = sorted(
        (int(u), int(v), float(w)) for u, v, w in zip(coo.row, coo.col, coo.data)
    )
    weighted = any(w != 1.0 for _, _, w in triples)
    with opener(path, "wt", encoding="utf-8", newline="\n") as handle:
        for u, v, w in triples:
            if weighted:
                handle.write(f"{u} {v} {w!r}\n")
            else:
                handle.write(f"{u} {v}\n")


def save_labels(labels: LabelMatrix, path):
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "wt", encoding="utf-8", newline="\n") as handle:
        for n, row in enumerate(labels.rows):
            handle.write(f"{n}\t{','.join(str(c) for c in row)}\n")
