"""Diffusion-based semi-supervised label models.

A model predicts label distributions from a seed set L as ``h(A) @ Y_L``,
where ``h`` is a truncated power series in the symmetrically normalized
adjacency and ``Y_L`` is the label matrix with only the seed rows populated.
Two series are provided: personalized PageRank coefficients
``a_t = alpha * (1-alpha)^t`` and heat-kernel coefficients
``a_t = exp(-s) * s^t / t!``.  One solve costs O(E*C*T + N*C): the series is
evaluated by repeated sparse application, never materializing ``h(A)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import Graph, LabelMatrix

DEFAULT_ORDER = {"ppr": 10, "heat": 15}


@dataclass(frozen=True)
class DiffusionModel:
    """Truncated diffusion series over the normalized adjacency.

    All coefficients are strictly positive and their sum never exceeds 1,
    so predictions stay bounded.
    """

    kind: str = "ppr"
    order: int | None = None
    teleport: float = 0.15
    scale: float = 5.0

    def __post_init__(self):
        if self.kind not in DEFAULT_ORDER:
            raise ValueError(f"unknown diffusion kind {self.kind!r}")
        if not 0.0 < self.teleport < 1.0:
            raise ValueError("teleport must be in (0, 1)")
        if self.scale <= 0.0:
            raise ValueError("scale must be positive")
        if self.order is not None and self.order < 0:
            raise ValueError("order must be >= 0")

    @property
    def effective_order(self) -> int:
        return self.order if self.order is not None else DEFAULT_ORDER[self.kind]

    def coefficients(self) -> np.ndarray:
        t = np.arange(self.effective_order + 1)
        if self.kind == "ppr":
            coef = self.teleport * (1.0 - self.teleport) ** t
        else:
            coef = np.exp(
                -self.scale + t * np.log(self.scale) - np.array([math.lgamma(k + 1) for k in t])
            )
        return coef


def _check_seeds(seeds, num_nodes):
    idx = np.asarray(list(seeds), dtype=np.intp)
    if idx.size == 0:
        raise ValueError("seed set is empty")
    if idx.min() < 0 or idx.max() >= num_nodes:
        raise ValueError("seed index out of range")
    if np.unique(idx).size != idx.size:
        raise ValueError("duplicate seed indices")
    return idx


def apply_series(model: DiffusionModel, graph: Graph, mat: np.ndarray) -> np.ndarray:
    """Evaluate ``h(A) @ mat`` by repeated sparse application."""
    coef = model.coefficients()
    op = graph.normalized_operator
    out = coef[0] * mat
    x = mat
    for a in coef[1:]:
        x = op.apply(x)
        out = out + a * x
    return out


def predict_raw(
    model: DiffusionModel, graph: Graph, labels: LabelMatrix, seeds
) -> np.ndarray:
    """Linear prediction ``h(A) @ Y_L`` without row normalization.

    This is the quantity the counting arguments in :mod:`graphsac.oracle`
    rely on: it is additive over disjoint seed sets.
    """
    idx = _check_seeds(seeds, graph.num_nodes)
    out = apply_series(model, graph, labels.masked_dense(idx))
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite diffusion output; operator mis-normalized?")
    return out


def predict(
    model: DiffusionModel, graph: Graph, labels: LabelMatrix, seeds
) -> np.ndarray:
    """Row-stochastic label distributions from the seed set.

    Rows are normalized to sum 1; rows with no diffused mass (nodes isolated
    or unreachable from the seeds within the series order) fall back to the
    uniform distribution so downstream cross-entropy stays finite.
    """
    out = predict_raw(model, graph, labels, seeds)
    sums = out.sum(axis=1, keepdims=True)
    reachable = sums[:, 0] > 0.0
    np.divide(out, sums, out=out, where=reachable[:, None])
    out[~reachable] = 1.0 / labels.num_classes
    return out


def diffusion_column_norms(model: DiffusionModel, graph: Graph) -> np.ndarray:
    """1-norms of the columns of ``h(A)``, one per node.

    ``h(A)`` is symmetric with nonnegative entries, so the column 1-norms
    equal ``h(A) @ 1`` and come out of a single series evaluation for any N.
    High-degree nodes carry larger norms and therefore weigh more in the
    diffusion output.
    """
    return apply_series(model, graph, np.ones(graph.num_nodes))


def dense_diffusion_matrix(model: DiffusionModel, graph: Graph, cap: int = 2000) -> np.ndarray:
    """Materialize ``h(A)`` densely; intended for small-instance checks."""
    n = graph.num_nodes
    if n > cap:
        raise ValueError(f"dense diffusion matrix capped at {cap} nodes, got {n}")
    coef = model.coefficients()
    base = graph.normalized_operator.dense()
    out = coef[0] * np.eye(n)
    power = np.eye(n)
    for a in coef[1:]:
        power = base @ power
        out += a * power
    return out
