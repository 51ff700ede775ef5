"""The sampling-and-consensus detection loop.

Each of I independent draws picks S nodes uniformly at random, predicts all
labels from that seed set, and keeps the draw only if the fraction of nodes
whose predicted class matches their observed label reaches the threshold.
Accepted predictions are averaged and every node is scored by the
cross-entropy between the averaged distribution and its observed label, so
nodes that disagree with the consensus score highest.

Draws use independent RNG streams spawned from the master seed, and the
final average is reduced in draw order, which makes results bit-identical
for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .diffusion import DiffusionModel, predict
from .errors import AllDrawsRejectedError, ConfigError
from .graph import Graph, LabelMatrix

SCORE_EPS = 1e-12


@dataclass(frozen=True)
class GraphSacConfig:
    """Knobs of the detection loop.

    ``sample_size=None`` resolves to ``max(ceil(0.1 * N), C)`` so that every
    class can plausibly appear in a draw.
    """

    sample_size: int | None = None
    num_draws: int = 50
    threshold: float = 0.5
    master_seed: int = 0
    model: DiffusionModel = field(default_factory=DiffusionModel)
    workers: int = 1

    def resolved_sample_size(self, num_nodes: int, num_classes: int) -> int:
        if self.sample_size is not None:
            return self.sample_size
        return min(num_nodes, max(math.ceil(0.1 * num_nodes), num_classes))

    def validate(self, num_nodes: int, num_classes: int):
        s = self.resolved_sample_size(num_nodes, num_classes)
        if not 1 <= s <= num_nodes:
            raise ConfigError(f"sample size {s} outside [1, {num_nodes}]")
        if self.num_draws < 1:
            raise ConfigError("num_draws must be >= 1")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError(f"threshold {self.threshold} outside [0, 1]")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


@dataclass(frozen=True)
class DrawRecord:
    """Outcome of one draw."""

    index: int
    sample: tuple[int, ...]
    consensus_ratio: float
    accepted: bool
    contamination: int | None = None


@dataclass(frozen=True)
class ScoreVector:
    """Per-node anomaly scores with an optional ground-truth mask."""

    values: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("scores must be finite")
        if self.mask is not None and len(self.mask) != len(self.values):
            raise ValueError("mask length mismatch")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class GraphSacResult:
    distribution: np.ndarray
    scores: ScoreVector
    draws: tuple[DrawRecord, ...]

    @property
    def accepted_count(self) -> int:
        return sum(1 for d in self.draws if d.accepted)


def draw_sample(rng: np.random.Generator, num_nodes: int, size: int) -> np.ndarray:
    """Uniform size-``size`` subset of ``0..num_nodes-1``, sorted."""
    if size > num_nodes:
        raise ValueError(f"cannot draw {size} of {num_nodes} nodes without replacement")
    picks = rng.choice(num_nodes, size=size, replace=False)
    picks.sort()
    return picks


def consensus_filter(
    pred: np.ndarray, labels: LabelMatrix, threshold: float
) -> tuple[float, bool]:
    """Fraction of nodes whose argmax class matches an observed label.

    The argmax tie-break is the lowest class index.  For multilabel rows a
    node is in consensus when the argmax class is among its labels.  The
    boundary accepts: a ratio exactly equal to the threshold passes.
    """
    guess = pred.argmax(axis=1)
    hits = labels.dense[np.arange(labels.num_nodes), guess]
    ratio = float(hits.sum() / labels.num_nodes)
    return ratio, ratio >= threshold


def cross_entropy_scores(distribution: np.ndarray, labels: LabelMatrix) -> np.ndarray:
    """Per-node cross-entropy between observed labels and a distribution.

    Probabilities are clamped at ``SCORE_EPS`` before the log, which bounds
    every score; multilabel rows sum the loss over their labels.
    """
    logp = np.log(np.maximum(distribution, SCORE_EPS))
    return -(labels.dense * logp).sum(axis=1)


def run_graphsac(
    graph: Graph,
    labels: LabelMatrix,
    config: GraphSacConfig,
    anomalies=None,
) -> GraphSacResult:
    """Run the full detection loop.

    Parameters
    ----------
    anomalies : iterable of int, optional
        Known ground-truth anomalies; when given, each record carries its
        draw's contamination count and the score vector carries the mask.

    Raises
    ------
    AllDrawsRejectedError
        If no draw passes the filter; retry with a lower threshold.
    """
    n, c = graph.num_nodes, labels.num_classes
    if labels.num_nodes != n:
        raise ConfigError(f"labels cover {labels.num_nodes} nodes, graph has {n}")
    config.validate(n, c)
    size = config.resolved_sample_size(n, c)
    anomaly_set = frozenset(int(a) for a in anomalies) if anomalies is not None else None

    seeds = np.random.SeedSequence(config.master_seed).spawn(config.num_draws)

    def one_draw(i: int):
        rng = np.random.default_rng(seeds[i])
        sample = draw_sample(rng, n, size)
        pred = predict(config.model, graph, labels, sample)
        ratio, accepted = consensus_filter(pred, labels, config.threshold)
        contamination = None
        if anomaly_set is not None:
            contamination = sum(1 for v in sample if int(v) in anomaly_set)
        record = DrawRecord(
            index=i,
            sample=tuple(int(v) for v in sample),
            consensus_ratio=ratio,
            accepted=accepted,
            contamination=contamination,
        )
        return record, pred

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(one_draw, range(config.num_draws)))
    else:
        outcomes = [one_draw(i) for i in range(config.num_draws)]

    total = np.zeros((n, c))
    accepted_count = 0
    records = []
    for record, pred in outcomes:  # ordered reduction: deterministic sums
        records.append(record)
        if record.accepted:
            total += pred
            accepted_count += 1
    if accepted_count == 0:
        raise AllDrawsRejectedError(
            f"all {config.num_draws} draws rejected at threshold {config.threshold}"
        )
    distribution = total / accepted_count

    mask = None
    if anomaly_set is not None:
        mask = np.zeros(n, dtype=bool)
        mask[list(anomaly_set)] = True
    scores = ScoreVector(values=cross_entropy_scores(distribution, labels), mask=mask)
    return GraphSacResult(distribution=distribution, scores=scores, draws=tuple(records))


def rank_anomalies(scores: ScoreVector, k: int) -> np.ndarray:
    """Top-``k`` node ids by descending score; ties break on ascending id."""
    if k > len(scores):
        raise ValueError(f"k={k} exceeds {len(scores)} nodes")
    order = np.argsort(-scores.values, kind="stable")
    return order[:k]
